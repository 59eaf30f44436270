"""Hopf bifurcations, Lindstedt series and periodic-orbit continuation for a two-delay activator-inhibitor model."""

from .errors import DDEHopfError
from .model import CenteredSystem, Equilibrium, ModelParams, PRESETS, DELAY_RATIOS, solve_equilibria, linearize
from .hopf import HopfPoint, hopf_points, transversality, certify_nonresonance

__all__ = [
    "DDEHopfError", "CenteredSystem", "Equilibrium", "ModelParams", "PRESETS", "DELAY_RATIOS",
    "solve_equilibria", "linearize", "HopfPoint", "hopf_points", "transversality", "certify_nonresonance",
]
