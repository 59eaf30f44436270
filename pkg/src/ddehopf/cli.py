"""Command-line front end: ``ddehopf <command> [options]``.

Every command writes CSV or JSON files into the output directory.  The
first line of each CSV is ``# <resolved config as JSON>``; JSON outputs
carry the same object under ``"config"``.  Exit codes: 0 success, 2
configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence

from .bvp import Mesh, newton_correct, orbit_distance
from .continuation import (SUMMARY_COLUMNS, StepControl, auto_epsilon, branch_summary, continue_branch,
                           correction_guess, start_branch)
from .errors import DDEHopfError, InvalidParameters
from .hopf import hopf_points
from .integrator import return_map_error
from .lindstedt import build_expansion, order_table
from .model import DELAY_RATIOS, PRESETS, CenteredSystem, ModelParams, solve_equilibria

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("equilibria", "hopf", "lindstedt", "correct", "continue", "validate")


class ConfigError(Exception):
    pass


@dataclass
class ContinuationConfig:
    max_steps: int = 2000
    h0: float = 1e-2
    hmin: float = 1e-6
    hmax: float = 0.5
    gamma_max: Optional[float] = None
    direction: int = 1
    snapshot_every: int = 0


@dataclass
class RunConfig:
    preset: Optional[str] = "set1"
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    s0: float = 1.5
    equilibrium_index: Optional[int] = None
    gamma_max: Optional[float] = None
    order: int = 3
    epsilon: Optional[float] = None
    hopf_index: Optional[int] = None
    mesh_M: int = 64
    mesh_m: int = 4
    all_delays: bool = False
    jobs: int = 1
    out: str = "out"
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)

    # -- resolution -----------------------------------------------------
    def resolve(self) -> "RunConfig":
        """Fill preset values and validate every downstream precondition."""
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
            p = PRESETS[self.preset]
            self.a = p["a"] if self.a is None else self.a
            self.b = p["b"] if self.b is None else self.b
            self.c = p["c"] if self.c is None else self.c
            if self.equilibrium_index is None:
                self.equilibrium_index = p["equilibrium_index"]
            if self.gamma_max is None:
                self.gamma_max = p["gamma_max"]
        missing = [k for k in ("a", "b", "c") if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"parameters {missing} are required without a preset")
        if self.equilibrium_index is None:
            self.equilibrium_index = 0
        if self.gamma_max is None or not self.gamma_max > 0:
            raise ConfigError("gamma_max must be positive")
        try:
            ModelParams(self.a, self.b, self.c, self.s0)
        except InvalidParameters as exc:
            raise ConfigError(str(exc)) from None
        if self.order < 1 or self.order > 63:
            raise ConfigError("order must lie in 1..63")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        try:
            Mesh(self.mesh_M, self.mesh_m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cc = self.continuation
        if not 0 < cc.hmin <= cc.h0 <= cc.hmax:
            raise ConfigError("continuation steps need 0 < hmin <= h0 <= hmax")
        if cc.direction not in (1, -1) or cc.max_steps < 1 or cc.snapshot_every < 0:
            raise ConfigError("continuation needs direction in {1, -1}, max_steps >= 1, snapshot_every >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def to_json(self) -> dict:
        return asdict(self)

    def provenance(self) -> dict:
        """Config fields that affect results (not where or how parallel they are written)."""
        d = self.to_json()
        d.pop("out")
        d.pop("jobs")
        return d

    def header(self, command: str) -> str:
        return json.dumps({"command": command, **self.provenance()}, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        cont = data.pop("continuation", {}) or {}
        if "mesh" in data:
            mesh = data.pop("mesh")
            data.setdefault("mesh_M", mesh.get("M", 64))
            data.setdefault("mesh_m", mesh.get("m", 4))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cknown = {f.name for f in fields(ContinuationConfig)}
        if set(cont) - cknown:
            raise ConfigError(f"unknown continuation keys: {sorted(set(cont) - cknown)}")
        return cls(**data, continuation=ContinuationConfig(**cont))

    # -- derived objects ------------------------------------------------
    def system(self, s0: Optional[float] = None) -> CenteredSystem:
        params = ModelParams(self.a, self.b, self.c, self.s0 if s0 is None else s0)
        eqs = solve_equilibria(params)
        if not 0 <= self.equilibrium_index < len(eqs):
            raise ConfigError(f"equilibrium index {self.equilibrium_index} out of range ({len(eqs)} found)")
        return CenteredSystem(params, eqs[self.equilibrium_index])

    @property
    def mesh(self) -> Mesh:
        return Mesh(self.mesh_M, self.mesh_m)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v + 0.0)
    return str(v)


def write_csv(path: Path, header: str, columns: Sequence[str], rows: List[dict]) -> None:
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    path.write_text(buf.getvalue())


def write_json(path: Path, header: str, payload: dict) -> None:
    path.write_text(json.dumps({"config": json.loads(header), **payload}, sort_keys=True, indent=1) + "\n")


def _hopf_list(cfg: RunConfig, system: CenteredSystem):
    hps = hopf_points(system.lin, cfg.gamma_max)
    if not hps:
        raise DDEHopfError(f"no Hopf point with gamma0 <= {cfg.gamma_max}")
    if cfg.hopf_index is None:
        return list(enumerate(hps))
    if not 0 <= cfg.hopf_index < len(hps):
        raise ConfigError(f"hopf index {cfg.hopf_index} out of range ({len(hps)} found)")
    return [(cfg.hopf_index, hps[cfg.hopf_index])]


def _first_hopf(cfg: RunConfig, system: CenteredSystem):
    idx = 0 if cfg.hopf_index is None else cfg.hopf_index
    hps = hopf_points(system.lin, cfg.gamma_max)
    if not 0 <= idx < len(hps):
        raise ConfigError(f"hopf index {idx} out of range ({len(hps)} found)")
    return idx, hps[idx]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_equilibria(cfg: RunConfig, out: Path) -> None:
    params = ModelParams(cfg.a, cfg.b, cfg.c, cfg.s0)
    rows = [{"index": i, "u0": e.u0, "v0": e.v0} for i, e in enumerate(solve_equilibria(params))]
    write_csv(out / "equilibria.csv", cfg.header("equilibria"), ("index", "u0", "v0"), rows)


def cmd_hopf(cfg: RunConfig, out: Path) -> None:
    rows = []
    for s0 in (DELAY_RATIOS if cfg.all_delays else (cfg.s0,)):
        system = cfg.system(s0)
        for hp in hopf_points(system.lin, cfg.gamma_max):
            rows.append({"s0": float(s0), "j": hp.j, "gamma0": hp.gamma0, "omega0": hp.omega0,
                         "transversality": hp.transversality, "certified": int(hp.certified.all)})
    write_csv(out / "hopf.csv", cfg.header("hopf"),
              ("s0", "j", "gamma0", "omega0", "transversality", "certified"), rows)


def cmd_lindstedt(cfg: RunConfig, out: Path) -> None:
    if cfg.epsilon is None:
        raise ConfigError("lindstedt requires --eps")
    system = cfg.system()
    idx, hp = _first_hopf(cfg, system)
    exp = build_expansion(system, hp, cfg.order)
    header = cfg.header("lindstedt")
    cols = ("k", "gamma_k", "omega_k", "sup_y_k", "eps_k_sup_y_k")
    write_csv(out / "lindstedt.csv", header, cols, order_table(exp, cfg.epsilon))
    write_json(out / "expansion.json", header, exp.to_json())


def _correct_one(cfg: RunConfig, system, hp, epsilon: Optional[float]):
    exp = build_expansion(system, hp, max(cfg.order, 3) + 1)
    eps = auto_epsilon(exp, K=cfg.order) if epsilon is None else epsilon
    guess = correction_guess(exp, eps, K=cfg.order)
    orbit = newton_correct(system, guess, cfg.mesh)
    return eps, guess, orbit


def cmd_correct(cfg: RunConfig, out: Path) -> None:
    system = cfg.system()
    idx, hp = _first_hopf(cfg, system)
    eps, guess, orbit = _correct_one(cfg, system, hp, cfg.epsilon)
    header = cfg.header("correct")
    row = {"hopf_index": idx, "epsilon": eps, "gamma": orbit.gamma, "T": orbit.T, "iterations": orbit.iterations,
           "residual": orbit.residual, "distance_to_series": orbit_distance(guess, orbit)}
    write_csv(out / "correct.csv", header, tuple(row), [row])
    write_json(out / "orbit.json", header, orbit.to_json())


def _branch_job(cfg_dict: dict, index: int) -> tuple[int, str, List[dict], List[dict]]:
    cfg = RunConfig.from_dict(cfg_dict).resolve()
    system = cfg.system()
    hp = hopf_points(system.lin, cfg.gamma_max)[index]
    exp = build_expansion(system, hp, 4)
    start = start_branch(hp, exp, cfg.epsilon, cfg.mesh)
    cc = cfg.continuation
    gmax = cc.gamma_max if cc.gamma_max is not None else math.inf
    br = continue_branch(start, cc.direction, cc.max_steps, (0.0, gmax), StepControl(cc.h0, cc.hmin, cc.hmax), hp)
    snaps = []
    if cc.snapshot_every:
        for i, p in enumerate(br.points):
            if i % cc.snapshot_every == 0:
                snaps.append({"step": i, **p.orbit.to_json()})
    return index, br.termination.value, branch_summary(br), snaps


def cmd_continue(cfg: RunConfig, out: Path) -> None:
    system = cfg.system()
    indices = [i for i, _ in _hopf_list(cfg, system)]
    cfg_dict = cfg.to_json()
    if cfg.jobs > 1 and len(indices) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_branch_job, [cfg_dict] * len(indices), indices))
    else:
        results = [_branch_job(cfg_dict, i) for i in indices]
    for index, termination, rows, snaps in sorted(results, key=lambda r: r[0]):
        header = json.dumps({**cfg.provenance(), "command": "continue", "hopf_index": index,
                             "termination": termination}, sort_keys=True)
        write_csv(out / f"branch_{index}.csv", header, SUMMARY_COLUMNS, rows)
        if snaps:
            write_json(out / f"branch_{index}_orbits.json", header, {"orbits": snaps})


def cmd_validate(cfg: RunConfig, out: Path) -> None:
    system = cfg.system()
    rows = []
    for idx, hp in _hopf_list(cfg, system):
        eps, guess, orbit = _correct_one(cfg, system, hp, cfg.epsilon)
        rows.append({"hopf_index": idx, "epsilon": eps, "gamma": orbit.gamma, "T": orbit.T,
                     "collocation_residual": orbit.residual, "periodicity_error": orbit.periodicity_error(),
                     "return_map_error": return_map_error(orbit)})
    cols = ("hopf_index", "epsilon", "gamma", "T", "collocation_residual", "periodicity_error", "return_map_error")
    write_csv(out / "validate.csv", cfg.header("validate"), cols, rows)


HANDLERS = {
    "equilibria": cmd_equilibria, "hopf": cmd_hopf, "lindstedt": cmd_lindstedt,
    "correct": cmd_correct, "continue": cmd_continue, "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddehopf", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with a RunConfig object; flags override it")
    parser.add_argument("--preset", choices=sorted(PRESETS))
    parser.add_argument("--a", type=float)
    parser.add_argument("--b", type=float)
    parser.add_argument("--c", type=float)
    parser.add_argument("--s0", type=float)
    parser.add_argument("--all-delays", action="store_true", help="hopf: tabulate every delay ratio of the study")
    parser.add_argument("--equilibrium-index", type=int)
    parser.add_argument("--gamma-max", type=float)
    parser.add_argument("--order", type=int)
    parser.add_argument("--eps", type=float, dest="epsilon")
    parser.add_argument("--hopf-index", type=int)
    parser.add_argument("--mesh-M", type=int, dest="mesh_M")
    parser.add_argument("--mesh-m", type=int, dest="mesh_m")
    parser.add_argument("--max-steps", type=int)
    parser.add_argument("--h0", type=float)
    parser.add_argument("--hmin", type=float)
    parser.add_argument("--hmax", type=float)
    parser.add_argument("--branch-gamma-max", type=float, dest="branch_gamma_max")
    parser.add_argument("--direction", type=int, choices=(1, -1))
    parser.add_argument("--snapshot-every", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--out")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = RunConfig.from_dict(base)
    explicit_params = any(getattr(args, k) is not None for k in ("a", "b", "c"))
    if args.preset is not None:
        cfg.preset = args.preset
    elif explicit_params and "preset" not in base:
        cfg.preset = None
    for name in ("a", "b", "c", "s0", "equilibrium_index", "gamma_max", "order", "epsilon", "hopf_index",
                 "mesh_M", "mesh_m", "jobs", "out"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    if args.all_delays:
        cfg.all_delays = True
    cc = cfg.continuation
    for name in ("max_steps", "h0", "hmin", "hmax", "direction", "snapshot_every"):
        v = getattr(args, name)
        if v is not None:
            setattr(cc, name, v)
    if args.branch_gamma_max is not None:
        cc.gamma_max = args.branch_gamma_max
    return cfg.resolve()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, out)
    except (ConfigError, InvalidParameters, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DDEHopfError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
