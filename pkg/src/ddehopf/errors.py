"""Exception hierarchy shared by every stage of the pipeline."""


class DDEHopfError(Exception):
    """Base class for all errors raised by :mod:`ddehopf`."""


class InvalidParameters(DDEHopfError, ValueError):
    pass


class NoPositiveRoot(DDEHopfError):
    pass


class CaseViolation(DDEHopfError):
    """The reduced coefficients (b0, b1, b2) admit no Hopf pair."""


class DenominatorZero(DDEHopfError):
    pass


class ResonanceDetected(DDEHopfError):
    def __init__(self, n, value):
        super().__init__(f"|det Delta({n} i omega0, gamma0)| = {value:.3e} is below the resonance floor")
        self.n = n
        self.value = value


class SingularC(DDEHopfError):
    pass


class OrderOverflow(DDEHopfError):
    pass


class NonpositiveFrequency(DDEHopfError):
    pass


class MeshTooCoarse(DDEHopfError):
    pass


class DegenerateOrbit(DDEHopfError):
    """Guess is (numerically) the equilibrium; the phase condition is void."""


class SingularJacobian(DDEHopfError):
    pass


class NoConvergence(DDEHopfError):
    """Newton iteration did not reach tolerance.

    ``best`` holds the iterate with the smallest residual and ``history``
    the residual norms per iteration.
    """

    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = list(history or [])


class PoleEncountered(DDEHopfError):
    pass


class HistoryTooShort(DDEHopfError):
    pass
