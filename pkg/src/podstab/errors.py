"""Exception hierarchy shared by every module of the package."""


class StabError(Exception):
    """Base class for all errors raised by podstab."""


class SingularMatrix(StabError):
    pass


class NoConvergence(StabError):
    pass


class Overflow(StabError, ArithmeticError):
    pass


class DegenerateSpectrum(StabError):
    """The operator has an eigenvalue at (or numerically at) zero."""


class RankDeficient(StabError):
    """Requested POD dimension exceeds the numerical rank of the snapshots."""


class NotStabilizable(StabError):
    pass


class ImaginaryAxisEigenvalue(StabError):
    pass


class RankDeficientSubspace(StabError):
    """The stable invariant subspace is not a graph over the first block."""


class InsufficientOrder(StabError):
    """POD dimension m is smaller than the number of unstable modes."""


class PoorInitialState(StabError):
    """Initial state misses one of the unstable spectral modes."""


class ConfigError(StabError):
    pass
