from numpy.linalg import LinAlgError


class AmlError(Exception):
    """Base class for errors raised by amlest."""


class ConfigError(AmlError, ValueError):
    """An experiment configuration failed validation."""


class NonFiniteObjectiveError(AmlError, ValueError):
    """
    An objective or function evaluation returned a non-finite value.

    Attributes
    ----------
    point : numpy.ndarray
        The evaluation point that produced the non-finite value.
    """

    def __init__(self, message: str, point=None) -> None:
        super().__init__(message)
        self.point = point


class QuadratureError(AmlError, RuntimeError):
    """
    Adaptive quadrature exhausted its subdivision budget.

    Attributes
    ----------
    estimate : float
        The best estimate of the integral when the budget ran out.
    index : int | None
        The date (or observation) index of the failing integral, if any.
    """

    def __init__(
        self, message: str, estimate: float = float("nan"), index=None
    ) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.index = index


class IdentificationError(AmlError, LinAlgError):
    """The derivative of the simulated pseudo-score is singular."""


class SimulationError(AmlError, ValueError):
    """
    Simulated pseudo-scores could not be computed at a parameter value.

    Attributes
    ----------
    theta : numpy.ndarray
        The structural parameter value that failed.
    """

    def __init__(self, message: str, theta=None) -> None:
        super().__init__(message)
        self.theta = theta


class ParticleCollapseError(AmlError, RuntimeError):
    """
    All particle weights vanished.

    Attributes
    ----------
    date : int
        Index of the date at which the weights collapsed.
    """

    def __init__(self, message: str, date: int) -> None:
        super().__init__(message)
        self.date = date


class BootstrapFailureError(AmlError, RuntimeError):
    """Too many bootstrap replications failed to converge."""

    def __init__(self, message: str, dropped: int, total: int) -> None:
        super().__init__(message)
        self.dropped = dropped
        self.total = total


class DenseGuardError(AmlError, ValueError):
    """The dense MSM representation was requested beyond its size guard."""

    def __init__(self, message: str, k_bar: int) -> None:
        super().__init__(message)
        self.k_bar = k_bar


class DegenerateRegressorError(AmlError, ValueError):
    """A regression was asked to use a constant regressor."""


class DataParseError(AmlError, ValueError):
    """
    A data file could not be parsed.

    Attributes
    ----------
    path : str
        The offending file.
    line : int | None
        One-based line number in the file, when known.
    """

    def __init__(self, message: str, path: str, line=None) -> None:
        super().__init__(message)
        self.path = path
        self.line = line
