"""Exception types raised across the library.

Every error that a caller may reasonably want to catch has its own class;
all inherit from :class:`BootslError` so blanket handling stays possible.
"""


class BootslError(Exception):
    """Base class for all bootsl errors."""


class EmptyInput(BootslError):
    """An operation received an empty collection where at least one item is required."""


class InsufficientSamples(BootslError):
    """Too few data points or simulations for the requested statistic."""


class InsufficientResamples(BootslError):
    """A resampling plan was requested with fewer than two resamples."""


class NonInvertibleCovariance(BootslError):
    """Estimated covariance is singular or too ill-conditioned to invert."""


class DegenerateSeries(BootslError):
    """A zero-variance series for which autocorrelations are undefined."""


class InvalidScaling(BootslError):
    """A statistic-scaling vector contains a zero entry."""


class InvalidSpin(BootslError):
    """A spin grid contains entries outside {-1, +1}."""


class UnsupportedCombination(BootslError):
    """Unknown block-statistic combination rule."""


class InvalidBlockLength(BootslError):
    """Block length does not divide the series length."""


class InvalidTile(BootslError):
    """Tile side incompatible with the grid it is meant to tile."""


class CorruptPlan(BootslError):
    """A resampling plan contains indices outside the data range."""


class UnsupportedStatistic(BootslError):
    """weighted_statistic was asked for a statistic it cannot compute from counts."""


class InvalidPrecision(BootslError):
    """A Gaussian precision parameter must be strictly positive."""


class InsufficientHistory(BootslError):
    """A nearest-neighbour query asked for more points than the store holds."""


class DegenerateWeights(BootslError):
    """All particle weights vanished at some SMC target."""

    def __init__(self, target_index: int):
        super().__init__(f"all particle weights are zero at target {target_index}")
        self.target_index = target_index


class NormalizationError(BootslError):
    """A weight vector that should sum to one does not."""


class DegenerateBandwidth(BootslError):
    """Kernel density bandwidth collapsed to zero."""


class ConfigError(BootslError):
    """An experiment configuration failed validation.

    ``problems`` lists one ``(path, reason)`` pair per violation.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{path}: {reason}" for path, reason in self.problems)
        super().__init__(f"invalid configuration: {lines}")
