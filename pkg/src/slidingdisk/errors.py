"""Exception hierarchy shared by all modules."""


class SlidingDiskError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SlidingDiskError, ValueError):
    """Invalid input detected before any numerics ran."""


class NumericalFailure(SlidingDiskError, RuntimeError):
    """A numerical procedure did not reach its contract."""


class DegenerateGaussPart(ValidationError):
    pass


class NegativeRate(ValidationError):
    pass


class EmptyGrid(ValidationError):
    pass


class NonpositiveSigma(ValidationError):
    pass


class ZeroAlpha(ValidationError):
    pass


class SchemeNoiseMismatch(ValidationError):
    pass


class KnotMisalignment(ValidationError):
    pass


class DegenerateWindow(ValidationError):
    pass


class SparseBins(ValidationError):
    pass


class QuadratureFailure(NumericalFailure):
    pass


class NonfiniteEntries(NumericalFailure):
    pass


class NonfiniteState(NumericalFailure):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class SynthesisFailure(NumericalFailure):
    """Control synthesis could not reach the target ball.

    ``best_distance`` is the smallest terminal mismatch seen over all
    starts; ``diagnostics`` holds per-start summaries.
    """

    def __init__(self, message, best_distance, diagnostics=None):
        super().__init__(f"{message} (best distance {best_distance:.3e})")
        self.best_distance = best_distance
        self.diagnostics = diagnostics or {}


class ConfigError(ValidationError):
    """Bad configuration; ``key`` is the offending ``section.key`` when known."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
