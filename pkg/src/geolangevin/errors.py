"""Exception hierarchy shared by all modules."""


class GeoLangevinError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveDefinite(GeoLangevinError):
    pass


class PoleSingularity(GeoLangevinError):
    pass


class AntipodalPoints(GeoLangevinError):
    pass


class ChartExit(GeoLangevinError):
    pass


class DegenerateProjection(GeoLangevinError):
    pass


class EigFailure(GeoLangevinError):
    pass


class GradientMismatch(GeoLangevinError):
    pass


class QuadratureNotConverged(GeoLangevinError):
    pass


class EmptyWindow(GeoLangevinError):
    pass


class PartitionMismatch(GeoLangevinError):
    pass


class SolverInfeasible(GeoLangevinError):
    pass


class FitDegenerate(GeoLangevinError):
    """No decaying segment; ``bias`` still carries the plateau estimate."""

    def __init__(self, message: str, bias: float = float("nan")):
        super().__init__(message)
        self.bias = bias


class CFLViolation(GeoLangevinError):
    pass


class MassLeak(GeoLangevinError):
    pass


class StepError(GeoLangevinError):
    """A sampler step failed; carries the iteration index."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"step {iteration} failed: {cause!r}")
        self.iteration = iteration
        self.cause = cause
