"""Exception and warning types raised across the package."""


class SpdError(ValueError):
    """Base class for invalid inputs to SPD routines."""


class NotSymmetricWithinTolerance(SpdError):
    pass


class NotPositiveDefinite(SpdError):
    def __init__(self, eigenvalue, floor):
        self.eigenvalue = float(eigenvalue)
        self.floor = float(floor)
        super().__init__(
            f"matrix is not positive definite: smallest eigenvalue "
            f"{self.eigenvalue:.6g} <= floor {self.floor:.3g}"
        )


class DimensionMismatch(SpdError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class SingularAction(SpdError):
    pass


class UnsupportedDimension(SpdError):
    pass


class BadConditionLength(SpdError):
    pass


class InconsistentPredictorLength(SpdError):
    pass


class ConvergenceFailure(RuntimeError):
    """The symmetric eigensolver did not converge."""


class ChainFailure(RuntimeError):
    """A reverse diffusion chain left the SPD cone."""


class NonConvergence(RuntimeWarning):
    """Iterative estimator stopped at ``max_iters`` before reaching ``tol``."""


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class InconsistentDimensions(DatasetError):
    pass


class NoPredictors(DatasetError):
    pass


class EmptySampleSet(ValueError):
    pass


class ConfigError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
