"""Exception hierarchy shared by every trajclass module."""


class TrajclassError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TrajclassError, ValueError):
    def __init__(self, message, line=None, location=None):
        self.line = line
        self.location = location
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderingError(TrajclassError, ValueError):
    pass


class SizeError(TrajclassError, ValueError):
    pass


class GeometryError(TrajclassError, ValueError):
    pass


class SegmentationError(TrajclassError, ValueError):
    pass


class InsufficientPointsError(TrajclassError, ValueError):
    pass


class FeatureError(TrajclassError, ValueError):
    pass


class ShapeError(TrajclassError, ValueError):
    pass


class FilterError(TrajclassError, ValueError):
    pass


class ParameterError(TrajclassError, ValueError):
    pass


class UsageError(TrajclassError, TypeError):
    pass


class TrainingError(TrajclassError, ValueError):
    pass


class ConvergenceError(TrainingError):
    def __init__(self, message, iterations):
        self.iterations = iterations
        super().__init__(f"{message} (after {iterations} iterations)")


class LabelError(TrajclassError, ValueError):
    pass


class DegenerateSampleError(TrajclassError, ValueError):
    pass


class SampleSizeError(TrajclassError, ValueError):
    pass


class StratificationError(TrajclassError, ValueError):
    pass


class SplitError(TrajclassError, ValueError):
    pass


class ConfigValidationError(TrajclassError, ValueError):
    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class ReportLookupError(TrajclassError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
