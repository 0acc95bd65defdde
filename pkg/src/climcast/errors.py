"""Exception hierarchy shared by every climcast module."""


class ClimcastError(ValueError):
    pass


class SchemaError(ClimcastError):
    pass


class DuplicateRecordError(ClimcastError):
    pass


class RangeError(ClimcastError):
    pass


class EmptyDataError(ClimcastError):
    pass


class InsufficientDataError(ClimcastError):
    pass


class ZeroVarianceError(ClimcastError):
    pass


class DegenerateInputError(ClimcastError):
    pass


class ShapeError(ClimcastError):
    pass


class ConfigurationError(ClimcastError):
    pass


class DivergenceError(ClimcastError, ArithmeticError):
    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")


class ArtifactIOError(OSError):
    """Reading or writing a run artifact failed; ``path`` names the file."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
