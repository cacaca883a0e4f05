"""Exception types shared across the pipeline.

Invalid arguments raise plain ValueError; the classes here cover failures
the CLI maps to distinct exit codes.
"""


class DataError(Exception):
    """Dataset files are missing, malformed, or mutually inconsistent."""


class NumericalError(Exception):
    """A numerical computation produced an unusable result."""


class DivergedError(NumericalError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class UndefinedMetricError(ValueError):
    """A metric has no defined value (e.g. every frame is ignore-labeled)."""


class StageError(Exception):
    """Wraps a pipeline stage failure with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
