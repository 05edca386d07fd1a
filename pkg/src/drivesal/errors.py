"""Exception types shared across the workbench."""


class DriveSalError(Exception):
    """Base class for workbench errors."""


class ShapeError(DriveSalError, ValueError):
    """Operand shapes are incompatible; message names both shapes."""


class CheckpointError(DriveSalError):
    """Checkpoint file is missing, corrupt, or from an unknown format version."""


class ConfigError(DriveSalError, ValueError):
    """A run configuration value or key is invalid."""


class SessionFormatError(DriveSalError):
    """A session directory violates the on-disk session-log contract."""


class FrameDropped(DriveSalError):
    """No gaze sample exists at or before the frame timestamp."""


class TrainingDiverged(DriveSalError):
    """Training hit a non-finite loss; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
