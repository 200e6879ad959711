"""Exception hierarchy shared by the solver, simulator and CLI."""


class AlmError(Exception):
    """Base class for all package errors."""


class ScheduleError(AlmError, ValueError):
    """Invalid cash-flow schedule input (overlapping buckets, bad dates)."""


class ModelDomainError(AlmError, ValueError):
    """Index level or time argument outside a model's domain."""


class CalibrationError(AlmError, ValueError):
    """Calibration impossible on the supplied series."""


class EvaluationError(AlmError, ValueError):
    """A strategy cannot be evaluated at the requested state."""


class PartitionError(AlmError, ValueError):
    """Index samples too concentrated to build a quantile mesh."""


class FittingError(AlmError, ValueError):
    """Least-squares policy fit is ill-posed."""


class ConfigurationError(AlmError, ValueError):
    """Inconsistent or incomplete run configuration."""
