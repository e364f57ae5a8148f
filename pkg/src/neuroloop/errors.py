"""Exception types shared across the toolkit."""


class NeuroloopError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NeuroloopError):
    """Invalid configuration or parameters (maps to a usage error at the CLI)."""


class DataError(NeuroloopError):
    """Input data violates a precondition (non-finite samples, bad file, ...)."""


class InsufficientDataError(DataError):
    """Not enough (accepted) data to evaluate the requested quantity."""


class DegenerateDataError(DataError):
    """Zero-variance or otherwise degenerate sample."""


class UndefinedMetricError(DataError):
    """A metric is undefined on this input (e.g. zero band power for MPF)."""


class ProtocolError(NeuroloopError):
    """Controller state machine driven outside its contract."""


class StabilityError(ConfigError):
    """Autoregressive specification or model is not stable."""


class SingularFitError(NeuroloopError):
    """Rank-deficient regression or singular spectral matrix."""


class FormatError(DataError):
    """Unreadable or unsupported file format / version."""


class IntegrityError(DataError):
    """File structure is internally inconsistent (truncated row, length mismatch)."""


class RegistryError(ConfigError):
    """Metric name not present in the result-table registry."""
