"""Exception types shared across the package."""


class NPInferError(Exception):
    """Base class for package-specific failures."""


class ConfigError(NPInferError):
    """A configuration file or option is malformed or inconsistent."""


class DataError(NPInferError):
    """Input data violates the expected schema or sampling design."""


class CalibrationError(NPInferError):
    """An intercept or offset calibration failed to converge."""


class DegenerateInputError(NPInferError):
    """Inputs carry no usable variation for the requested operation."""


class EstimationError(NPInferError):
    """A model fit or replication step could not be completed."""
