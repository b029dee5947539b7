"""Zero-shot cross-domain graph anomaly detection with a persistent pattern dictionary."""

from .config import RunConfig, load_config
from .errors import ConsistencyError, FormatError, InvalidArgumentError, NumericalError, OwlEyeError

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "load_config",
    "OwlEyeError", "InvalidArgumentError", "FormatError", "ConsistencyError", "NumericalError",
]
