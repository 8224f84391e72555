"""Exception hierarchy shared by every ipcrlb module."""

from typing import Optional

import numpy as np


class IpcrlbError(Exception):
    """Base class for all errors raised by ipcrlb."""


class CollocatedError(IpcrlbError):
    """Target position coincides with the transmitter or the receiver."""


class DomainError(IpcrlbError, ValueError):
    """Argument outside the domain where a model is defined."""


class SingularityError(IpcrlbError, np.linalg.LinAlgError):
    """Information or covariance matrix is not invertible."""


class EmptyLibraryError(IpcrlbError):
    """Maneuver constraints leave no admissible receiver command."""


class LengthMismatchError(IpcrlbError, ValueError):
    """Estimate and truth sequences differ in length or shape."""


class ConfigError(IpcrlbError):
    """Invalid scenario configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class OutputError(IpcrlbError, OSError):
    """A result table could not be written."""
