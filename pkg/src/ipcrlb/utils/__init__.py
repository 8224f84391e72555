from .logger import get_logger
from .helpers import ensure_dir, load_json, wrap_to_2pi, wrap_to_pi, symmetrize, spd_inverse
from .errors import (
    IpcrlbError,
    CollocatedError,
    DomainError,
    SingularityError,
    EmptyLibraryError,
    LengthMismatchError,
    ConfigError,
    OutputError,
)
