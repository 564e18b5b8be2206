"""Python bindings for the smg ultrasound gesture toolkit."""

from ._smg import (
    Error,
    Extractor,
    FormatError,
    IoError,
    Model,
    Phantom,
    ValidationError,
    default_config,
    force_cap,
    gabor_bank,
    gesture_names,
    read_filterbank,
    write_filterbank,
)

__all__ = [
    "Error",
    "Extractor",
    "FormatError",
    "IoError",
    "Model",
    "Phantom",
    "ValidationError",
    "default_config",
    "force_cap",
    "gabor_bank",
    "gesture_names",
    "read_filterbank",
    "write_filterbank",
]
