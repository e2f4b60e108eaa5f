"""Input validation helpers shared by the data model and the estimators."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue


def as_f32(name: str, value, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce to a C-contiguous float32 array, optionally checking the shape."""
    arr = np.ascontiguousarray(value, dtype=np.float32)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


def check_finite(name: str, arr: np.ndarray, where: str = "") -> None:
    """Raise :class:`NonFiniteValue` naming the first NaN/Inf, if any."""
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.ravel())[0])
        raise NonFiniteValue(name, idx, where)


def freeze(arr: np.ndarray) -> np.ndarray:
    """Mark an array read-only so shared fields stay immutable."""
    arr.setflags(write=False)
    return arr


def check_positive_int(name: str, value) -> int:
    iv = int(value)
    if iv != value or iv <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return iv
