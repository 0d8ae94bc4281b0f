"""Input validation helpers shared across the toolkit."""

from __future__ import annotations

import math

import numpy as np


class AnalysisError(RuntimeError):
    """An analysis step failed on structurally valid input (e.g. nothing to fit)."""


def check_positive(name: str, value) -> float:
    v = float(value)
    if not math.isfinite(v) or v <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return v


def check_non_negative(name: str, value) -> float:
    v = float(value)
    if not math.isfinite(v) or v < 0.0:
        raise ValueError(f"{name} must be a non-negative finite number, got {value!r}")
    return v


def check_fraction(name: str, value, *, open_low: bool = False, open_high: bool = False) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    low_ok = v > 0.0 if open_low else v >= 0.0
    high_ok = v < 1.0 if open_high else v <= 1.0
    if not (low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value!r}")
    return v


def as_gray_image(image) -> np.ndarray:
    """Coerce to a 2-D uint8 grayscale array, validating shape and range."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image is empty")
    if arr.dtype == np.uint8:
        return arr
    if arr.dtype == bool:
        raise ValueError("boolean arrays are masks, not grayscale images")
    if np.any(~np.isfinite(arr)) or arr.min() < 0 or arr.max() > 255:
        raise ValueError("image intensities must lie in [0, 255]")
    return arr.astype(np.uint8)


def as_region_mask(mask, shape: tuple[int, int]) -> np.ndarray:
    """Coerce to a boolean mask congruent with an image of the given shape."""
    if mask is None:
        return np.ones(shape, dtype=bool)
    arr = np.asarray(mask)
    if arr.shape != tuple(shape):
        raise ValueError(f"mask shape {arr.shape} does not match image shape {tuple(shape)}")
    return arr.astype(bool)
