"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_rgb_image(img) -> np.ndarray:
    """Validate an 8-bit RGB image array of shape (H, W, 3)."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255:
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"RGB image must be uint8 in [0, 255], got dtype {arr.dtype}")
    return arr


def check_lab_image(img) -> np.ndarray:
    """Validate a float Lab image array of shape (H, W, 3); returns float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) Lab array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if not np.isfinite(arr).all():
        raise ValueError("Lab image contains non-finite values")
    return arr


def check_odd_window(k, name: str = "k") -> int:
    """Validate an odd window size >= 3."""
    k = int(k)
    if k < 3:
        raise ValueError(f"{name} must be >= 3, got {k}")
    if k % 2 == 0:
        raise ValueError(f"{name} must be odd, got {k}")
    return k


def check_mask(mask, height: int, width: int) -> np.ndarray:
    """Validate a boolean mask against target dimensions."""
    arr = np.asarray(mask)
    if arr.shape != (height, width):
        raise ValueError(f"mask shape {arr.shape} does not match maps ({height}, {width})")
    return arr.astype(bool)


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
