"""Median filtering for impulse (salt-and-pepper) noise."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def median_filter(img, k: int = 3) -> np.ndarray:
    """k x k median with replicate-padded borders.

    The median is the element at index ``(k*k - 1) // 2`` of the sorted
    window, so every output value is one of the input values.
    """
    arr = np.asarray(img, dtype=np.float64)
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {k!r}")
    if k > min(arr.shape):
        raise ValueError(f"kernel size {k} exceeds image dimensions {arr.shape}")
    if k == 1:
        return arr.copy()
    r = k // 2
    padded = np.pad(arr, r, mode="edge")
    windows = sliding_window_view(padded, (k, k)).reshape(arr.shape + (k * k,))
    mid = (k * k - 1) // 2
    return np.partition(windows, mid, axis=-1)[..., mid]


def median_denoise(img, passes: int = 3, k: int = 3) -> np.ndarray:
    """Repeated median filtering; the default is three passes of 3x3."""
    out = np.asarray(img, dtype=np.float64)
    for _ in range(passes):
        out = median_filter(out, k)
    return out
