"""2D discrete Fourier analysis and periodic-noise spike detection.

Conventions:

* A spectrum is a complex array of shape ``(H, W)``; bin ``(u, v)`` (``u``
  horizontal frequency, ``v`` vertical) lives at ``spec[v, u]``.
* The forward transform is unnormalized,
  ``F(u, v) = sum_{x,y} img(x, y) exp(-2 pi i (u x / W + v y / H))``, and the
  inverse carries the ``1 / (W H)`` factor.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def dft_matrix(n: int) -> np.ndarray:
    """``M[k, x] = exp(-2 pi i k x / n)`` with the exponent reduced mod ``n``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * (np.outer(k, k) % n) / n)


def direct_dft2d(img) -> np.ndarray:
    """Direct evaluation of the defining sum, separated over rows and columns."""
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    return dft_matrix(h) @ arr @ dft_matrix(w).T


def dft2d(img) -> np.ndarray:
    """Forward 2D DFT: FFT for power-of-two sizes, direct summation otherwise."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    h, w = arr.shape
    if _is_pow2(h) and _is_pow2(w):
        return np.fft.fft2(arr)
    return direct_dft2d(arr)


def idft2d(spec, return_residue: bool = False):
    """Inverse 2D DFT, real part only.

    With ``return_residue=True`` also returns the largest absolute imaginary
    component, a diagnostic for spectra that are not conjugate-symmetric.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    h, w = spec.shape
    if _is_pow2(h) and _is_pow2(w):
        out = np.fft.ifft2(spec)
    else:
        out = np.conj(dft_matrix(h)) @ spec @ np.conj(dft_matrix(w)).T / (h * w)
    if return_residue:
        return out.real, float(np.abs(out.imag).max())
    return out.real


def fftshift(spec) -> np.ndarray:
    """Rotate bins by ``(H // 2, W // 2)``; DC lands at ``[H // 2, W // 2]``.

    On odd sizes this is not an involution.
    """
    spec = np.asarray(spec)
    h, w = spec.shape
    return np.roll(spec, (h // 2, w // 2), axis=(0, 1))


def log_magnitude(spec) -> np.ndarray:
    """``log(1 + |F|)`` stretched to ``[0, 1]``; a flat result maps to zeros."""
    m = np.log1p(np.abs(np.asarray(spec)))
    lo, hi = m.min(), m.max()
    if hi - lo <= 0.0:
        return np.zeros(m.shape)
    return (m - lo) / (hi - lo)


class Spike(NamedTuple):
    u: int
    v: int
    strength: float


def detect_spikes(logmag, exclusion_radius: int = 8, threshold_k: float = 6.0) -> list[Spike]:
    """Find isolated peaks in a centered log-magnitude plane.

    A pixel counts as a spike when it lies outside the DC disk (distance from
    ``(W // 2, H // 2)`` at least ``exclusion_radius``), is a local maximum over
    its 8-neighbourhood, and exceeds ``mean + threshold_k * std`` of all
    non-excluded pixels. Coordinates are those of the shifted plane.

    Returns:
        Spikes sorted by descending strength (ties by ``(v, u)``).
    """
    plane = np.asarray(logmag, dtype=np.float64)
    h, w = plane.shape
    if exclusion_radius >= min(w, h) / 2:
        raise ValueError(
            f"exclusion radius {exclusion_radius} must be below min(W, H) / 2 = {min(w, h) / 2}"
        )
    yy, xx = np.mgrid[0:h, 0:w]
    outside = np.hypot(xx - w // 2, yy - h // 2) >= exclusion_radius
    region = plane[outside]
    threshold = region.mean() + threshold_k * region.std()

    padded = np.pad(plane, 1, mode="constant", constant_values=-np.inf)
    is_max = np.ones(plane.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy or dx:
                is_max &= plane >= padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    hits = np.argwhere(outside & is_max & (plane > threshold))
    spikes = [Spike(int(x), int(y), float(plane[y, x])) for y, x in hits]
    spikes.sort(key=lambda s: (-s.strength, s.v, s.u))
    return spikes


def has_symmetric_pair(spikes: list[Spike], width: int, height: int) -> bool:
    """True if some spike's mirror through the DC bin is also a spike."""
    cu, cv = width // 2, height // 2
    found = {(s.u, s.v) for s in spikes}
    return any((2 * cu - s.u, 2 * cv - s.v) in found and (s.u, s.v) != (cu, cv) for s in spikes)
