"""Grayscale image representation, binary PGM I/O and bilinear resizing.

An image is a 2D ``float64`` array of shape ``(height, width)`` holding
normalized intensities in ``[0, 1]``, stored row-major. Pixel ``(x, y)`` is
``img[y, x]``.
"""

from __future__ import annotations

import os

import numpy as np

PGM_MAXVAL = 255


class PGMError(ValueError):
    """Base class for binary PGM parse failures."""


class PGMMagicError(PGMError):
    pass


class PGMHeaderError(PGMError):
    pass


class PGMDimensionError(PGMError):
    pass


class PGMMaxvalError(PGMError):
    pass


class PGMPayloadError(PGMError):
    pass


def check_image(img, name: str = "image") -> np.ndarray:
    """Validate ``img`` against the image invariants and return it as float64.

    Raises:
        ValueError: if the array is not 2D, is empty, or holds values that are
            non-finite or outside ``[0, 1]``.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D (height, width), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def quantize(img) -> np.ndarray:
    """Map unit-interval intensities to 8-bit codes with round-half-up."""
    q = np.floor(np.asarray(img, dtype=np.float64) * PGM_MAXVAL + 0.5)
    return np.clip(q, 0, PGM_MAXVAL).astype(np.uint8)


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PGMHeaderError("truncated PGM header")
    return data[start:pos], pos


def load_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM with maxval 255 into a unit-interval image."""
    if data[:2] != b"P5":
        raise PGMMagicError(f"expected magic b'P5', got {data[:2]!r}")
    pos = 2
    fields = []
    for label in ("width", "height", "maxval"):
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise PGMHeaderError(f"non-integer {label} field {token!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PGMDimensionError(f"dimensions must be positive, got {width}x{height}")
    if maxval != PGM_MAXVAL:
        raise PGMMaxvalError(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PGMHeaderError("missing whitespace after maxval")
    payload = data[pos + 1 :]
    if len(payload) != width * height:
        raise PGMPayloadError(
            f"payload has {len(payload)} bytes, header declares {width}x{height}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return raw.astype(np.float64) / PGM_MAXVAL


def save_pgm(img) -> bytes:
    """Encode an image as binary PGM (``P5``, maxval 255)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {arr.shape}")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + quantize(arr).tobytes()


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(path: str | os.PathLike, img) -> None:
    with open(path, "wb") as fh:
        fh.write(save_pgm(img))


def _axis_weights(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Corner-aligned sample positions; a single output sample reads the source center.
    if dst == 1:
        pos = np.array([(src - 1) / 2.0])
    else:
        pos = np.arange(dst) * ((src - 1) / (dst - 1))
    lo = np.clip(np.floor(pos).astype(np.int64), 0, src - 1)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    return lo, hi, frac


def resize(img, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling.

    Output pixel ``x`` samples source coordinate ``x * (W - 1) / (new_w - 1)``
    (likewise for rows), so corners map onto corners. A target dimension of 1
    samples the source center.
    """
    if int(new_w) < 1 or int(new_h) < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_w}x{new_h}")
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    if (new_w, new_h) == (w, h):
        return arr.copy()
    x0, x1, fx = _axis_weights(w, int(new_w))
    y0, y1, fy = _axis_weights(h, int(new_h))
    rows = arr[:, x0] * (1.0 - fx) + arr[:, x1] * fx
    out = rows[y0, :] * (1.0 - fy)[:, None] + rows[y1, :] * fy[:, None]
    return np.clip(out, 0.0, 1.0)


def radial_gradient(width: int, height: int, low: float = 0.2, high: float = 0.8) -> np.ndarray:
    """Smooth synthetic test image: intensity falls off linearly from the center."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    r = np.hypot(xx - cx, yy - cy)
    r /= max(r.max(), 1e-12)
    return high - (high - low) * r
