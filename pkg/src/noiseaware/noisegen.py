"""Seeded synthesis of Gaussian, salt-and-pepper and periodic noise.

Random streams come from ``numpy.random.Generator(PCG64(seed))``, created
fresh on every call. Each stochastic operation draws exactly one variate per
pixel in row-major order: a standard normal for Gaussian noise, a uniform
``[0, 1)`` for salt-and-pepper. Outputs are clipped to ``[0, 1]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .imagecore import check_image


class NoiseKind(enum.IntEnum):
    """The three noise families; the integer value is the class index."""

    GAUSSIAN = 0
    SALT_PEPPER = 1
    PERIODIC = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "NoiseKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {"saltpepper": "salt_pepper", "sp": "salt_pepper", "salt": "salt_pepper"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.label == key:
                return kind
        raise ValueError(f"unknown noise kind {text!r}")


@dataclass(frozen=True)
class GaussianParams:
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SaltPepperParams:
    density: float
    salt_ratio: float = 0.5

    def __post_init__(self):
        for name in ("density", "salt_ratio"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class PeriodicParams:
    amplitude: float
    freq_u: int
    freq_v: int = 0
    phase: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.amplitude) or self.amplitude < 0:
            raise ValueError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if (self.freq_u, self.freq_v) == (0, 0):
            raise ValueError("periodic noise needs a nonzero frequency")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_check_seed(seed)))


def add_gaussian(img, params: GaussianParams, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise with std ``params.sigma``."""
    img = check_image(img)
    rng = rng_from_seed(seed)
    noise = rng.standard_normal(img.shape)
    return np.clip(img + params.sigma * noise, 0.0, 1.0)


def add_salt_pepper(img, params: SaltPepperParams, seed: int) -> np.ndarray:
    """Impulse noise: with probability ``density`` a pixel is forced to 1 or 0.

    One uniform draw ``u`` per pixel decides both events: ``u < density *
    salt_ratio`` gives salt (1.0), otherwise ``u < density`` gives pepper.
    """
    img = check_image(img)
    u = rng_from_seed(seed).random(img.shape)
    out = img.copy()
    salt_cut = params.density * params.salt_ratio
    out[u < params.density] = 0.0
    out[u < salt_cut] = 1.0
    return out


def periodic_pattern(width: int, height: int, params: PeriodicParams) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    arg = 2.0 * np.pi * (params.freq_u * xx / width + params.freq_v * yy / height)
    return params.amplitude * np.sin(arg + params.phase)


def add_periodic(img, params: PeriodicParams, seed: int = 0) -> np.ndarray:
    """Add a single 2D sinusoid. ``seed`` is accepted for a uniform signature."""
    img = check_image(img)
    _check_seed(seed)
    h, w = img.shape
    return np.clip(img + periodic_pattern(w, h, params), 0.0, 1.0)


def add_noise(img, kind: NoiseKind, params, seed: int) -> np.ndarray:
    """Dispatch to the generator for ``kind``."""
    kind = NoiseKind(kind)
    expected = {
        NoiseKind.GAUSSIAN: (GaussianParams, add_gaussian),
        NoiseKind.SALT_PEPPER: (SaltPepperParams, add_salt_pepper),
        NoiseKind.PERIODIC: (PeriodicParams, add_periodic),
    }
    cls, fn = expected[kind]
    if not isinstance(params, cls):
        raise TypeError(f"{kind.label} noise needs {cls.__name__}, got {type(params).__name__}")
    return fn(img, params, seed)


def params_to_dict(params) -> dict:
    return {k: getattr(params, k) for k in params.__dataclass_fields__}


def params_from_dict(kind: NoiseKind, values: dict):
    cls = {
        NoiseKind.GAUSSIAN: GaussianParams,
        NoiseKind.SALT_PEPPER: SaltPepperParams,
        NoiseKind.PERIODIC: PeriodicParams,
    }[NoiseKind(kind)]
    return cls(**values)


@dataclass(frozen=True)
class NoiseGrid:
    """Parameter grids the synthetic corpus samples from (uniformly)."""

    gaussian_sigma: tuple[float, ...] = (0.05, 0.075, 0.1)
    sp_density: tuple[float, ...] = (0.1, 0.15, 0.2)
    sp_salt_ratio: float = 0.5
    periodic_amplitude: tuple[float, ...] = (0.1, 0.2)
    periodic_freq_min: int = 4
    periodic_freq_max: int = 16

    def sample(self, kind: NoiseKind, rng: np.random.Generator, min_radius: float = 0.0):
        """Draw a parameter set for ``kind``.

        Periodic frequencies are drawn per axis from ``{0, freq_min..freq_max}``
        and redrawn until the radial frequency is at least ``min_radius`` (and
        nonzero), so the spike sits outside a DC exclusion disk of that radius.
        """
        kind = NoiseKind(kind)
        if kind is NoiseKind.GAUSSIAN:
            return GaussianParams(float(rng.choice(self.gaussian_sigma)))
        if kind is NoiseKind.SALT_PEPPER:
            return SaltPepperParams(float(rng.choice(self.sp_density)), self.sp_salt_ratio)
        choices = np.concatenate([[0], np.arange(self.periodic_freq_min, self.periodic_freq_max + 1)])
        while True:
            fu, fv = (int(v) for v in rng.choice(choices, size=2))
            if (fu, fv) != (0, 0) and math.hypot(fu, fv) >= max(min_radius, 1e-9):
                break
        amp = float(rng.choice(self.periodic_amplitude))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        return PeriodicParams(amp, fu, fv, phase)
