"""Synthetic impeller-like casting images with optional defects.

A part is an anti-aliased annulus (the casting) over a flat background with
a dark central bore. Defective parts carry one to three notches (bites out of
the outer rim) or pinholes (dark pits inside the ring body). All intensities
stay inside ``[0.25, 0.75]`` so additive noise rarely saturates.
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import asdict, dataclass, fields

import numpy as np

from .noisegen import rng_from_seed


class DefectLabel(enum.IntEnum):
    """Class indices; Defected is the positive class."""

    DEFECTED = 0
    OK = 1


@dataclass(frozen=True)
class CastingGeometry:
    """Versioned geometry of the toy corpus (pixel units unless noted)."""

    version: int = 1
    size: int = 64
    outer_radius: float = 22.0
    outer_jitter: float = 2.0
    inner_radius: float = 9.0
    inner_jitter: float = 1.5
    center_jitter: float = 3.0
    background: float = 0.36
    ring: float = 0.62
    bore: float = 0.30
    brightness_jitter: float = 0.04
    shading: float = 0.05
    notch_radius: tuple[float, float] = (2.5, 4.0)
    pinhole_radius: tuple[float, float] = (1.6, 2.6)
    max_defects: int = 3

    def __post_init__(self):
        if self.size < 8:
            raise ValueError("image size must be at least 8")
        if not 0 < self.inner_radius + self.inner_jitter < self.outer_radius - self.outer_jitter:
            raise ValueError("inner radius must stay below the outer radius")
        if self.outer_radius + self.outer_jitter + self.center_jitter + self.notch_radius[1] >= self.size / 2:
            raise ValueError("part does not fit inside the image")
        if self.max_defects < 1:
            raise ValueError("max_defects must be >= 1")

    @classmethod
    def from_ini(cls, text: str) -> "CastingGeometry":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        section = parser["casting"] if parser.has_section("casting") else {}
        values = {}
        for f in fields(cls):
            if f.name not in section:
                continue
            raw = section[f.name]
            if f.name in ("notch_radius", "pinhole_radius"):
                values[f.name] = tuple(float(v) for v in raw.split(","))
            elif f.name in ("version", "size", "max_defects"):
                values[f.name] = int(raw)
            else:
                values[f.name] = float(raw)
        return cls(**values)

    def to_ini(self) -> str:
        lines = ["[casting]"]
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _coverage(dist_inside):
    # signed distance (positive inside) -> 1-pixel anti-aliased coverage
    return np.clip(dist_inside + 0.5, 0.0, 1.0)


def render_part(rng: np.random.Generator, geom: CastingGeometry, defective: bool) -> np.ndarray:
    n = geom.size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    cx = (n - 1) / 2 + rng.uniform(-geom.center_jitter, geom.center_jitter)
    cy = (n - 1) / 2 + rng.uniform(-geom.center_jitter, geom.center_jitter)
    r_out = geom.outer_radius + rng.uniform(-geom.outer_jitter, geom.outer_jitter)
    r_in = geom.inner_radius + rng.uniform(-geom.inner_jitter, geom.inner_jitter)
    jit = geom.brightness_jitter
    bg = geom.background + rng.uniform(-jit, jit)
    ring = geom.ring + rng.uniform(-jit, jit)
    bore = geom.bore + rng.uniform(-jit / 2, jit / 2)
    light = rng.uniform(0, 2 * np.pi)

    dx, dy = xx - cx, yy - cy
    d = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    body = _coverage(r_out - d) * _coverage(d - r_in)
    ring_tone = ring + geom.shading * np.cos(theta - light)
    hole = _coverage(r_in - d)

    if defective:
        count = int(rng.integers(1, geom.max_defects + 1))
        for _ in range(count):
            ang = rng.uniform(0, 2 * np.pi)
            if rng.random() < 0.5:
                rad = rng.uniform(*geom.notch_radius)
                px, py = cx + r_out * np.cos(ang), cy + r_out * np.sin(ang)
                body = body * (1.0 - _coverage(rad - np.hypot(xx - px, yy - py)))
            else:
                rad = rng.uniform(*geom.pinhole_radius)
                dist = rng.uniform(r_in + rad + 1.5, r_out - rad - 1.5)
                px, py = cx + dist * np.cos(ang), cy + dist * np.sin(ang)
                pit = _coverage(rad - np.hypot(xx - px, yy - py))
                ring_tone = ring_tone * (1.0 - pit) + bore * pit

    img = bg * (1.0 - body - hole) + ring_tone * body + bore * hole
    return np.clip(img, 0.0, 1.0)


def defect_count(n: int, defect_rate: float) -> int:
    return int(np.floor(n * defect_rate + 0.5))


def generate_toy_casting(n: int, defect_rate: float, seed: int, geometry: CastingGeometry | None = None):
    """Render ``n`` parts, exactly ``round(n * defect_rate)`` of them defective.

    Returns:
        list of ``(image, DefectLabel)`` in a seeded random order.
    """
    if n < 2:
        raise ValueError("need at least two images")
    if not 0.0 < defect_rate < 1.0:
        raise ValueError("defect_rate must lie strictly between 0 and 1")
    geom = geometry or CastingGeometry()
    rng = rng_from_seed(seed)
    n_def = defect_count(n, defect_rate)
    labels = np.array([DefectLabel.DEFECTED] * n_def + [DefectLabel.OK] * (n - n_def))
    labels = labels[rng.permutation(n)]
    return [(render_part(rng, geom, lab == DefectLabel.DEFECTED), DefectLabel(int(lab))) for lab in labels]
