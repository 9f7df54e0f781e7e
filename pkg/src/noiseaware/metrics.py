"""Full-reference quality metrics (PSNR, SSIM) and per-noise-kind aggregation.

Both metrics assume unit-interval images (peak value 1.0). SSIM uses the
usual constants ``K1 = 0.01``, ``K2 = 0.03`` with an 11x11 Gaussian window
(sigma 1.5) evaluated only where the window fits inside the image.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .noisegen import NoiseKind

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(reference, test) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(reference, test) -> float:
    """Peak signal-to-noise ratio in dB; identical images give ``math.inf``."""
    a, b = _pair(reference, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps; the 2D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = g.size
    rows = sliding_window_view(x, n, axis=1) @ g
    return sliding_window_view(rows, n, axis=0) @ g


def ssim_map(reference, test, data_range: float = 1.0) -> np.ndarray:
    a, b = _pair(reference, test)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs both dimensions >= {SSIM_WINDOW}, got {a.shape}")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    g = gaussian_window()
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(reference, test, data_range: float = 1.0) -> float:
    """Mean structural similarity over all fully-contained windows."""
    return float(np.clip(ssim_map(reference, test, data_range).mean(), -1.0, 1.0))


@dataclass(frozen=True)
class QualityScore:
    psnr_db: float
    ssim: float


def score(reference, test) -> QualityScore:
    return QualityScore(psnr(reference, test), ssim(reference, test))


@dataclass
class KindSummary:
    kind: NoiseKind
    count: int
    ssim_mean: float
    ssim_std: float
    ssim_max: float
    psnr_mean: float
    psnr_std: float
    psnr_max: float
    psnr_infinite: int = 0


@dataclass
class AggregateReport:
    """Per-kind summary. SSIM figures are on a 0-100 scale, PSNR in dB."""

    rows: list[KindSummary] = field(default_factory=list)

    def row(self, kind: NoiseKind) -> KindSummary:
        for r in self.rows:
            if r.kind == kind:
                return r
        raise KeyError(kind)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["kind", "count", "ssim_mean", "ssim_std", "ssim_max",
             "psnr_mean", "psnr_std", "psnr_max", "psnr_infinite", "lpips"]
        )
        for r in self.rows:
            writer.writerow(
                [r.kind.label, r.count, f"{r.ssim_mean:.6f}", f"{r.ssim_std:.6f}",
                 f"{r.ssim_max:.6f}", f"{r.psnr_mean:.6f}", f"{r.psnr_std:.6f}",
                 f"{r.psnr_max:.6f}", r.psnr_infinite, "n/a"]
            )
        return buf.getvalue()

    def to_text(self, titles: dict | None = None) -> str:
        titles = titles or {}
        lines = []
        for r in self.rows:
            name = r.kind.label.replace("_", " ")
            lines.append(f"---> {titles.get(r.kind, name + ' result')} <----")
            lines.append(
                f"-> Avg SSIM for {name} noise : {r.ssim_mean:.3f} ± {r.ssim_std:.3f}"
                f" and MAX is : {r.ssim_max:.3f}"
            )
            lines.append(
                f"-> Avg PSNR for {name} noise : {r.psnr_mean:.3f} ± {r.psnr_std:.3f}"
                f" and MAX is : {r.psnr_max:.3f}"
            )
            lines.append(f"-> Avg LPIPS for {name} noise : n/a")
            if r.psnr_infinite:
                lines.append(f"-> {r.psnr_infinite} identical pairs (infinite PSNR) excluded from PSNR")
            lines.append(f"-> These results are valid for {r.count} instances !")
            lines.append("")
        return "\n".join(lines)


def _stats(values: list[float]) -> tuple[float, float, float]:
    if not values:
        return math.nan, math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std()), float(arr.max())


def aggregate(scores) -> AggregateReport:
    """Summarize ``(NoiseKind, QualityScore)`` pairs per kind.

    Standard deviations are population (``ddof=0``). Infinite PSNR values are
    left out of the PSNR statistics and counted in ``psnr_infinite``.
    """
    scores = list(scores)
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    report = AggregateReport()
    for kind in NoiseKind:
        picked = [s for k, s in scores if NoiseKind(k) == kind]
        if not picked:
            continue
        ssim_vals = [100.0 * s.ssim for s in picked]
        finite = [s.psnr_db for s in picked if math.isfinite(s.psnr_db)]
        sm, ss, sx = _stats(ssim_vals)
        pm, ps, px = _stats(finite)
        report.rows.append(
            KindSummary(kind, len(picked), sm, ss, sx, pm, ps, px, len(picked) - len(finite))
        )
    return report
