"""Noise-aware image restoration: detect the noise family, route to a matched
denoiser, score the result, and measure the effect on defect classification."""

from .imagecore import load_pgm, read_pgm, resize, save_pgm, write_pgm
from .noisegen import (
    GaussianParams,
    NoiseKind,
    PeriodicParams,
    SaltPepperParams,
    add_gaussian,
    add_noise,
    add_periodic,
    add_salt_pepper,
)
from .spectral import dft2d, detect_spikes, fftshift, idft2d, log_magnitude
from .filters import median_denoise, median_filter
from .metrics import aggregate, psnr, ssim

__version__ = "0.1.0"
