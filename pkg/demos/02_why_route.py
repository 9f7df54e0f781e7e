"""Why route at all: one denoiser does not fit every noise.

A 3x3 median filter applied three times removes impulse noise almost
perfectly, because it selects a real neighbouring value instead of
averaging. On Gaussian noise it only smooths a little, and on a periodic
tone it barely helps. Those two kinds go to trained autoencoders instead.

Run: python demos/02_why_route.py
"""

import numpy as np

from noiseaware import metrics
from noiseaware.casting import generate_toy_casting
from noiseaware.filters import median_denoise
from noiseaware.noisegen import GaussianParams, NoiseKind, PeriodicParams, SaltPepperParams, add_noise

parts = [img for img, _ in generate_toy_casting(12, 0.5, seed=8)]
cases = {
    NoiseKind.SALT_PEPPER: SaltPepperParams(0.1),
    NoiseKind.GAUSSIAN: GaussianParams(0.1),
    NoiseKind.PERIODIC: PeriodicParams(0.2, 9, 9),
}

print(f"{'noise':12} {'SSIM noisy':>11} {'SSIM median':>12} {'dPSNR':>8}")
for kind, params in cases.items():
    before, after, gain = [], [], []
    for i, clean in enumerate(parts):
        noisy = add_noise(clean, kind, params, seed=i)
        out = median_denoise(noisy)
        before.append(metrics.ssim(clean, noisy))
        after.append(metrics.ssim(clean, out))
        gain.append(metrics.psnr(clean, out) - metrics.psnr(clean, noisy))
    print(f"{kind.label:12} {np.mean(before):11.3f} {np.mean(after):12.3f} {np.mean(gain):+7.2f}dB")
