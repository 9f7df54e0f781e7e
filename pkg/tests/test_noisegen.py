import numpy as np
import pytest

from noiseaware import noisegen as ng
from noiseaware.imagecore import radial_gradient
from noiseaware.noisegen import GaussianParams, NoiseKind, PeriodicParams, SaltPepperParams


def test_kind_order():
    assert [k.value for k in NoiseKind] == [0, 1, 2]
    assert NoiseKind.parse("salt-pepper") is NoiseKind.SALT_PEPPER


def test_gaussian_zero_sigma_identity():
    img = radial_gradient(16, 16)
    np.testing.assert_array_equal(ng.add_gaussian(img, GaussianParams(0.0), 1), img)


def test_gaussian_statistics():
    img = np.full((256, 256), 0.5)
    diff = ng.add_gaussian(img, GaussianParams(0.1), 1234) - img
    assert -0.005 < diff.mean() < 0.005
    assert 0.095 < diff.std() < 0.105


def test_gaussian_deterministic():
    img = radial_gradient(32, 32)
    a = ng.add_gaussian(img, GaussianParams(0.1), 7)
    b = ng.add_gaussian(img, GaussianParams(0.1), 7)
    c = ng.add_gaussian(img, GaussianParams(0.1), 8)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_gaussian_stream_is_one_normal_per_pixel():
    img = np.full((4, 5), 0.5)
    expected = np.clip(0.5 + 0.01 * np.random.Generator(np.random.PCG64(3)).standard_normal((4, 5)), 0, 1)
    np.testing.assert_array_equal(ng.add_gaussian(img, GaussianParams(0.01), 3), expected)


@pytest.mark.parametrize("bad", [-0.1, float("nan"), float("inf")])
def test_gaussian_bad_sigma(bad):
    with pytest.raises(ValueError):
        GaussianParams(bad)


def test_salt_pepper_extremes():
    img = radial_gradient(20, 20)
    np.testing.assert_array_equal(ng.add_salt_pepper(img, SaltPepperParams(0.0), 1), img)
    full = ng.add_salt_pepper(img, SaltPepperParams(1.0), 1)
    assert set(np.unique(full)) <= {0.0, 1.0}


def test_salt_pepper_count_binomial_window():
    img = np.full((128, 128), 0.5)
    out = ng.add_salt_pepper(img, SaltPepperParams(0.05), 99)
    corrupted = int(np.count_nonzero(out != img))
    assert 708 <= corrupted <= 930


def test_salt_ratio_split():
    img = np.full((128, 128), 0.5)
    out = ng.add_salt_pepper(img, SaltPepperParams(0.5, 0.25), 5)
    salt = np.count_nonzero(out == 1.0)
    pepper = np.count_nonzero(out == 0.0)
    assert salt / (salt + pepper) == pytest.approx(0.25, abs=0.02)


@pytest.mark.parametrize("density, ratio", [(-0.1, 0.5), (1.1, 0.5), (0.1, 1.5)])
def test_salt_pepper_bad_params(density, ratio):
    with pytest.raises(ValueError):
        SaltPepperParams(density, ratio)


def test_periodic_zero_amplitude_identity():
    img = radial_gradient(16, 16)
    np.testing.assert_array_equal(ng.add_periodic(img, PeriodicParams(0.0, 3), 0), img)


def test_periodic_spectrum_two_bins():
    img = np.full((64, 64), 0.5)
    out = ng.add_periodic(img, PeriodicParams(0.2, 8, 0, 0.0), 0)
    mag = np.abs(np.fft.fft2(out - img))
    # spectrum index is [v, u]
    assert mag[0, 8] == pytest.approx(409.6, rel=1e-9)
    assert mag[0, 56] == pytest.approx(409.6, rel=1e-9)
    mag[0, 8] = mag[0, 56] = 0
    assert mag.max() < 1e-9


@pytest.mark.parametrize("fu, fv", [(3, 0), (5, 7), (0, 2)])
def test_periodic_pattern_zero_mean(fu, fv):
    pattern = ng.periodic_pattern(32, 24, PeriodicParams(0.3, fu, fv, 0.7))
    assert abs(pattern.mean()) < 1e-9


def test_periodic_energy_concentrated():
    img = np.full((32, 32), 0.5)
    diff = ng.add_periodic(img, PeriodicParams(0.2, 5, 3, 1.1), 0) - img
    power = np.abs(np.fft.fft2(diff)) ** 2
    mask = np.zeros_like(power, dtype=bool)
    for u, v in [(5, 3), (-5, -3)]:
        mask[v % 32, u % 32] = True
    mask[0, 0] = True
    assert power[~mask].sum() < 0.01 * power.sum()


def test_periodic_invalid():
    with pytest.raises(ValueError):
        PeriodicParams(0.1, 0, 0)
    with pytest.raises(ValueError):
        PeriodicParams(-0.1, 1, 0)


def test_range_preserved():
    img = radial_gradient(32, 32, 0.0, 1.0)
    for out in (
        ng.add_gaussian(img, GaussianParams(0.5), 1),
        ng.add_salt_pepper(img, SaltPepperParams(0.3), 1),
        ng.add_periodic(img, PeriodicParams(0.8, 4, 4), 1),
    ):
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_add_noise_dispatch():
    img = radial_gradient(16, 16)
    a = ng.add_noise(img, NoiseKind.GAUSSIAN, GaussianParams(0.1), 2)
    assert a.tobytes() == ng.add_gaussian(img, GaussianParams(0.1), 2).tobytes()
    with pytest.raises(TypeError):
        ng.add_noise(img, NoiseKind.PERIODIC, GaussianParams(0.1), 2)


def test_bad_seed():
    with pytest.raises(ValueError):
        ng.add_gaussian(np.zeros((2, 2)), GaussianParams(0.1), -1)


def test_grid_sampling_respects_radius():
    grid = ng.NoiseGrid()
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = grid.sample(NoiseKind.PERIODIC, rng, min_radius=8)
        assert np.hypot(p.freq_u, p.freq_v) >= 8
        assert p.amplitude in grid.periodic_amplitude
