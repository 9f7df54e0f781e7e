import numpy as np
import pytest

from noiseaware import spectral as sp
from noiseaware.imagecore import radial_gradient
from noiseaware.noisegen import GaussianParams, PeriodicParams, add_gaussian, add_periodic


def brute_dft(img):
    """Quadruple-loop evaluation of the defining sum."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=complex)
    for v in range(h):
        for u in range(w):
            acc = 0j
            for y in range(h):
                for x in range(w):
                    acc += img[y, x] * np.exp(-2j * np.pi * (u * x / w + v * y / h))
            out[v, u] = acc
    return out


@pytest.mark.parametrize("shape", [(4, 4), (3, 5), (6, 4)])
def test_matches_brute_force(shape):
    img = np.random.default_rng(0).random(shape)
    np.testing.assert_allclose(sp.dft2d(img), brute_dft(img), atol=1e-10)


def test_fft_equals_direct_64():
    img = np.random.default_rng(1).random((64, 64))
    assert np.max(np.abs(sp.dft2d(img) - sp.direct_dft2d(img))) <= 1e-6


def test_constant_and_impulse():
    c = 0.37
    spec = sp.dft2d(np.full((8, 16), c))
    assert spec[0, 0] == pytest.approx(c * 128)
    rest = np.abs(spec).ravel()[1:]
    assert rest.max() < 1e-9 * c * 128
    imp = np.zeros((5, 6))
    imp[0, 0] = 1
    np.testing.assert_allclose(sp.dft2d(imp), np.ones((5, 6)), atol=1e-12)


def test_cosine_bins():
    x = np.arange(16)
    img = np.tile(np.cos(2 * np.pi * 3 * x / 16), (16, 1))
    spec = sp.dft2d(img)
    assert spec[0, 3] == pytest.approx(128 + 0j, abs=1e-9)
    assert spec[0, 13] == pytest.approx(128 + 0j, abs=1e-9)
    spec[0, 3] = spec[0, 13] = 0
    assert np.abs(spec).max() < 1e-9


@pytest.mark.parametrize("shape", [(64, 64), (12, 10)])
def test_roundtrip(shape):
    img = np.random.default_rng(2).random(shape)
    back, residue = sp.idft2d(sp.dft2d(img), return_residue=True)
    assert np.max(np.abs(back - img)) < 1e-5
    assert residue < 1e-6


def test_inverse_simple_spectra():
    assert not sp.idft2d(np.zeros((4, 4), complex)).any()
    spec = np.zeros((4, 8), complex)
    spec[0, 0] = 32 * 0.25
    np.testing.assert_allclose(sp.idft2d(spec), 0.25)


def test_linearity_parseval_symmetry():
    rng = np.random.default_rng(3)
    a, b = rng.random((32, 32)), rng.random((32, 32))
    np.testing.assert_allclose(sp.dft2d(2.0 * a - 0.5 * b), 2.0 * sp.dft2d(a) - 0.5 * sp.dft2d(b), atol=1e-6)
    spec = sp.dft2d(a)
    assert np.sum(a**2) == pytest.approx(np.sum(np.abs(spec) ** 2) / a.size, rel=1e-5)
    h, w = a.shape
    mirrored = np.conj(spec[(-np.arange(h)) % h][:, (-np.arange(w)) % w])
    np.testing.assert_allclose(spec, mirrored, rtol=1e-6, atol=1e-9)


def test_fftshift_even_and_odd():
    rng = np.random.default_rng(4)
    s = rng.random((8, 6)) + 1j * rng.random((8, 6))
    np.testing.assert_array_equal(sp.fftshift(sp.fftshift(s)), s)
    dc = np.zeros((8, 8), complex)
    dc[0, 0] = 1
    assert list(zip(*np.nonzero(sp.fftshift(dc)))) == [(4, 4)]
    odd = np.zeros((5, 5))
    odd[0, 0] = 1
    assert list(zip(*np.nonzero(sp.fftshift(odd)))) == [(2, 2)]
    assert list(zip(*np.nonzero(sp.fftshift(sp.fftshift(odd))))) == [(4, 4)]


def test_log_magnitude():
    assert not sp.log_magnitude(np.zeros((4, 4))).any()
    dc = np.zeros((4, 4), complex)
    dc[0, 0] = 10
    lm = sp.log_magnitude(dc)
    assert lm[0, 0] == 1.0 and lm.sum() == 1.0
    x = np.arange(16)
    img = np.tile(np.sin(2 * np.pi * 3 * x / 16), (16, 1))
    lm = sp.log_magnitude(sp.fftshift(sp.dft2d(img)))
    peaks = np.argwhere(lm == 1.0)
    assert len(peaks) == 2
    (v1, u1), (v2, u2) = peaks
    assert (u1 + u2, v1 + v2) == (16, 16)


def _plane(img):
    return sp.log_magnitude(sp.fftshift(sp.dft2d(img)))


def test_spikes_periodic():
    img = add_periodic(radial_gradient(64, 64), PeriodicParams(0.2, 8, 0), 0)
    spikes = sp.detect_spikes(_plane(img), 8, 6)
    assert len(spikes) == 2
    assert {(s.u, s.v) for s in spikes} == {(40, 32), (24, 32)}
    assert sp.has_symmetric_pair(spikes, 64, 64)


def test_spikes_none_for_gaussian_and_clean():
    smooth = radial_gradient(64, 64)
    assert sp.detect_spikes(_plane(smooth), 8, 6) == []
    for seed in range(5):
        noisy = add_gaussian(smooth, GaussianParams(0.1), seed)
        assert sp.detect_spikes(_plane(noisy), 8, 6) == []


def test_spike_radius_validation():
    with pytest.raises(ValueError):
        sp.detect_spikes(np.zeros((16, 16)), 8, 6)
