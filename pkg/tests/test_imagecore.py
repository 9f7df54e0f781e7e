import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from noiseaware import imagecore as ic


def pgm(w, h, payload, maxval=255):
    return f"P5\n{w} {h}\n{maxval}\n".encode() + bytes(payload)


def test_load_scales_bytes():
    img = ic.load_pgm(pgm(2, 2, [0, 255, 128, 64]))
    np.testing.assert_array_equal(img.ravel(), [0.0, 1.0, 128 / 255, 64 / 255])
    assert img.shape == (2, 2)
    assert ic.load_pgm(pgm(1, 1, [255])).ravel().tolist() == [1.0]


def test_load_row_major():
    img = ic.load_pgm(pgm(3, 2, [1, 2, 3, 4, 5, 6]))
    assert img.shape == (2, 3)
    assert img[1, 0] == 4 / 255


@pytest.mark.parametrize(
    "data, err",
    [
        (pgm(3, 2, [0] * 5), ic.PGMPayloadError),
        (pgm(3, 2, [0] * 7), ic.PGMPayloadError),
        (b"P2\n1 1\n255\n\x00", ic.PGMMagicError),
        (pgm(0, 2, []), ic.PGMDimensionError),
        (pgm(1, 1, [0], maxval=65535), ic.PGMMaxvalError),
        (b"P5\n1 x\n255\n\x00", ic.PGMHeaderError),
        (b"P5\n1 1", ic.PGMHeaderError),
    ],
)
def test_parse_errors(data, err):
    with pytest.raises(err):
        ic.load_pgm(data)


def test_save_quantizes_half_up():
    data = ic.save_pgm(np.array([[0.0, 1.0, 0.5]]))
    assert data == b"P5\n3 1\n255\n" + bytes([0, 255, 128])


def test_roundtrip_idempotent():
    img = np.random.default_rng(0).random((7, 9))
    once = ic.save_pgm(img)
    back = ic.load_pgm(once)
    assert ic.save_pgm(back) == once
    np.testing.assert_array_equal(back, ic.quantize(img) / 255.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_byte_payload_roundtrip(raw):
    h, w = raw.shape
    data = pgm(w, h, raw.ravel().tolist())
    assert ic.save_pgm(ic.load_pgm(data)) == data


def test_resize_identity_and_constant():
    img = np.random.default_rng(1).random((5, 6))
    np.testing.assert_array_equal(ic.resize(img, 6, 5), img)
    const = np.full((4, 7), 0.3)
    np.testing.assert_allclose(ic.resize(const, 11, 3), 0.3, atol=1e-15)


def test_resize_hand_example():
    out = ic.resize(np.array([[0.0, 1.0]]), 3, 1)
    np.testing.assert_allclose(out, [[0.0, 0.5, 1.0]])


def test_resize_single_sample_reads_center():
    img = np.array([[0.0, 0.2, 0.4, 0.6]])
    assert ic.resize(img, 1, 1)[0, 0] == pytest.approx(0.3)


def test_resize_rejects_zero():
    with pytest.raises(ValueError):
        ic.resize(np.zeros((2, 2)), 0, 2)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.floats(0, 1)),
       st.integers(1, 20), st.integers(1, 20))
def test_resize_range(img, w, h):
    out = ic.resize(img, w, h)
    assert out.shape == (h, w)
    assert out.min() >= 0.0 and out.max() <= 1.0


@pytest.mark.parametrize("w,h", [(16, 16), (32, 24), (64, 64)])
def test_resize_up_down_smooth(w, h):
    img = ic.radial_gradient(40, 36)
    direct = ic.resize(img, w, h)
    via = ic.resize(ic.resize(img, 2 * w, 2 * h), w, h)
    assert np.max(np.abs(direct - via)) <= 1 / 255


def test_check_image():
    with pytest.raises(ValueError):
        ic.check_image(np.array([[1.5]]))
    with pytest.raises(ValueError):
        ic.check_image(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        ic.check_image(np.zeros(3))
