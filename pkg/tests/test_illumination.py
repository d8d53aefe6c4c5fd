import numpy as np
import pytest

from localenhance.illumination import (
    IlluminationMap,
    denoise,
    initial_illumination,
    lime_preprocess,
    refine_illumination,
)
from localenhance.imaging import Image, ImagingError


def step_image(h=16, w=16):
    data = np.full((h * w, 3), 0.1)
    cols = np.tile(np.arange(w), h)
    data[cols >= w // 2] = 0.9
    return Image(w, h, data)


def test_illumination_map_validation():
    IlluminationMap(2, 2, np.full(4, 0.5))
    with pytest.raises(ImagingError):
        IlluminationMap(2, 2, np.full(3, 0.5))
    with pytest.raises(ImagingError):
        IlluminationMap(2, 2, np.full(4, 1.5))


def test_initial_illumination_gray():
    img = Image(2, 2, np.full((4, 3), 0.5))
    assert np.array_equal(initial_illumination(img).t, np.full(4, 0.5))


def test_initial_illumination_channel_max():
    img = Image(2, 1, np.array([[1.0, 0.0, 0.0], [0.2, 0.5, 0.3]]))
    assert np.array_equal(initial_illumination(img).t, [1.0, 0.5])


def test_initial_illumination_is_pointwise_max():
    rng = np.random.default_rng(0)
    img = Image(5, 4, rng.random((20, 3)))
    t = initial_illumination(img).t
    assert np.array_equal(t, img.data.max(axis=1))


def test_refine_constant_fixed_point():
    img = Image(4, 4, np.full((16, 3), 0.3))
    t0 = initial_illumination(img)
    out = refine_illumination(t0, img, lam=0.15, iters=50)
    assert np.allclose(out.t, 0.3, atol=1e-12)


def test_refine_lambda_zero_identity():
    rng = np.random.default_rng(1)
    img = Image(4, 4, rng.random((16, 3)))
    t0 = initial_illumination(img)
    out = refine_illumination(t0, img, lam=0.0, iters=50)
    assert np.array_equal(out.t, t0.t)


def test_refine_dimension_mismatch():
    img = Image(4, 4, np.full((16, 3), 0.3))
    t0 = IlluminationMap(2, 2, np.full(4, 0.3))
    with pytest.raises(ImagingError):
        refine_illumination(t0, img)


def test_refine_preserves_step_smooths_noise():
    rng = np.random.default_rng(2)
    img = step_image()
    clean = initial_illumination(img).t
    noise = rng.uniform(-0.02, 0.02, clean.size)
    t0 = IlluminationMap(img.width, img.height, np.clip(clean + noise, 0, 1))
    out = refine_illumination(t0, img, lam=0.15, iters=50)
    # the step edge survives
    assert np.abs(out.t - clean).max() < 0.05
    # interior noise variance cut by at least half
    plane_out = out.plane() - clean.reshape(16, 16)
    plane_in = t0.plane() - clean.reshape(16, 16)
    interior = np.s_[2:-2, 2:6]
    assert plane_out[interior].var() <= 0.5 * plane_in[interior].var()


def test_refine_pure_step_nearly_unchanged():
    img = step_image()
    t0 = initial_illumination(img)
    out = refine_illumination(t0, img, lam=0.15, iters=50)
    assert np.abs(out.t - t0.t).max() < 0.05


def test_refine_output_in_range():
    rng = np.random.default_rng(3)
    img = Image(8, 8, rng.random((64, 3)))
    out = refine_illumination(initial_illumination(img), img)
    assert out.t.min() >= 0.0 and out.t.max() <= 1.0


def test_lime_bright_pixel_unchanged():
    img = Image(1, 1, np.array([[1.0, 1.0, 1.0]]))
    out = lime_preprocess(img)
    assert np.allclose(out.data, img.data, atol=1e-12)


def test_lime_white_image_unchanged():
    img = Image(3, 3, np.ones((9, 3)))
    out = lime_preprocess(img)
    assert np.allclose(out.data, 1.0, atol=1e-12)


def test_lime_dark_pixel_value():
    # t=0.1 constant, so refinement leaves it alone; each channel
    # becomes 0.1 / 0.1^0.8 = 0.1^0.2
    img = Image(1, 1, np.array([[0.1, 0.1, 0.1]]))
    out = lime_preprocess(img, gamma=0.8)
    assert np.allclose(out.data, 0.1**0.2, atol=1e-9)


def test_lime_never_darkens():
    rng = np.random.default_rng(4)
    img = Image(6, 6, rng.random((36, 3)))
    out = lime_preprocess(img)
    assert np.all(out.data >= img.data - 1e-12)


def test_lime_gamma_validation():
    img = Image(1, 1, np.array([[0.5, 0.5, 0.5]]))
    with pytest.raises(ValueError):
        lime_preprocess(img, gamma=0.0)
    with pytest.raises(ValueError):
        lime_preprocess(img, gamma=1.5)


def test_denoise_strength_zero_noop():
    rng = np.random.default_rng(5)
    img = Image(4, 4, rng.random((16, 3)))
    assert denoise(img, 0) is img


def test_denoise_constant_fixed_point():
    img = Image(5, 5, np.full((25, 3), 0.4))
    for s in (1, 2, 3):
        out = denoise(img, s)
        assert np.allclose(out.data, 0.4, atol=1e-12)


def test_denoise_reduces_noise_variance():
    rng = np.random.default_rng(6)
    noise = rng.uniform(-0.05, 0.05, (400, 3))
    img = Image(20, 20, np.clip(0.5 + noise, 0, 1))
    out = denoise(img, 2)
    var_in = ((img.data - 0.5) ** 2).mean()
    var_out = ((out.data - 0.5) ** 2).mean()
    assert var_out <= 0.6 * var_in


def test_denoise_invalid_strength():
    img = Image(1, 1, np.array([[0.5, 0.5, 0.5]]))
    with pytest.raises(ValueError):
        denoise(img, 4)
