import numpy as np
import pytest

from localenhance.gpr import (
    KernelConfig,
    PixelFeatures,
    SingularGramError,
    assemble_param_map,
    gram_matrix,
    kernel,
    kernel_matrix,
    pixel_features,
    predict_param,
    save_weight_maps_csv,
    weight_map_images,
    weight_maps,
    weight_rows,
)
from localenhance.illumination import IlluminationMap, initial_illumination
from localenhance.imaging import Image


def random_instance(rng, w=8, h=8, scales=(1.0, 1.0, 1.0)):
    img = Image(w, h, rng.random((w * h, 3)))
    t = initial_illumination(img)
    return pixel_features(img, t, scales)


def brute_force_weights(features, keys, cfg):
    # per-pixel evaluation: row n = k_n^T K^{-1} via explicit kernel calls
    pts = features.scaled()
    kpts = pts[list(keys)]
    ell = len(keys)
    gram = np.empty((ell, ell))
    for i in range(ell):
        for j in range(ell):
            gram[i, j] = kernel(kpts[i], kpts[j], cfg) + (cfg.r if i == j else 0.0)
    rows = np.empty((features.n_pixels, ell))
    for n in range(features.n_pixels):
        k_n = np.array([kernel(pts[n], kpts[j], cfg) for j in range(ell)])
        rows[n] = np.linalg.solve(gram, k_n)
    return rows


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(length_scale=0.0)
    with pytest.raises(ValueError):
        KernelConfig(r=-0.1)


def test_pixel_features_corners():
    rng = np.random.default_rng(0)
    img = Image(3, 3, rng.random((9, 3)))
    t = initial_illumination(img)
    feats = pixel_features(img, t)
    assert np.array_equal(feats.raw[0], [0.0, 0.0, t.t[0]])
    assert np.array_equal(feats.raw[8], [1.0, 1.0, t.t[8]])
    assert np.array_equal(feats.raw[4], [0.5, 0.5, t.t[4]])


def test_pixel_features_degenerate_edge():
    img = Image(1, 2, np.full((2, 3), 0.5))
    feats = pixel_features(img, initial_illumination(img))
    assert np.array_equal(feats.raw[:, 0], [0.0, 0.0])
    assert np.array_equal(feats.raw[:, 1], [0.0, 1.0])


def test_pixel_features_scales_applied():
    img = Image(2, 1, np.full((2, 3), 0.5))
    feats = pixel_features(img, initial_illumination(img), scales=(2.0, 1.0, 3.0))
    assert np.array_equal(feats.scaled()[1], [2.0, 0.0, 1.5])


def test_kernel_zero_distance():
    cfg = KernelConfig()
    a = np.array([0.3, 0.4, 0.5])
    assert kernel(a, a, cfg) == 1.0


def test_kernel_unit_distance():
    cfg = KernelConfig(length_scale=1.0)
    a = np.array([1.0, 0.0, 0.0])
    b = np.zeros(3)
    assert np.isclose(kernel(a, b, cfg), np.exp(-1.0), atol=1e-12)


def test_kernel_symmetry_and_range():
    rng = np.random.default_rng(1)
    cfg = KernelConfig(length_scale=0.5)
    for _ in range(20):
        a, b = rng.random(3), rng.random(3)
        kab = kernel(a, b, cfg)
        assert kab == kernel(b, a, cfg)
        assert 0.0 < kab <= 1.0


def test_kernel_matrix_matches_scalar():
    rng = np.random.default_rng(2)
    cfg = KernelConfig(length_scale=0.7)
    a = rng.random((5, 3))
    b = rng.random((4, 3))
    mat = kernel_matrix(a, b, cfg)
    for i in range(5):
        for j in range(4):
            assert np.isclose(mat[i, j], kernel(a[i], b[j], cfg), atol=1e-12)


def test_gram_single_key_r1():
    rng = np.random.default_rng(3)
    feats = random_instance(rng, 4, 4)
    gram = gram_matrix(feats, [5], KernelConfig(r=1.0))
    assert np.array_equal(gram, [[2.0]])


def test_gram_distant_keys_near_diagonal():
    img = Image(2, 1, np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))
    feats = pixel_features(img, initial_illumination(img))
    gram = gram_matrix(feats, [0, 1], KernelConfig(length_scale=0.1, r=1.0))
    assert np.allclose(np.diag(gram), 2.0)
    assert abs(gram[0, 1]) < 1e-6
    assert np.array_equal(gram, gram.T)


def test_gram_singular_at_r0_duplicates():
    img = Image(2, 1, np.full((2, 3), 0.5))
    feats = PixelFeatures(2, 1, np.full((2, 3), 0.5))
    cfg = KernelConfig(r=0.0)
    with pytest.raises(SingularGramError):
        weight_maps(feats, [0, 1], cfg)
    del img


def test_weight_at_key_pixel_r1():
    rng = np.random.default_rng(4)
    feats = random_instance(rng, 4, 4)
    w = weight_maps(feats, [7], KernelConfig(r=1.0))
    assert np.isclose(w[7, 0], 0.5, atol=1e-12)


def test_weight_at_key_pixel_r0():
    rng = np.random.default_rng(5)
    feats = random_instance(rng, 4, 4)
    w = weight_maps(feats, [7], KernelConfig(r=0.0))
    assert np.isclose(w[7, 0], 1.0, atol=1e-9)


def test_weight_maps_match_brute_force():
    rng = np.random.default_rng(6)
    feats = random_instance(rng)
    keys = [0, 13, 37, 62]
    cfg = KernelConfig(length_scale=0.5, r=1.0)
    w = weight_maps(feats, keys, cfg)
    assert np.abs(w - brute_force_weights(feats, keys, cfg)).max() < 1e-9


def test_exact_interpolation_r0():
    rng = np.random.default_rng(7)
    feats = random_instance(rng)
    keys = [3, 17, 42, 60]
    cfg = KernelConfig(r=0.0)
    w = weight_maps(feats, keys, cfg)
    for col, key in enumerate(keys):
        basis = np.zeros(len(keys))
        basis[col] = 1.0
        assert np.abs(w[key] - basis).max() < 1e-9


def test_weight_rows_matches_weight_maps():
    rng = np.random.default_rng(8)
    feats = random_instance(rng)
    keys = [1, 20, 45]
    cfg = KernelConfig()
    w = weight_maps(feats, keys, cfg)
    rows = weight_rows(feats.scaled(), feats.scaled()[keys], cfg)
    assert np.array_equal(w, rows)


def test_predict_param_zero_q():
    rng = np.random.default_rng(9)
    feats = random_instance(rng, 4, 4)
    out = predict_param(feats.scaled()[3], [2, 9], np.zeros((2, 3)), feats, KernelConfig())
    assert np.allclose(out, 0.0, atol=1e-15)


def test_predict_param_single_key():
    rng = np.random.default_rng(10)
    feats = random_instance(rng, 4, 4)
    q = np.array([[1.0, 0.0, 0.0]])
    out = predict_param(feats.scaled()[6], [6], q, feats, KernelConfig(r=1.0))
    assert np.allclose(out, [0.5, 0.0, 0.0], atol=1e-12)


def test_predict_matches_assemble():
    rng = np.random.default_rng(11)
    feats = random_instance(rng)
    keys = [4, 30, 55, 63]
    cfg = KernelConfig()
    q = rng.uniform(-1, 1, (4, 3))
    w = weight_maps(feats, keys, cfg)
    pmap = assemble_param_map(w, q)
    for n in (0, 17, 40, 63):
        direct = predict_param(feats.scaled()[n], keys, q, feats, cfg)
        assert np.allclose(pmap[n], np.clip(direct, -1, 1), atol=1e-9)


def test_assemble_zero_q():
    w = np.random.default_rng(12).random((10, 4))
    assert np.array_equal(assemble_param_map(w, np.zeros((4, 3))), np.zeros((10, 3)))


def test_assemble_single_column():
    rng = np.random.default_rng(13)
    w = rng.random((6, 1))
    q = np.array([[0.4, 0.0, 0.0]])
    pmap = assemble_param_map(w, q)
    assert np.allclose(pmap[:, 0], 0.4 * w[:, 0], atol=1e-12)
    assert np.array_equal(pmap[:, 1:], np.zeros((6, 2)))


def test_assemble_matches_matmul():
    rng = np.random.default_rng(14)
    w = rng.standard_normal((50, 4))
    q = rng.uniform(-0.2, 0.2, (4, 3))
    assert np.abs(assemble_param_map(w, q) - np.clip(w @ q, -1, 1)).max() < 1e-12


def test_assemble_clamps():
    w = np.array([[3.0]])
    q = np.array([[0.9, -0.9, 0.1]])
    assert np.allclose(assemble_param_map(w, q), [[1.0, -1.0, 0.3]], atol=1e-12)


def test_assemble_linearity_preclamp():
    rng = np.random.default_rng(15)
    w = rng.random((20, 3))
    q1 = rng.uniform(-0.3, 0.3, (3, 3))
    q2 = rng.uniform(-0.3, 0.3, (3, 3))
    combined = assemble_param_map(w, 0.5 * q1 + 0.25 * q2)
    split = 0.5 * assemble_param_map(w, q1) + 0.25 * assemble_param_map(w, q2)
    assert np.allclose(combined, split, atol=1e-12)


def test_edge_aware_weights_follow_illumination():
    # two-region image: key pixel in the dark half should carry more
    # weight over its own half than over the bright half
    w, h = 16, 8
    data = np.full((w * h, 3), 0.15)
    cols = np.tile(np.arange(w), h)
    left = cols < w // 2
    data[~left] = 0.85
    img = Image(w, h, data)
    feats = pixel_features(img, initial_illumination(img))
    key = int(np.flatnonzero(left)[h // 2 * (w // 2) + w // 4])
    wmap = weight_maps(feats, [key], KernelConfig())
    assert wmap[left, 0].mean() > wmap[~left, 0].mean()


def test_weight_map_images_normalized():
    rng = np.random.default_rng(16)
    w = rng.standard_normal((12, 2))
    imgs = weight_map_images(w, 4, 3)
    assert len(imgs) == 2
    for img in imgs:
        assert (img.width, img.height) == (4, 3)
        assert np.isclose(img.data.min(), 0.0) and np.isclose(img.data.max(), 1.0)


def test_save_weight_maps_csv(tmp_path):
    w = np.array([[0.25, 0.75], [1.0, 0.0]])
    path = tmp_path / "w.csv"
    save_weight_maps_csv(w, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "w1,w2"
    assert [float(v) for v in lines[1].split(",")] == [0.25, 0.75]


def test_key_validation():
    rng = np.random.default_rng(17)
    feats = random_instance(rng, 4, 4)
    cfg = KernelConfig()
    with pytest.raises(ValueError):
        weight_maps(feats, [], cfg)
    with pytest.raises(ValueError):
        weight_maps(feats, [3, 3], cfg)
    with pytest.raises(ValueError):
        weight_maps(feats, [99], cfg)
