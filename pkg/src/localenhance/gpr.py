"""GPR weight maps: interpolate key-pixel parameters over the image.

A parameter map is factored as P = W Q where Q stacks the L key pixels'
parameter vectors and W holds per-pixel regression weights.  W depends
only on pixel features (position + illumination) and the kernel, never on
parameter values, so it is computed once per key-pixel set and reused for
every preview during optimization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .illumination import IlluminationMap
from .imaging import Image, ImagingError, clamp_params

DEFAULT_LENGTH_SCALE = 0.5
DEFAULT_REGULARIZER = 1.0
DEFAULT_FEATURE_SCALES = (1.0, 1.0, 1.0)

KERNEL_CHUNK = 65536  # rows of the big operand per kernel-matrix block


class SingularGramError(ValueError):
    """Gram matrix is not positive definite (r=0 with duplicate features)."""


@dataclass(frozen=True)
class KernelConfig:
    """Exponential-kernel hyperparameters; r is the noise regularizer."""

    length_scale: float = DEFAULT_LENGTH_SCALE
    r: float = DEFAULT_REGULARIZER

    def __post_init__(self):
        if self.length_scale <= 0:
            raise ValueError("length_scale must be > 0")
        if self.r < 0:
            raise ValueError("r must be >= 0")


@dataclass
class PixelFeatures:
    """Per-pixel (x, y, t) features, raw in [0,1]; scales applied at kernel time."""

    width: int
    height: int
    raw: np.ndarray
    scales: np.ndarray = field(
        default_factory=lambda: np.array(DEFAULT_FEATURE_SCALES)
    )

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        self.scales = np.asarray(self.scales, dtype=np.float64)
        if self.raw.shape != (self.width * self.height, 3):
            raise ImagingError("feature row count does not match dimensions")
        if self.scales.shape != (3,) or np.any(self.scales <= 0):
            raise ValueError("scales must be 3 positive reals")
        if self.raw.size and (self.raw.min() < 0 or self.raw.max() > 1):
            raise ImagingError("raw features outside [0,1]")

    @property
    def n_pixels(self) -> int:
        return self.raw.shape[0]

    def scaled(self) -> np.ndarray:
        return self.raw * self.scales


def pixel_features(
    image: Image,
    t: IlluminationMap,
    scales: Sequence[float] = DEFAULT_FEATURE_SCALES,
) -> PixelFeatures:
    """Normalized xy-coordinates plus illumination, row-major."""
    if (t.width, t.height) != (image.width, image.height):
        raise ImagingError("illumination/image dimension mismatch")
    w, h = image.width, image.height
    xs = np.arange(w) / (w - 1) if w > 1 else np.zeros(w)
    ys = np.arange(h) / (h - 1) if h > 1 else np.zeros(h)
    raw = np.empty((w * h, 3))
    raw[:, 0] = np.tile(xs, h)
    raw[:, 1] = np.repeat(ys, w)
    raw[:, 2] = t.t
    return PixelFeatures(w, h, raw, np.asarray(scales, dtype=np.float64))


def kernel(a: np.ndarray, b: np.ndarray, cfg: KernelConfig) -> float:
    """Exponential kernel on (already scaled) feature points."""
    d = np.linalg.norm(np.asarray(a, dtype=np.float64) - b)
    return float(np.exp(-d / cfg.length_scale))


def kernel_matrix(a: np.ndarray, b: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Cross-kernel matrix between two scaled feature sets, chunked over rows."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], KERNEL_CHUNK):
        block = a[start : start + KERNEL_CHUNK]
        # accumulate squared diffs per feature dim: same float result as a
        # 3-d broadcast reduce, without the (rows, cols, dims) temporary
        d2 = np.zeros((block.shape[0], b.shape[0]))
        for k in range(b.shape[1]):
            diff = block[:, k, None] - b[None, :, k]
            d2 += diff * diff
        out[start : start + block.shape[0]] = np.exp(
            -np.sqrt(d2) / cfg.length_scale
        )
    return out


def gram_matrix(
    features: PixelFeatures, keys: Sequence[int], cfg: KernelConfig
) -> np.ndarray:
    """K_ij = kernel(x_i, x_j) + r on the diagonal, over the key pixels."""
    idx = _check_keys(keys, features.n_pixels)
    pts = features.scaled()[idx]
    return kernel_matrix(pts, pts, cfg) + cfg.r * np.eye(len(idx))


def _check_keys(keys: Sequence[int], n: int) -> np.ndarray:
    idx = np.asarray(list(keys), dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("keys must be a non-empty index sequence")
    if idx.size > n or idx.min() < 0 or idx.max() >= n:
        raise ValueError("key index out of range")
    if len(set(idx.tolist())) != idx.size:
        raise ValueError("key indices must be distinct")
    return idx


def _factor(gram: np.ndarray):
    try:
        return cho_factor(gram, lower=True)
    except LinAlgError as exc:
        raise SingularGramError("gram matrix not positive definite") from exc


def weight_rows(
    query_scaled: np.ndarray, key_scaled: np.ndarray, cfg: KernelConfig
) -> np.ndarray:
    """Regression weights k_q^T K^{-1} for arbitrary scaled query points.

    Key features stay at full resolution even when queries come from a
    downsampled preview, so previews and final renders share one model.
    """
    gram = kernel_matrix(key_scaled, key_scaled, cfg) + cfg.r * np.eye(
        key_scaled.shape[0]
    )
    factor = _factor(gram)
    cross = kernel_matrix(np.atleast_2d(query_scaled), key_scaled, cfg)
    return cho_solve(factor, cross.T).T


def weight_maps(
    features: PixelFeatures, keys: Sequence[int], cfg: KernelConfig
) -> np.ndarray:
    """N x L weight matrix, row n = k_n^T K^{-1}."""
    idx = _check_keys(keys, features.n_pixels)
    pts = features.scaled()
    return weight_rows(pts, pts[idx], cfg)


def predict_param(
    x: np.ndarray,
    keys: Sequence[int],
    q: np.ndarray,
    features: PixelFeatures,
    cfg: KernelConfig,
) -> np.ndarray:
    """Unclamped parameter vector k_x^T K^{-1} Q at one scaled feature point."""
    idx = _check_keys(keys, features.n_pixels)
    row = weight_rows(np.atleast_2d(x), features.scaled()[idx], cfg)[0]
    return row @ np.asarray(q, dtype=np.float64)


def assemble_param_map(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """P = W Q clamped to [-1,1].

    Accumulated column-by-column so the reduction order is fixed; BLAS
    GEMM may reorder sums, and resumed sessions must rebuild parameter
    maps bit-identically.
    """
    w = np.asarray(w, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if w.ndim != 2 or q.ndim != 2 or w.shape[1] != q.shape[0]:
        raise ValueError("W columns must match Q rows")
    out = np.zeros((w.shape[0], q.shape[1]))
    for col in range(w.shape[1]):
        out += w[:, col : col + 1] * q[col]
    return clamp_params(out)


def weight_map_images(w: np.ndarray, width: int, height: int) -> list[Image]:
    """Each weight column as a min-max normalized grayscale Image."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != width * height:
        raise ImagingError("weight row count does not match dimensions")
    images = []
    for col in range(w.shape[1]):
        vals = w[:, col]
        span = vals.max() - vals.min()
        norm = (vals - vals.min()) / span if span > 0 else np.zeros_like(vals)
        images.append(Image(width, height, np.repeat(norm[:, None], 3, axis=1)))
    return images


def save_weight_maps_csv(w: np.ndarray, path) -> None:
    """Flat CSV dump, one row per pixel, one column per key pixel."""
    w = np.asarray(w, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"w{i + 1}" for i in range(w.shape[1])])
        writer.writerows(w.tolist())
