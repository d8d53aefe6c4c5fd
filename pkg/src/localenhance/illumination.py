"""Illumination map estimation and brightening preprocessing.

The illumination map is a per-pixel estimate of environmental brightness
(Retinex decomposition): initialized as the channel maximum and refined
with edge-aware weighted least squares.  It serves both as a regression
feature and as the divisor of the LIME-style brightening step applied
before crowd tasks are deployed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import LUMA_WEIGHTS, Image, ImagingError

DEFAULT_LAMBDA = 0.15
DEFAULT_ITERS = 50
EDGE_EPS = 1e-3      # edge-stopping weight guard
DEFAULT_GAMMA = 0.8
DIVISOR_EPS = 1e-3   # division guard in preprocessing


@dataclass
class IlluminationMap:
    """Per-pixel brightness estimate in [0,1], aligned with an image."""

    width: int
    height: int
    t: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.t.shape != (self.width * self.height,):
            raise ImagingError(
                f"illumination shape {self.t.shape} does not match "
                f"{self.width}x{self.height}"
            )
        if self.t.size and (self.t.min() < 0.0 or self.t.max() > 1.0):
            raise ImagingError("illumination values outside [0,1]")

    def plane(self) -> np.ndarray:
        return self.t.reshape(self.height, self.width)


def initial_illumination(image: Image) -> IlluminationMap:
    """Max-channel initialization: t_n = max(r_n, g_n, b_n)."""
    return IlluminationMap(image.width, image.height, image.data.max(axis=1))


def refine_illumination(
    t0: IlluminationMap,
    image: Image,
    lam: float = DEFAULT_LAMBDA,
    iters: int = DEFAULT_ITERS,
    edge_eps: float = EDGE_EPS,
) -> IlluminationMap:
    """Edge-aware smoothing of the initial map.

    Minimizes sum (t - t0)^2 + lam * sum over 4-neighbors a_nm (t_n - t_m)^2
    with a_nm = 1 / (|t0_n - t0_m| + edge_eps), by Jacobi sweeps.  Weights
    collapse at strong edges, so steps survive while flat-region noise is
    averaged out.
    """
    if (t0.width, t0.height) != (image.width, image.height):
        raise ImagingError("illumination/image dimension mismatch")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam == 0 or iters <= 0:
        return IlluminationMap(t0.width, t0.height, t0.t.copy())

    base = t0.plane()
    h, w = base.shape
    # Edge-stopping weights on the four grid links, fixed from t0.
    a_s = np.zeros((h, w))  # link to the neighbor below
    a_e = np.zeros((h, w))  # link to the neighbor on the right
    a_s[:-1, :] = 1.0 / (np.abs(base[:-1, :] - base[1:, :]) + edge_eps)
    a_e[:, :-1] = 1.0 / (np.abs(base[:, :-1] - base[:, 1:]) + edge_eps)

    a_n = np.zeros((h, w))
    a_w = np.zeros((h, w))
    a_n[1:, :] = a_s[:-1, :]
    a_w[:, 1:] = a_e[:, :-1]
    denom = 1.0 + lam * (a_s + a_e + a_n + a_w)

    t = base.copy()
    for _ in range(iters):
        acc = np.zeros((h, w))
        acc[:-1, :] += a_s[:-1, :] * t[1:, :]
        acc[1:, :] += a_n[1:, :] * t[:-1, :]
        acc[:, :-1] += a_e[:, :-1] * t[:, 1:]
        acc[:, 1:] += a_w[:, 1:] * t[:, :-1]
        t = (base + lam * acc) / denom
    return IlluminationMap(t0.width, t0.height, np.clip(t, 0.0, 1.0).ravel())


def lime_preprocess(
    image: Image,
    gamma: float = DEFAULT_GAMMA,
    divisor_eps: float = DIVISOR_EPS,
    lam: float = DEFAULT_LAMBDA,
    iters: int = DEFAULT_ITERS,
) -> Image:
    """Brighten by dividing out the refined illumination: c / max(t^gamma, eps).

    The divisor never exceeds 1, so no channel gets darker.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must be in (0,1]")
    t = refine_illumination(initial_illumination(image), image, lam, iters)
    divisor = np.maximum(t.t**gamma, divisor_eps)
    out = np.clip(image.data / divisor[:, None], 0.0, 1.0)
    return Image(image.width, image.height, out)


def denoise(image: Image, strength: int) -> Image:
    """Bilateral-style edge-preserving smoothing; spatial radius = strength.

    strength 0 is a no-op.  Range weights follow the luma difference so
    edges stay put while flat-region noise is averaged away (stand-in for
    a learned denoiser, behind the same hook).
    """
    if strength not in (0, 1, 2, 3):
        raise ValueError("strength must be one of 0, 1, 2, 3")
    if strength == 0:
        return image

    radius = strength
    sigma_s = 0.75 * radius
    sigma_r = 0.1
    grid = image.pixels()
    luma = grid @ LUMA_WEIGHTS
    pad = radius
    padded = np.pad(grid, ((pad, pad), (pad, pad), (0, 0)), mode="reflect")
    padded_luma = np.pad(luma, pad, mode="reflect")

    h, w = luma.shape
    acc = np.zeros_like(grid)
    norm = np.zeros((h, w))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            spatial = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma_s**2))
            shifted = padded[pad + dy : pad + dy + h, pad + dx : pad + dx + w]
            shifted_luma = padded_luma[pad + dy : pad + dy + h, pad + dx : pad + dx + w]
            weight = spatial * np.exp(
                -((shifted_luma - luma) ** 2) / (2.0 * sigma_r**2)
            )
            acc += weight[:, :, None] * shifted
            norm += weight
    out = np.clip(acc / norm[:, :, None], 0.0, 1.0)
    return Image.from_pixels(out)
