"""Image quality functions for the oracle driver and evaluation.

PSNR and SSIM serve reference-based checks; nr_score is a lightweight
no-reference proxy (exposure/contrast/colorfulness blend) that gives the
automated oracle a usable gradient where a learned metric would sit.
"""

from __future__ import annotations

import numpy as np

from .imaging import LUMA_WEIGHTS, Image, ImagingError

PSNR_CAP = 99.0
SSIM_WINDOW = 8
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _check_same_dims(a: Image, b: Image):
    if (a.width, a.height) != (b.width, b.height):
        raise ImagingError("image dimensions differ")


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB over all channels, capped at 99."""
    _check_same_dims(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _window_sums(plane: np.ndarray, size: int) -> np.ndarray:
    """Sum of every sliding size x size window via an integral image."""
    padded = np.zeros((plane.shape[0] + 1, plane.shape[1] + 1))
    np.cumsum(np.cumsum(plane, axis=0), axis=1, out=padded[1:, 1:])
    return (
        padded[size:, size:]
        - padded[:-size, size:]
        - padded[size:, :-size]
        + padded[:-size, :-size]
    )


def ssim(a: Image, b: Image) -> float:
    """Mean structural similarity over sliding 8x8 luma windows."""
    _check_same_dims(a, b)
    if a.width < SSIM_WINDOW or a.height < SSIM_WINDOW:
        raise ImagingError(f"image smaller than {SSIM_WINDOW}x{SSIM_WINDOW}")
    ya = (a.data @ LUMA_WEIGHTS).reshape(a.height, a.width)
    yb = (b.data @ LUMA_WEIGHTS).reshape(b.height, b.width)

    n = SSIM_WINDOW * SSIM_WINDOW
    mu_a = _window_sums(ya, SSIM_WINDOW) / n
    mu_b = _window_sums(yb, SSIM_WINDOW) / n
    var_a = _window_sums(ya * ya, SSIM_WINDOW) / n - mu_a**2
    var_b = _window_sums(yb * yb, SSIM_WINDOW) / n - mu_b**2
    cov = _window_sums(ya * yb, SSIM_WINDOW) / n - mu_a * mu_b

    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def nr_score(image: Image) -> float:
    """No-reference quality proxy in [0,1].

    0.4 * exposure + 0.3 * contrast + 0.3 * colorfulness with
    exposure = 1 - mean|y - 0.5| / 0.5, contrast = min(1, std(y)/0.25),
    colorfulness = min(1, mean(channel max - min)/0.3).
    """
    y = image.data @ LUMA_WEIGHTS
    exposure = 1.0 - float(np.mean(np.abs(y - 0.5))) / 0.5
    contrast = min(1.0, float(np.std(y)) / 0.25)
    spread = image.data.max(axis=1) - image.data.min(axis=1)
    colorfulness = min(1.0, float(np.mean(spread)) / 0.3)
    return 0.4 * exposure + 0.3 * contrast + 0.3 * colorfulness
