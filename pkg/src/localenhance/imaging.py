"""Image container, PNG/JPEG codecs, and the per-pixel editing functions.

Images are float64 RGB in [0,1], stored as an (N, 3) row-major array.
Quantization to 8 bits happens only at the codec boundary so repeated
edits never accumulate rounding error.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

# Rec.601 luma weights; the edit pipeline anchors saturation on this.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

N_EDIT_PARAMS = 3  # brightness, saturation, contrast


class ImagingError(Exception):
    """Base class for image I/O and shape errors."""


class UnreadableImageError(ImagingError):
    """File missing or not readable as an image."""


class UnsupportedFormatError(ImagingError):
    """Image decodes but is not PNG or JPEG."""


class EmptyImageError(ImagingError):
    """Image has a zero dimension."""


@dataclass
class Image:
    """RGB raster with `data` shaped (width*height, 3), values in [0,1]."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.width <= 0 or self.height <= 0:
            raise EmptyImageError(f"zero-size image {self.width}x{self.height}")
        if self.data.shape != (self.width * self.height, 3):
            raise ImagingError(
                f"data shape {self.data.shape} does not match "
                f"{self.width}x{self.height} RGB"
            )
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ImagingError("channel values outside [0,1]")

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def pixels(self) -> np.ndarray:
        """View of the data as an (height, width, 3) grid."""
        return self.data.reshape(self.height, self.width, 3)

    @staticmethod
    def from_pixels(grid: np.ndarray) -> "Image":
        grid = np.asarray(grid, dtype=np.float64)
        h, w = grid.shape[0], grid.shape[1]
        return Image(w, h, grid.reshape(h * w, 3))


def load_image(path: str | os.PathLike) -> Image:
    """Read a PNG or JPEG file; 8-bit channels map to [0,1] via v/255."""
    try:
        with PILImage.open(path) as im:
            fmt = im.format
            if fmt not in ("PNG", "JPEG"):
                raise UnsupportedFormatError(f"{path}: format {fmt} not supported")
            rgb = im.convert("RGB")  # drops alpha / palette
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError) as exc:
        raise UnreadableImageError(f"cannot read image: {path}") from exc
    if arr.size == 0:
        raise EmptyImageError(f"{path}: empty image")
    return Image.from_pixels(arr)


def image_from_bytes(blob: bytes) -> Image:
    """Decode PNG/JPEG bytes (e.g. an HTTP upload) into an Image."""
    import io

    try:
        with PILImage.open(io.BytesIO(blob)) as im:
            fmt = im.format
            if fmt not in ("PNG", "JPEG"):
                raise UnsupportedFormatError(f"format {fmt} not supported")
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError) as exc:
        raise UnreadableImageError("cannot decode image bytes") from exc
    if arr.size == 0:
        raise EmptyImageError("empty image")
    return Image.from_pixels(arr)


def to_uint8(image: Image) -> np.ndarray:
    """Quantize to (H, W, 3) uint8 with round(v*255)."""
    return np.rint(image.pixels() * 255.0).astype(np.uint8)


def save_image(image: Image, path: str | os.PathLike) -> None:
    """Write as PNG; channels quantized by round(v*255)."""
    try:
        PILImage.fromarray(to_uint8(image), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise ImagingError(f"cannot write image: {path}") from exc


def encode_png(image: Image) -> bytes:
    import io

    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(image), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _edit_array(data: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Vectorized edit pipeline on (N,3) channels with (N,3) parameters.

    Order is fixed: exponential brightness, luma-anchored saturation,
    midpoint-anchored contrast, clamp last.  The incremental forms
    (c + p*(c - anchor)) make p = 0 an exact bitwise identity.
    """
    out = data * np.exp2(params[:, 0:1])
    luma = out @ LUMA_WEIGHTS
    out = out + params[:, 1:2] * (out - luma[:, None])
    out = out + params[:, 2:3] * (out - 0.5)
    return np.clip(out, 0.0, 1.0)


def apply_edit(rgb, p) -> np.ndarray:
    """Edit one RGB triple with parameters (brightness, saturation, contrast)."""
    rgb = np.asarray(rgb, dtype=np.float64).reshape(1, 3)
    p = np.asarray(p, dtype=np.float64).reshape(1, 3)
    return _edit_array(rgb, p)[0]


def apply_param_map(image: Image, pmap: np.ndarray) -> Image:
    """Apply a per-pixel parameter map (one row of 3 parameters per pixel)."""
    pmap = np.asarray(pmap, dtype=np.float64)
    if pmap.shape != (image.n_pixels, N_EDIT_PARAMS):
        raise ImagingError(
            f"parameter map shape {pmap.shape} does not match image "
            f"with {image.n_pixels} pixels"
        )
    return Image(image.width, image.height, _edit_array(image.data, pmap))


def global_map(p, n_pixels: int) -> np.ndarray:
    """Parameter map assigning the same vector to every pixel."""
    if n_pixels <= 0:
        raise ImagingError("n_pixels must be positive")
    p = np.asarray(p, dtype=np.float64).reshape(N_EDIT_PARAMS)
    return np.tile(p, (n_pixels, 1))


def clamp_params(pmap: np.ndarray) -> np.ndarray:
    """Clamp edit parameters into [-1,1] (regression output can overshoot)."""
    return np.clip(pmap, -1.0, 1.0)


def _box_resample_axis(arr: np.ndarray, new_size: int, axis: int) -> np.ndarray:
    """Exact area-averaging resample along one axis (downscale or identity)."""
    n = arr.shape[axis]
    if new_size == n:
        return arr
    moved = np.moveaxis(arr, axis, 0)
    csum = np.concatenate(
        [np.zeros((1,) + moved.shape[1:]), np.cumsum(moved, axis=0)], axis=0
    )

    def integral(x):
        # piecewise-linear antiderivative of the pixel step function
        k = np.clip(np.floor(x).astype(int), 0, n - 1)
        frac = (x - k).reshape((-1,) + (1,) * (moved.ndim - 1))
        return csum[k] + frac * moved[k]

    edges = np.linspace(0.0, float(n), new_size + 1)
    sums = integral(edges[1:]) - integral(edges[:-1])
    widths = (edges[1:] - edges[:-1]).reshape((-1,) + (1,) * (moved.ndim - 1))
    return np.moveaxis(sums / widths, 0, axis)


def resize_for_preview(image: Image, max_edge: int) -> Image:
    """Box-filter downsample so the longest edge is at most `max_edge`."""
    if max_edge < 1:
        raise ImagingError("max_edge must be >= 1")
    longest = max(image.width, image.height)
    if longest <= max_edge:
        return image
    scale = max_edge / longest
    new_w = max(1, int(round(image.width * scale)))
    new_h = max(1, int(round(image.height * scale)))
    grid = image.pixels()
    grid = _box_resample_axis(grid, new_h, axis=0)
    grid = _box_resample_axis(grid, new_w, axis=1)
    return Image.from_pixels(np.clip(grid, 0.0, 1.0))


def resize_plane(plane: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Box-resample a 2-D float plane (used for preview illumination maps)."""
    out = _box_resample_axis(plane, new_h, axis=0)
    out = _box_resample_axis(out, new_w, axis=1)
    return np.clip(out, 0.0, 1.0)


def resize_exact(image: Image, new_w: int, new_h: int) -> Image:
    """Box-resample to exact dimensions (aligning references with previews)."""
    if new_w < 1 or new_h < 1:
        raise ImagingError("target dimensions must be >= 1")
    if (new_w, new_h) == (image.width, image.height):
        return image
    grid = image.pixels()
    grid = _box_resample_axis(grid, new_h, axis=0)
    grid = _box_resample_axis(grid, new_w, axis=1)
    return Image.from_pixels(np.clip(grid, 0.0, 1.0))
