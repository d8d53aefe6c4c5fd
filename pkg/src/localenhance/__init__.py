"""Crowd- or oracle-driven local photo enhancement.

Per-pixel edit parameters (brightness, saturation, contrast) are
interpolated from a handful of actively selected key pixels via Gaussian
process regression; each key pixel's parameters are tuned one slider at a
time from preference feedback.
"""

from .imaging import (
    Image,
    ImagingError,
    UnreadableImageError,
    UnsupportedFormatError,
    apply_edit,
    apply_param_map,
    clamp_params,
    encode_png,
    global_map,
    image_from_bytes,
    load_image,
    resize_for_preview,
    save_image,
    to_uint8,
)

__version__ = "0.1.0"

__all__ = [
    "Image",
    "ImagingError",
    "UnreadableImageError",
    "UnsupportedFormatError",
    "apply_edit",
    "apply_param_map",
    "clamp_params",
    "encode_png",
    "global_map",
    "image_from_bytes",
    "load_image",
    "resize_for_preview",
    "save_image",
    "to_uint8",
    "__version__",
]
