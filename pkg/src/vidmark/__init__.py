"""Video watermarking toolkit: six embedding schemes, an attack battery and a robustness bench."""

from .errors import CapacityError, DimensionError, FormatError, NumericError, UsageError, WatermarkError
from .media import ColorSpace, Frame, VideoClip, load_clip, psnr, save_clip
from .prng import WatermarkKey, derive_keys, pn_sequence

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ColorSpace",
    "DimensionError",
    "FormatError",
    "Frame",
    "NumericError",
    "UsageError",
    "VideoClip",
    "WatermarkError",
    "WatermarkKey",
    "derive_keys",
    "load_clip",
    "pn_sequence",
    "psnr",
    "save_clip",
]
