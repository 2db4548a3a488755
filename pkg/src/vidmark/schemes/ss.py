"""Spread-spectrum watermarking of the line-scanned luma signal.

Each payload bit is repeated over ``chip_rate`` consecutive samples, modulated
by a keyed ±1 chip stream and added with constant amplitude. Detection
high-pass filters the received video, despreads with the same chips and takes
the sign of each per-bit correlation sum.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..errors import CapacityError, DimensionError, UsageError
from ..media import ColorSpace, VideoClip, luma
from ..prng import WatermarkKey, pn_sequence
from .common import DetectionResult, as_pm1, luma_stack, replace_luma, score_against, sign_pm


class HighPass(str, enum.Enum):
    LAPLACIAN3x3 = "LAPLACIAN3x3"
    TEMPORAL_DIFF = "TEMPORAL_DIFF"


@dataclass
class SpreadParams:
    chip_rate: int = 4096
    amplitude: float = 2.0
    highpass: HighPass = HighPass.LAPLACIAN3x3

    def __post_init__(self):
        self.highpass = HighPass(self.highpass)
        if self.chip_rate < 1:
            raise UsageError("chip rate must be >= 1")
        if self.amplitude < 0:
            raise UsageError("amplitude must be non-negative")


PRESENCE_SIGMAS = 4.0

_LAPLACIAN = np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], dtype=np.float64)


def line_scan(clip: VideoClip) -> np.ndarray:
    """Raster order within each frame, frames concatenated (luma for colour clips)."""
    if clip.colorspace is ColorSpace.GRAY8:
        return clip.array()[:, 0].reshape(-1)
    return luma_stack(clip).reshape(-1)


def line_unscan(samples, dims: Tuple[int, int, int]) -> VideoClip:
    """Inverse of :func:`line_scan` for ``dims = (frames, height, width)``."""
    samples = np.asarray(samples)
    n, h, w = dims
    if samples.size != n * h * w:
        raise DimensionError(f"{samples.size} samples cannot fill {n} frames of {w}x{h}")
    return VideoClip.from_array(samples.reshape(n, h, w), ColorSpace.GRAY8)


def spread_bits(bits, cr: int) -> np.ndarray:
    b = np.asarray(bits).ravel()
    if b.size == 0 or not np.all(np.isin(b, (-1, 1))):
        raise UsageError("spread_bits needs a non-empty ±1 sequence")
    return np.repeat(b.astype(np.int8), cr)


def _capacity(clip: VideoClip) -> int:
    return len(clip) * clip.width * clip.height


def ss_embed(clip: VideoClip, bits, key: WatermarkKey, params: SpreadParams = SpreadParams()) -> VideoClip:
    x = as_pm1(bits)
    n = x.size * params.chip_rate
    if n > _capacity(clip):
        raise CapacityError(f"{x.size} bits at chip rate {params.chip_rate} need {n} samples, clip has {_capacity(clip)}")
    y = spread_bits(x, params.chip_rate)
    p = pn_sequence(key, "ss", n).chips
    v = luma_stack(clip).reshape(-1)
    v[:n] += params.amplitude * y * p
    lumas = v.reshape(len(clip), clip.height, clip.width)
    touched = set(range(math.ceil(n / (clip.width * clip.height))))
    return replace_luma(clip, lumas, only=touched)


def highpass(clip: VideoClip, kind: HighPass = HighPass.LAPLACIAN3x3, frames: Optional[int] = None) -> np.ndarray:
    """High-pass filtered luma, shape (frames, h, w).

    The Laplacian uses edge-replicated borders so a spatially constant frame
    filters to exactly zero. ``frames`` limits the output to the leading frames.
    """
    kind = HighPass(kind)
    n = len(clip) if frames is None else min(frames, len(clip))
    # the temporal filter of frame 0 looks at frame 1
    extra = 1 if kind is HighPass.TEMPORAL_DIFF and n < len(clip) else 0
    y = np.stack([luma(f) for f in clip.frames[: n + extra]])
    if kind is HighPass.LAPLACIAN3x3:
        return np.stack([ndimage.correlate(f, _LAPLACIAN, mode="nearest") for f in y])
    out = np.empty_like(y)
    out[1:] = y[1:] - y[:-1]
    out[0] = y[0] - y[1] if len(y) > 1 else 0.0
    return out[:n]


def despread(filtered: np.ndarray, chips: np.ndarray, nbits: int, cr: int) -> np.ndarray:
    n = nbits * cr
    return (filtered[:n] * chips).reshape(nbits, cr).sum(axis=1)


def presence(s: np.ndarray, chip_signal: np.ndarray, cr: int) -> Tuple[float, bool]:
    threshold = PRESENCE_SIGMAS * math.sqrt(cr) * float(np.std(chip_signal))
    level = float(np.mean(np.abs(s)))
    return threshold, bool(level > 0 and level >= threshold)


def ss_detect(
    clip: VideoClip,
    key: WatermarkKey,
    params: SpreadParams = SpreadParams(),
    nbits: int = 1,
    ground_truth: Optional[Sequence[int]] = None,
) -> DetectionResult:
    n = nbits * params.chip_rate
    if n > _capacity(clip):
        raise CapacityError(f"{nbits} bits at chip rate {params.chip_rate} exceed the clip's {_capacity(clip)} samples")
    per_frame = clip.width * clip.height
    v2 = highpass(clip, params.highpass, -(-n // per_frame)).reshape(-1)[:n]
    p = pn_sequence(key, "ss", n).chips
    s = despread(v2, p, nbits, params.chip_rate)
    threshold, present = presence(s, v2, params.chip_rate)
    result = DetectionResult(sign_pm(s), s, threshold, present)
    return score_against(result, ground_truth)
