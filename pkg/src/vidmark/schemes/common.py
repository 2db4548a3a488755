"""Pieces shared by the embedding schemes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..errors import UsageError
from ..media import VideoClip, luma, with_luma
from ..metrics import ber


@dataclass
class DetectionResult:
    bits: np.ndarray
    correlations: np.ndarray
    threshold: float
    present: bool
    ber_vs: Optional[float] = None
    info: Dict[str, Any] = field(default_factory=dict)


def as_pm1(bits) -> np.ndarray:
    """Validate a payload and return it as int8 ±1; {0,1} input maps 0 -> -1."""
    b = np.asarray(bits).ravel()
    if b.size == 0:
        raise UsageError("payload must contain at least one bit")
    vals = set(np.unique(b).tolist())
    if vals <= {-1, 1}:
        return b.astype(np.int8)
    if vals <= {0, 1}:
        return np.where(b > 0, 1, -1).astype(np.int8)
    raise UsageError(f"payload bits must be ±1 (or 0/1), got values {sorted(vals)}")


def as01(bits) -> np.ndarray:
    return (as_pm1(bits) > 0).astype(np.uint8)


def sign_pm(x) -> np.ndarray:
    """Sign with sign(0) = +1."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def luma_stack(clip: VideoClip) -> np.ndarray:
    return np.stack([luma(f) for f in clip])


def replace_luma(clip: VideoClip, lumas, only=None) -> VideoClip:
    """New clip whose frames carry the given luma planes.

    Frames whose index is not in ``only`` (when given) are copied untouched.
    """
    frames = []
    for i, f in enumerate(clip):
        if only is not None and i not in only:
            frames.append(f.copy())
        else:
            frames.append(with_luma(f, lumas[i]))
    return clip.with_frames(frames)


def score_against(result: DetectionResult, truth) -> DetectionResult:
    """Fill ``ber_vs``; bits the detector could not recover count as +1."""
    if truth is not None:
        t = as_pm1(truth)
        got = np.ones(t.size, dtype=np.int8)
        n = min(t.size, result.bits.size)
        got[:n] = result.bits[:n]
        result.ber_vs = ber(t, got)
    return result
