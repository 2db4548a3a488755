"""Temporal segmentation: histogram-difference cuts and fixed-length WMS."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import CapacityError, UsageError
from .media import ColorSpace, Frame, VideoClip, luma, to_u8

DEFAULT_SCENE_THRESHOLD = 0.35


class SegmentMethod(str, enum.Enum):
    HISTOGRAM_DIFF = "HISTOGRAM_DIFF"
    FIXED_LENGTH = "FIXED_LENGTH"


@dataclass
class SceneSegmentation:
    scenes: List[Tuple[int, int]]
    method: SegmentMethod
    uncovered_tail: int = 0
    frame_count: int = field(default=-1)

    def __post_init__(self):
        self.scenes = [(int(a), int(b)) for a, b in self.scenes]
        if self.frame_count < 0:
            self.frame_count = (self.scenes[-1][1] if self.scenes else 0) + self.uncovered_tail

    def validate(self) -> None:
        expect = 0
        for a, b in self.scenes:
            if a != expect or b <= a:
                raise ValueError(f"invalid scene range [{a}, {b}) after {expect}")
            expect = b
        if expect + self.uncovered_tail != self.frame_count:
            raise ValueError("segmentation does not cover the clip")

    def scene_of(self, frame_index: int) -> int:
        for s, (a, b) in enumerate(self.scenes):
            if a <= frame_index < b:
                return s
        return -1

    def to_json(self) -> str:
        return json.dumps(
            {"method": self.method.value, "scenes": [list(s) for s in self.scenes],
             "uncovered_tail": self.uncovered_tail},
            sort_keys=True,
        )


def _luma_hist(frame: Frame) -> np.ndarray:
    y = frame.planes[0] if frame.colorspace is not ColorSpace.RGB8 else to_u8(luma(frame))
    return np.bincount(y.ravel(), minlength=256)


def histogram_difference(a: Frame, b: Frame) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise UsageError("histogram_difference needs frames of equal size")
    ha, hb = _luma_hist(a), _luma_hist(b)
    return float(np.abs(ha - hb).sum()) / (2.0 * a.width * a.height)


def detect_scenes(clip: VideoClip, threshold: float = DEFAULT_SCENE_THRESHOLD) -> SceneSegmentation:
    if not len(clip):
        raise UsageError("cannot segment an empty clip")
    if not 0 < threshold <= 1:
        raise UsageError(f"scene threshold must lie in (0, 1], got {threshold}")
    hists = [_luma_hist(f) for f in clip]
    norm = 2.0 * clip.width * clip.height
    cuts = [0]
    for k in range(1, len(clip)):
        if np.abs(hists[k] - hists[k - 1]).sum() / norm > threshold:
            cuts.append(k)
    cuts.append(len(clip))
    return SceneSegmentation(list(zip(cuts[:-1], cuts[1:])), SegmentMethod.HISTOGRAM_DIFF)


def key_frames(seg: SceneSegmentation) -> List[int]:
    return [a for a, _ in seg.scenes]


def wms_segments(clip: VideoClip, N: int) -> SceneSegmentation:
    if N < 2:
        raise UsageError("WMS length N must be >= 2")
    n = len(clip)
    if n < N:
        raise CapacityError(f"clip has {n} frames, shorter than one WMS of {N}")
    count = n // N
    return SceneSegmentation(
        [(i * N, (i + 1) * N) for i in range(count)], SegmentMethod.FIXED_LENGTH, uncovered_tail=n - count * N, frame_count=n
    )
