"""Procedurally generated test clips.

``acceptance_clip`` is the bundled bench cover: 64 RGB frames of 128x128
showing textured rectangles drifting over a textured background, with hard
cuts between four scenes. Everything is derived from one integer seed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

from .media import ColorSpace, VideoClip, to_u8

ACCEPTANCE_CUTS = (15, 33, 49)


def _scene_frames(rng, n, size, base, tint, rects):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    background = base + 18.0 * np.sin(2 * np.pi * (xx * rng.uniform(0.5, 1.5) + yy * rng.uniform(0.5, 1.5)) / size)
    background += rng.normal(0, 7.0, (size, size))
    shapes = []
    for _ in range(rects):
        h, w = rng.integers(size // 6, size // 2, 2)
        level = rng.uniform(-45, 45)
        texture = 2.5 * ndimage.gaussian_filter(rng.normal(0, 9.0, (h, w)), 1.0)
        texture += 10.0 * np.sin(np.arange(w) / rng.uniform(3.0, 6.0))[None]
        pos = rng.uniform(0, size - max(h, w), 2)
        vel = rng.uniform(-0.6, 0.6, 2)
        shapes.append((h, w, level, texture, pos, vel))
    frames = []
    for t in range(n):
        y = background.copy()
        for h, w, level, texture, pos, vel in shapes:
            r0, c0 = np.round(pos + vel * t).astype(int) % (size - max(h, w))
            y[r0:r0 + h, c0:c0 + w] += level + texture
        y += rng.normal(0, 1.5, (size, size))
        y = np.clip(y, 16, 239)
        rgb = np.stack([y + tint[0], y + tint[1], y + tint[2]])
        frames.append(to_u8(rgb))
    return frames


def acceptance_clip(seed: int = 0, frames: int = 64, size: int = 128, cuts: Sequence[int] = ACCEPTANCE_CUTS) -> VideoClip:
    rng = np.random.default_rng(seed)
    bounds = [0, *cuts, frames]
    bases = [70.0, 150.0, 105.0, 185.0]
    tints = [(6, 0, -8), (-5, 2, 6), (8, -4, 0), (0, 3, -6)]
    planes = []
    for s in range(len(bounds) - 1):
        planes += _scene_frames(rng, bounds[s + 1] - bounds[s], size, bases[s % 4], tints[s % 4], rects=3)
    return VideoClip.from_array(np.stack(planes), ColorSpace.RGB8, fps=25.0, label=f"acceptance-seed{seed}")


def constant_clip(frames: int = 4, width: int = 64, height: int = 64, value: int = 128) -> VideoClip:
    return VideoClip.from_array(np.full((frames, height, width), value, np.uint8), ColorSpace.GRAY8, label="constant")


def noise_clip(frames: int, width: int, height: int, seed: int = 0, mean: float = 128.0, std: float = 20.0) -> VideoClip:
    rng = np.random.default_rng(seed)
    return VideoClip.from_array(to_u8(rng.normal(mean, std, (frames, height, width))), ColorSpace.GRAY8, label="noise")
