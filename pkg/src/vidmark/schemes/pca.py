"""PCA-domain watermark in the R, G and B planes of scene key frames.

Each key frame channel is cut into square blocks; the blocks are the samples
of a PCA. Block ``i`` carries chip ``w_i`` multiplicatively on the selected
principal coordinates, ``y <- y + alpha*|y|*w_i``. The detector refits the
PCA on the received frame and correlates the projections with the keyed
chips.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from ..errors import CapacityError, UsageError
from ..media import ColorSpace, VideoClip, to_u8
from ..prng import WatermarkKey, derive_keys, pn_sequence
from ..scenes import DEFAULT_SCENE_THRESHOLD, detect_scenes, key_frames
from ..transforms import PcaModel, from_blocks, pad_to_multiple, pca_fit, pca_project, pca_reconstruct, to_blocks
from .common import DetectionResult

ERASURE = 1e-9
CALIBRATION_KEYS = 200
CALIBRATION_SEED = 0x5EED
CALIBRATION_SIGMAS = 4.0


@dataclass
class PcaParams:
    alpha: float = 0.15
    block: int = 4
    M: Optional[int] = None  # None uses every block of the frame
    components: Tuple[int, ...] = (0,)
    correlation_threshold: Optional[float] = None  # None calibrates on the received clip
    scene_threshold: float = DEFAULT_SCENE_THRESHOLD

    def __post_init__(self):
        self.components = tuple(int(c) for c in self.components)
        if not self.alpha > 0:
            raise UsageError("alpha must be positive")
        if self.block < 2:
            raise UsageError("block side must be >= 2")
        if not self.components or any(not 0 <= c < self.block ** 2 for c in self.components):
            raise UsageError(f"components must lie in [0, {self.block ** 2})")
        if self.M is not None and self.M < 1:
            raise UsageError("M must be >= 1")


def block_count(width: int, height: int, params: PcaParams) -> int:
    return -(-width // params.block) * -(-height // params.block)


def chip_count(width: int, height: int, params: PcaParams) -> int:
    nb = block_count(width, height, params)
    m = nb if params.M is None else params.M
    if m > nb:
        raise CapacityError(f"M = {m} exceeds the {nb} blocks of a {width}x{height} frame")
    return m


def watermark_chips(key: WatermarkKey, m: int) -> np.ndarray:
    return pn_sequence(key, "pca", m).chips.astype(np.float64)


def _samples(plane: np.ndarray, block: int) -> Tuple[np.ndarray, Tuple[int, int]]:
    blocks = to_blocks(pad_to_multiple(plane.astype(np.float64), block), block)
    nbh, nbw = blocks.shape[:2]
    return blocks.reshape(nbh * nbw, block * block), (nbh, nbw)


def _unsamples(z: np.ndarray, grid: Tuple[int, int], block: int, dims: Tuple[int, int]) -> np.ndarray:
    plane = from_blocks(z.reshape(grid[0], grid[1], block, block))
    return plane[: dims[0], : dims[1]]


def embed_channel(plane: np.ndarray, chips: np.ndarray, params: PcaParams) -> np.ndarray:
    """Watermark one channel plane; returns unrounded samples."""
    z, grid = _samples(plane, params.block)
    model = pca_fit(z)
    y = pca_project(model, z)
    m = chips.size
    for c in params.components:
        y[:m, c] += params.alpha * np.abs(y[:m, c]) * chips
    return _unsamples(pca_reconstruct(model, y), grid, params.block, plane.shape)


def channel_projections(plane: np.ndarray, params: PcaParams, m: int) -> Tuple[np.ndarray, PcaModel]:
    """Projections (m, len(components)) of the first m blocks on a refitted basis."""
    z, _ = _samples(plane, params.block)
    model = pca_fit(z)
    return pca_project(model, z[:m])[:, list(params.components)], model


def correlation_value(chips: np.ndarray, proj: np.ndarray) -> float:
    """CV = mean of w_i * y*_i over chips whose coordinate is not erased."""
    keep = np.abs(proj) >= ERASURE
    n = int(keep.sum())
    if n == 0:
        return 0.0
    return float((chips[:, None] * proj)[keep].sum() / n)


def _check_rgb(clip: VideoClip):
    if clip.colorspace is not ColorSpace.RGB8:
        raise UsageError("the PCA scheme works on RGB8 clips")


def pca_embed(clip: VideoClip, key: WatermarkKey, params: PcaParams = PcaParams()) -> VideoClip:
    _check_rgb(clip)
    m = chip_count(clip.width, clip.height, params)
    chips = watermark_chips(key, m)
    kf = set(key_frames(detect_scenes(clip, params.scene_threshold)))
    frames = []
    for i, f in enumerate(clip):
        if i not in kf:
            frames.append(f.copy())
            continue
        planes = np.stack([embed_channel(p, chips, params) for p in f.planes])
        frames.append(f.copy(planes=to_u8(planes)))
    return clip.with_frames(frames)


@dataclass
class _Received:
    proj: List[np.ndarray] = field(default_factory=list)  # one (m, C) array per key frame channel
    key_frames: List[int] = field(default_factory=list)


def _received(clip: VideoClip, params: PcaParams) -> _Received:
    _check_rgb(clip)
    m = chip_count(clip.width, clip.height, params)
    out = _Received()
    out.key_frames = key_frames(detect_scenes(clip, params.scene_threshold))
    for i in out.key_frames:
        for p in clip[i].planes:
            out.proj.append(channel_projections(p, params, m)[0])
    return out


def _mean_cv(chips: np.ndarray, rec: _Received) -> Tuple[float, np.ndarray]:
    cvs = np.array([correlation_value(chips, p) for p in rec.proj])
    return (float(cvs.mean()) if cvs.size else 0.0), cvs


def _calibrate(rec: _Received, m: int, keys: int, seed: int) -> float:
    vals = [_mean_cv(watermark_chips(k, m), rec)[0] for k in derive_keys(seed, keys)]
    return CALIBRATION_SIGMAS * float(np.std(vals))


def calibrate_pca_threshold(clip: VideoClip, params: PcaParams = PcaParams(), keys: int = CALIBRATION_KEYS, seed: int = CALIBRATION_SEED) -> PcaParams:
    """Params with ``correlation_threshold`` set from wrong-key CVs on ``clip``."""
    rec = _received(clip, params)
    m = chip_count(clip.width, clip.height, params)
    return replace(params, correlation_threshold=_calibrate(rec, m, keys, seed))


def pca_detect(clip: VideoClip, key: WatermarkKey, params: PcaParams = PcaParams()) -> DetectionResult:
    if len(clip) == 0:
        return DetectionResult(np.zeros(0, np.int8), np.zeros(0), float("inf"), False, info={"key_frames": []})
    rec = _received(clip, params)
    m = chip_count(clip.width, clip.height, params)
    if not rec.proj:
        return DetectionResult(np.zeros(0, np.int8), np.zeros(0), float("inf"), False, info={"key_frames": []})
    mean_cv, cvs = _mean_cv(watermark_chips(key, m), rec)
    threshold = params.correlation_threshold
    if threshold is None:
        threshold = _calibrate(rec, m, CALIBRATION_KEYS, CALIBRATION_SEED)
    info = {"key_frames": rec.key_frames, "mean_cv": mean_cv}
    return DetectionResult(np.zeros(0, np.int8), cvs, threshold, bool(mean_cv > threshold), info=info)
