"""Scene-based DWT watermarking by coefficient exchange.

A grayscale watermark image is cut into ``2**n`` tiles, one per scene, each
tile expanded into its 8 bit-planes. Every frame of a scene carries its tile:
the target detail bands are read in keyed order, grouped into windows of
``window`` coefficients, and the first coefficient of each window is swapped
with the window maximum (bit 1) or minimum (bit 0). Detection compares that
coefficient with the window median and votes across frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import CapacityError, UsageError
from ..media import Frame, VideoClip, luma, with_luma
from ..prng import WatermarkKey, keyed_permutation
from ..scenes import DEFAULT_SCENE_THRESHOLD, SceneSegmentation, detect_scenes
from ..transforms import SubbandPyramid, dwt2, idwt2
from .common import replace_luma

PAPER_TILE = 64


@dataclass
class BitplaneWatermark:
    tiles: List[np.ndarray]  # uint8 tiles of tile x tile samples
    p: int
    q: int
    n: int
    scene_count: int
    source_dims: Tuple[int, int]  # (height, width) of the supplied image
    tile: int = PAPER_TILE

    @property
    def scene_assignment(self) -> Dict[int, List[int]]:
        """Tile index -> scenes carrying it (scene s carries tile s mod 2**n)."""
        out: Dict[int, List[int]] = {t: [] for t in range(len(self.tiles))}
        for s in range(self.scene_count):
            out[s % len(self.tiles)].append(s)
        return out

    def pattern(self, t: int) -> np.ndarray:
        return bitplanes(self.tiles[t])

    def assembled(self) -> np.ndarray:
        return assemble_tiles(self.tiles, self.p, self.q)


def bitplanes(tile: np.ndarray) -> np.ndarray:
    """tile x (8*tile) binary pattern: bit-planes MSB first, side by side."""
    tile = np.asarray(tile, dtype=np.uint8)
    return np.concatenate([(tile >> b) & 1 for b in range(7, -1, -1)], axis=1)


def from_bitplanes(pattern: np.ndarray) -> np.ndarray:
    t = pattern.shape[0]
    planes = pattern.reshape(t, 8, t).transpose(1, 0, 2)
    weights = (1 << np.arange(7, -1, -1)).astype(np.uint16)
    return np.tensordot(weights, planes.astype(np.uint16), axes=1).astype(np.uint8)


def assemble_tiles(tiles: Sequence[np.ndarray], p: int, q: int) -> np.ndarray:
    rows = [np.concatenate(tiles[r * 2 ** q:(r + 1) * 2 ** q], axis=1) for r in range(2 ** p)]
    return np.concatenate(rows, axis=0)


def resize_nearest(image: np.ndarray, height: int, width: int) -> np.ndarray:
    image = np.asarray(image)
    ri = (np.arange(height) * image.shape[0]) // height
    ci = (np.arange(width) * image.shape[1]) // width
    return image[ri[:, None], ci[None, :]]


def split_exponents(scene_count: int) -> Tuple[int, int, int]:
    n = max(0, int(math.floor(math.log2(max(scene_count, 1)))))
    p = -(-n // 2)
    return n, p, n - p


def watermark_preprocess(image, scene_count: int, tile: int = PAPER_TILE) -> BitplaneWatermark:
    """Rescale to ``tile*2**p`` rows by ``tile*2**q`` columns and cut into tiles."""
    if scene_count < 1:
        raise UsageError("scene count must be >= 1")
    image = np.asarray(image)
    if image.ndim != 2:
        raise UsageError("watermark must be a 2-D grayscale image")
    n, p, q = split_exponents(scene_count)
    scaled = resize_nearest(image, tile * 2 ** p, tile * 2 ** q).astype(np.uint8)
    tiles = [
        scaled[r * tile:(r + 1) * tile, c * tile:(c + 1) * tile].copy()
        for r in range(2 ** p)
        for c in range(2 ** q)
    ]
    return BitplaneWatermark(tiles, p, q, n, scene_count, image.shape, tile)


@dataclass
class DwtParams:
    levels: int = 4
    target_bands: Tuple[str, ...] = ("LH3", "HL3")
    window: int = 5
    scene_threshold: float = DEFAULT_SCENE_THRESHOLD
    wavelet: str = "HAAR"
    # None picks the largest tile side (<= 64) whose bit-planes fit one frame
    tile: Optional[int] = None

    def __post_init__(self):
        self.target_bands = tuple(self.target_bands)
        if self.wavelet != "HAAR":
            raise UsageError(f"unsupported wavelet {self.wavelet!r}")
        if self.tile is not None and self.tile < 1:
            raise UsageError("tile side must be >= 1")
        if self.window < 3 or self.window % 2 == 0:
            raise UsageError("window must be odd and >= 3")
        for b in self.target_bands:
            if b[:2] not in ("LH", "HL", "HH") or not 1 <= int(b[2:]) <= self.levels:
                raise UsageError(f"bad target band {b!r}")


def band_budget(width: int, height: int, params: DwtParams) -> int:
    """Number of target-band coefficients in one frame."""
    total = 0
    for b in params.target_bands:
        lev = int(b[2:])
        h, w = height, width
        for _ in range(lev):
            h, w = -(-h // 2), -(-w // 2)
        total += h * w
    return total


def resolve_tile(width: int, height: int, params: DwtParams) -> int:
    if params.tile is not None:
        return params.tile
    fit = math.isqrt(band_budget(width, height, params) // (8 * params.window))
    if fit < 1:
        raise CapacityError("frame too small to carry a single bit-plane tile")
    return min(PAPER_TILE, fit)


def _gather(pyr: SubbandPyramid, params: DwtParams) -> np.ndarray:
    return np.concatenate([pyr.band(b).ravel() for b in params.target_bands])


def _scatter(pyr: SubbandPyramid, params: DwtParams, vec: np.ndarray) -> None:
    pos = 0
    for b in params.target_bands:
        kind, lev = b[:2], int(b[2:])
        band = pyr.bands[lev - 1][kind]
        pyr.bands[lev - 1][kind] = vec[pos:pos + band.size].reshape(band.shape)
        pos += band.size


def _groups(key: WatermarkKey, ncoef: int, nbits: int, params: DwtParams) -> np.ndarray:
    """(nbits, window) coefficient indices; column 0 is the carrier C_i."""
    need = nbits * params.window
    if need > ncoef:
        raise CapacityError(f"{nbits} pattern bits need {need} coefficients, frame bands hold {ncoef}")
    return keyed_permutation(key, "dwt-order", ncoef, need).reshape(nbits, params.window)


def exchange(vec: np.ndarray, groups: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Swap each carrier with its window max (bit 1) or min (bit 0)."""
    out = vec.copy()
    win = out[groups]
    pick = np.where(bits.astype(bool), win.argmax(axis=1), win.argmin(axis=1))
    rows = np.arange(len(groups))
    first = win[:, 0].copy()
    win[:, 0] = win[rows, pick]
    win[rows, pick] = first
    out[groups] = win
    return out


def read_bits(vec: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """EW_j = 1 iff the carrier is strictly above the window median."""
    win = vec[groups]
    return (win[:, 0] > np.median(win, axis=1)).astype(np.uint8)


def carrier_margin(vec: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """Carrier minus window median, relative to the window spread (0 for flat windows)."""
    win = vec[groups]
    spread = win.max(axis=1) - win.min(axis=1)
    margin = win[:, 0] - np.median(win, axis=1)
    return np.divide(margin, spread, out=np.zeros_like(margin), where=spread > 0)


def _settle(frame: Frame, pyr: SubbandPyramid, vec: np.ndarray, groups: np.ndarray, bits: np.ndarray,
            params: DwtParams, passes: int = 6) -> np.ndarray:
    """Write ``vec`` back and keep every non-flat window readable after 8-bit rounding.

    A swap between close coefficients can move pixels by less than half a level,
    so rounding reverts it. Windows that misread on the rounded frame get their
    carrier pushed past the median in steps of half a pixel level.
    """
    step = 0.5 * 2 ** max(int(b[2:]) for b in params.target_bands)
    win = vec[groups]
    live = win.max(axis=1) > win.min(axis=1)
    up = bits.astype(bool)
    for k in range(1, passes + 1):
        _scatter(pyr, params, vec)
        y = idwt2(pyr)
        got = read_bits(_gather(dwt2(luma(with_luma(frame, y)), params.levels), params), groups)
        bad = np.flatnonzero((got != bits) & live)
        if bad.size == 0 or k == passes:
            return y
        win = vec[groups[bad]]
        med = np.median(win, axis=1)
        car = np.where(up[bad], np.maximum(win[:, 0], med + k * step), np.minimum(win[:, 0], med - k * step))
        vec[groups[bad, 0]] = car
    return y


def dwt_embed(clip: VideoClip, wm: BitplaneWatermark, key: WatermarkKey, params: DwtParams = DwtParams()) -> VideoClip:
    seg = detect_scenes(clip, params.scene_threshold)
    if wm.tile != resolve_tile(clip.width, clip.height, params):
        raise UsageError(f"watermark tiles are {wm.tile} wide, parameters call for {resolve_tile(clip.width, clip.height, params)}")
    lumas = {}
    groups = None
    for s, (a, b) in enumerate(seg.scenes):
        bits = wm.pattern(s % len(wm.tiles)).ravel()
        for i in range(a, b):
            pyr = dwt2(luma(clip[i]), params.levels)
            vec = _gather(pyr, params)
            if groups is None or len(groups) != bits.size:
                groups = _groups(key, vec.size, bits.size, params)
            lumas[i] = _settle(clip[i], pyr, exchange(vec, groups, bits), groups, bits, params)
    return replace_luma(clip, lumas, only=set(lumas))


@dataclass
class DwtDetection:
    image: np.ndarray
    tiles: List[np.ndarray]
    tile_ber: Dict[int, float]
    segmentation: SceneSegmentation
    sync_warning: Optional[str] = None
    scene_bits: List[np.ndarray] = field(default_factory=list, repr=False)


def dwt_detect(
    clip: VideoClip,
    key: WatermarkKey,
    params: DwtParams = DwtParams(),
    scene_count: int = 1,
    wm_dims: Optional[Tuple[int, int]] = None,
    original: Optional[BitplaneWatermark] = None,
) -> DwtDetection:
    seg = detect_scenes(clip, params.scene_threshold)
    n, p, q = split_exponents(scene_count)
    ntiles = 2 ** n
    side = resolve_tile(clip.width, clip.height, params)
    nbits = side * side * 8
    warning = None
    used = min(scene_count, len(seg.scenes))
    if len(seg.scenes) != scene_count:
        warning = f"detected {len(seg.scenes)} scenes, watermark was embedded over {scene_count}; using {used}"
    ones = np.zeros((ntiles, nbits), dtype=np.int64)
    soft = np.zeros((ntiles, nbits))
    votes = np.zeros(ntiles, dtype=np.int64)
    scene_bits = []
    groups = None
    for s, (a, b) in enumerate(seg.scenes[:used]):
        t = s % ntiles
        acc = np.zeros(nbits, dtype=np.int64)
        for i in range(a, b):
            vec = _gather(dwt2(luma(clip[i]), params.levels), params)
            if groups is None:
                groups = _groups(key, vec.size, nbits, params)
            acc += read_bits(vec, groups)
            soft[t] += carrier_margin(vec, groups)
        scene_bits.append((2 * acc > (b - a)).astype(np.uint8))
        ones[t] += acc
        votes[t] += b - a
    tiles = []
    tile_ber = {}
    for t in range(ntiles):
        # frame majority; an exact tie falls back to the summed margin
        lead = 2 * ones[t] - votes[t]
        pattern = np.where(lead != 0, lead > 0, soft[t] > 0).astype(np.uint8).reshape(side, 8 * side)
        tiles.append(from_bitplanes(pattern))
        if original is not None:
            tile_ber[t] = float(np.mean(pattern != original.pattern(t)))
    image = assemble_tiles(tiles, p, q)
    if wm_dims is not None:
        image = resize_nearest(image, *wm_dims)
    return DwtDetection(image, tiles, tile_ber, seg, warning, scene_bits)
