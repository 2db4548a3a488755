"""Spread-spectrum watermark in mid-band block-DCT coefficients.

The chip signal is the same as the line-scan scheme; instead of pixels it is
added to a walk over frames -> 8x8 blocks (raster) -> band coefficients
(zig-zag). Detection despreads the band coefficients directly, the mid-band
selection doing the job of the spatial high-pass filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import CapacityError, UsageError
from ..media import VideoClip, luma
from ..prng import WatermarkKey, pn_sequence
from ..transforms import block_dct, block_idct, pad_to_multiple, zigzag
from .common import DetectionResult, as_pm1, replace_luma, score_against, sign_pm
from .ss import despread, presence, spread_bits

BLOCK = 8


@dataclass
class DctParams:
    chip_rate: int = 1024
    amplitude: float = 3.0
    band: Tuple[int, ...] = field(default_factory=lambda: tuple(range(6, 15)))

    def __post_init__(self):
        self.band = tuple(int(b) for b in self.band)
        if not self.band or any(not 1 <= b <= 63 for b in self.band):
            raise UsageError("band indices must lie in [1, 63]")
        if len(set(self.band)) != len(self.band):
            raise UsageError("band indices must be distinct")
        if self.chip_rate < 1:
            raise UsageError("chip rate must be >= 1")
        if self.amplitude < 0:
            raise UsageError("amplitude must be non-negative")


def _band_rc(params: DctParams):
    zz = zigzag(BLOCK)
    rows = np.array([zz[b][0] for b in params.band])
    cols = np.array([zz[b][1] for b in params.band])
    return rows, cols


def _grid(width: int, height: int) -> Tuple[int, int]:
    return -(-height // BLOCK), -(-width // BLOCK)


def coefficients_per_frame(width: int, height: int, params: DctParams) -> int:
    nbh, nbw = _grid(width, height)
    return nbh * nbw * len(params.band)


def coefficient_walk(dims: Tuple[int, int, int], params: DctParams, count: int) -> List[Tuple[int, int, int, int, int]]:
    """The first ``count`` visited coefficients as (frame, block_row, block_col, u, v)."""
    frames, height, width = dims
    nbh, nbw = _grid(width, height)
    per_frame = coefficients_per_frame(width, height, params)
    if count > frames * per_frame:
        raise CapacityError(f"walk of {count} coefficients exceeds {frames * per_frame}")
    rows, cols = _band_rc(params)
    nb = len(params.band)
    out = []
    for i in range(count):
        f, r = divmod(i, per_frame)
        blk, k = divmod(r, nb)
        br, bc = divmod(blk, nbw)
        out.append((f, br, bc, int(rows[k]), int(cols[k])))
    return out


def _frame_coeffs(y: np.ndarray) -> np.ndarray:
    return block_dct(pad_to_multiple(y, BLOCK), BLOCK)


def _check_capacity(clip: VideoClip, nbits: int, params: DctParams) -> int:
    n = nbits * params.chip_rate
    budget = len(clip) * coefficients_per_frame(clip.width, clip.height, params)
    if n > budget:
        raise CapacityError(f"{nbits} bits at chip rate {params.chip_rate} need {n} coefficients, clip offers {budget}")
    return n


def embed_coefficients(clip: VideoClip, bits, key: WatermarkKey, params: DctParams):
    """Original and watermarked coefficient arrays of every touched frame.

    Returns ``{frame_index: (before, after)}``; exposed for coefficient-domain checks.
    """
    x = as_pm1(bits)
    n = _check_capacity(clip, x.size, params)
    w = params.amplitude * spread_bits(x, params.chip_rate) * pn_sequence(key, "dct", n).chips
    rows, cols = _band_rc(params)
    per_frame = coefficients_per_frame(clip.width, clip.height, params)
    out = {}
    for f in range(-(-n // per_frame)):
        c = _frame_coeffs(luma(clip[f]))
        before = c.copy()
        chunk = w[f * per_frame:(f + 1) * per_frame]
        band = c[:, :, rows, cols].reshape(-1)
        band[:chunk.size] += chunk
        c[:, :, rows, cols] = band.reshape(c.shape[0], c.shape[1], len(rows))
        out[f] = (before, c)
    return out


def dct_embed(clip: VideoClip, bits, key: WatermarkKey, params: DctParams = DctParams()) -> VideoClip:
    coeffs = embed_coefficients(clip, bits, key, params)
    lumas = {f: block_idct(after)[: clip.height, : clip.width] for f, (_, after) in coeffs.items()}
    return replace_luma(clip, lumas, only=set(lumas))


def band_signal(clip: VideoClip, n: int, params: DctParams) -> np.ndarray:
    rows, cols = _band_rc(params)
    per_frame = coefficients_per_frame(clip.width, clip.height, params)
    parts = []
    for f in range(-(-n // per_frame)):
        parts.append(_frame_coeffs(luma(clip[f]))[:, :, rows, cols].reshape(-1))
    return np.concatenate(parts)[:n]


def dct_detect(
    clip: VideoClip,
    key: WatermarkKey,
    params: DctParams = DctParams(),
    nbits: int = 1,
    ground_truth: Optional[Sequence[int]] = None,
) -> DetectionResult:
    n = _check_capacity(clip, nbits, params)
    c = band_signal(clip, n, params)
    s = despread(c, pn_sequence(key, "dct", n).chips, nbits, params.chip_rate)
    threshold, present = presence(s, c, params.chip_rate)
    return score_against(DetectionResult(sign_pm(s), s, threshold, present), ground_truth)
