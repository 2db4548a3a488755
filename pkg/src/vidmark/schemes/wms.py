"""Temporal-axis watermarking inside fixed-length Watermark Minimum Segments.

Every WMS of ``N`` frames carries, at keyed pixel positions, three kinds of
temporal signal scaled by ``beta * (sigma + 1)`` where sigma is the pixel's
temporal standard deviation over the segment:

* templates: orthogonal sequences that reveal the segment's start offset and,
  through their positions, any small geometric distortion;
* payload: DS-CDMA spread bits, ``M`` chips per bit;
* sync references: further orthogonal rows at ``sync_copies + 1`` position sets.

Detection removes each pixel's temporal mean, finds the templates by
normalized circular correlation, then despreads the payload at the offset
(and geometry) the templates indicate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import CapacityError, UsageError
from ..media import VideoClip
from ..prng import WatermarkKey, disjoint_positions, orthogonal_set, pn_sequence
from ..scenes import wms_segments
from .common import DetectionResult, as_pm1, luma_stack, replace_luma, score_against, sign_pm

Position = Tuple[int, int]


@dataclass
class WmsParams:
    N: int = 32
    beta: float = 1.0
    M: int = 8
    template_count: int = 6
    payload_positions: int = 16
    sync_copies: int = 1
    sync_points: int = 2
    detect_threshold: float = 0.6
    search_radius: int = 8
    max_fit_residual: float = 1.5

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise UsageError(f"N must be a power of two >= 2, got {self.N}")
        if self.M < 1 or self.N % self.M:
            raise UsageError(f"M must be >= 1 and divide N = {self.N}")
        if self.template_count < 3:
            raise UsageError("at least 3 templates are needed")
        if self.payload_positions < 1 or self.sync_copies < 0 or self.sync_points < 1:
            raise UsageError("position counts must be positive")
        if self.beta < 0:
            raise UsageError("beta must be non-negative")
        if self.template_count + self.sync_copies + 1 > self.N - 1:
            raise CapacityError(f"{self.template_count} templates and {self.sync_copies + 1} sync rows exceed {self.N - 1} orthogonal sequences")

    @property
    def bits_per_position(self) -> int:
        return self.N // self.M

    @property
    def capacity(self) -> int:
        return self.payload_positions * self.bits_per_position


@dataclass
class WmsLayout:
    templates: List[np.ndarray]
    sync: List[np.ndarray]
    chips: np.ndarray
    template_pos: List[Position]
    payload_pos: List[Position]
    sync_pos: List[List[Position]]


def layout(key: WatermarkKey, params: WmsParams, width: int, height: int) -> WmsLayout:
    rows = orthogonal_set(key, params.template_count + params.sync_copies + 1, params.N)
    seqs = [r.chips.astype(np.float64) for r in rows]
    requests = [("template", params.template_count), ("payload", params.payload_positions)]
    requests += [(f"sync-{j}", params.sync_points) for j in range(params.sync_copies + 1)]
    pos = disjoint_positions(key, requests, width, height)
    return WmsLayout(
        templates=seqs[: params.template_count],
        sync=seqs[params.template_count:],
        chips=pn_sequence(key, "cdma-chips", params.N).chips.astype(np.float64),
        template_pos=pos[0],
        payload_pos=pos[1],
        sync_pos=pos[2:],
    )


def temporal_sigma(segment, x: int, y: int) -> float:
    """Population standard deviation of one pixel's luma over the segment."""
    s = _segment_array(segment)
    return float(s[:, y, x].std())


def _segment_array(segment) -> np.ndarray:
    s = luma_stack(segment) if isinstance(segment, VideoClip) else np.asarray(segment, dtype=np.float64)
    if s.ndim != 3:
        raise UsageError("segment must be frames x height x width")
    if s.shape[0] < 2:
        raise UsageError("a WMS needs at least 2 frames")
    return s


def cdma_encode(bits, key: WatermarkKey, params: WmsParams) -> np.ndarray:
    """W(k) = bits[k // M] * c(k) for one payload position."""
    b = np.asarray(bits).ravel()
    if b.size * params.M != params.N:
        raise UsageError(f"{b.size} bits x M = {params.M} does not fill N = {params.N} chips")
    x = as_pm1(b).astype(np.float64)
    return np.repeat(x, params.M) * pn_sequence(key, "cdma-chips", params.N).chips


def _add(seg: np.ndarray, sigma: np.ndarray, positions: Sequence[Position], signal: np.ndarray, beta: float) -> None:
    for x, y in positions:
        seg[:, y, x] += beta * (sigma[y, x] + 1.0) * signal


def embed_template(segment, key: WatermarkKey, params: WmsParams) -> np.ndarray:
    """Segment luma (float, unrounded) with the time-axis templates added."""
    s = _segment_array(segment).copy()
    if s.shape[0] != params.N:
        raise UsageError(f"segment has {s.shape[0]} frames, expected N = {params.N}")
    lay = layout(key, params, s.shape[2], s.shape[1])
    sigma = s.std(axis=0)
    for pos, v in zip(lay.template_pos, lay.templates):
        _add(s, sigma, [pos], v, params.beta)
    return s


def channel_bits(bits, params: WmsParams) -> np.ndarray:
    """Payload repeated cyclically up to the per-WMS capacity."""
    x = as_pm1(bits)
    if x.size > params.capacity:
        raise CapacityError(f"payload of {x.size} bits exceeds the WMS capacity of {params.capacity}")
    return np.resize(x, params.capacity)


def embed_segment(s: np.ndarray, chan: np.ndarray, key: WatermarkKey, params: WmsParams, lay: WmsLayout) -> np.ndarray:
    out = s.copy()
    sigma = s.std(axis=0)
    for pos, v in zip(lay.template_pos, lay.templates):
        _add(out, sigma, [pos], v, params.beta)
    bpp = params.bits_per_position
    for p, pos in enumerate(lay.payload_pos):
        _add(out, sigma, [pos], cdma_encode(chan[p * bpp:(p + 1) * bpp], key, params), params.beta)
    for ps, r in zip(lay.sync_pos, lay.sync):
        _add(out, sigma, ps, r, params.beta)
    return out


def wms_embed(clip: VideoClip, bits, key: WatermarkKey, params: WmsParams = WmsParams()) -> VideoClip:
    seg = wms_segments(clip, params.N)
    chan = channel_bits(bits, params)
    lay = layout(key, params, clip.width, clip.height)
    y = luma_stack(clip)
    touched = set()
    for a, b in seg.scenes:
        y[a:b] = embed_segment(y[a:b], chan, key, params, lay)
        touched.update(range(a, b))
    return replace_luma(clip, y, only=touched)


def offset_scores(series: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Normalized circular correlation of each row of ``series`` with ``roll(v, l)``.

    ``series`` is (K, N) and already mean-removed; the result is (K, N) indexed
    by offset ``l``.
    """
    vc = v - v.mean()
    cc = np.real(np.fft.ifft(np.fft.fft(series, axis=1) * np.conj(np.fft.fft(vc)), axis=1))
    norm = np.linalg.norm(series, axis=1) * np.linalg.norm(vc)
    return np.divide(cc, norm[:, None], out=np.zeros_like(cc), where=norm[:, None] > 0)


@dataclass
class TemplateDetection:
    positions: List[Tuple[int, int, float]]  # found (x, y, d) per agreeing template
    start_offset: int
    found: bool
    affine: Optional[np.ndarray] = None  # 2x3 map from embedded to received coordinates
    stage: str = "none"
    template_index: List[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "found": self.found,
                "start_offset": self.start_offset,
                "stage": self.stage,
                "positions": [[x, y, round(d, 6)] for x, y, d in self.positions],
                "template_index": self.template_index,
                "affine": None if self.affine is None else np.round(self.affine, 6).tolist(),
            },
            sort_keys=True,
        )


def _modal(hits: List[Tuple[int, int, int, float, int]]):
    """Hits agreeing on the most common offset (ties: larger summed score)."""
    best = None
    for l in sorted({h[4] for h in hits}):
        group = [h for h in hits if h[4] == l]
        rank = (len(group), sum(h[3] for h in group))
        if best is None or rank > best[0]:
            best = (rank, l, group)
    return best[1], best[2]


def fit_affine(src: np.ndarray, dst: np.ndarray) -> Tuple[np.ndarray, float]:
    """Least-squares 2x3 affine with dst ~ A @ [x, y, 1]; returns (A, rms residual)."""
    design = np.column_stack([src, np.ones(len(src))])
    sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
    resid = design @ sol - dst
    return sol.T, float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))


def _identity() -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def detect_template(segment, key: WatermarkKey, params: WmsParams = WmsParams(), lay: Optional[WmsLayout] = None) -> TemplateDetection:
    g = _segment_array(segment)
    g = g - g.mean(axis=0)
    n, h, w = g.shape
    if n != params.N:
        raise UsageError(f"segment has {n} frames, expected N = {params.N}")
    lay = lay or layout(key, params, w, h)
    thr = params.detect_threshold

    hits = []
    for i, ((x, y), v) in enumerate(zip(lay.template_pos, lay.templates)):
        sc = offset_scores(g[:, y, x][None], v)[0]
        l = int(np.argmax(sc))
        if sc[l] > thr:
            hits.append((i, x, y, float(sc[l]), l))
    if hits:
        l, group = _modal(hits)
        if len(group) >= 3:
            return TemplateDetection([(x, y, d) for _, x, y, d, _ in group], l, True, _identity(), "exact", [g_[0] for g_ in group])

    r = params.search_radius
    if r <= 0:
        return TemplateDetection([], 0, False)
    hits = []
    for i, ((x0, y0), v) in enumerate(zip(lay.template_pos, lay.templates)):
        ys, xs = np.mgrid[max(0, y0 - r):min(h, y0 + r + 1), max(0, x0 - r):min(w, x0 + r + 1)]
        xs, ys = xs.ravel(), ys.ravel()
        sc = offset_scores(g[:, ys, xs].T, v)
        c, l = np.unravel_index(int(np.argmax(sc)), sc.shape)
        if sc[c, l] > thr:
            hits.append((i, int(xs[c]), int(ys[c]), float(sc[c, l]), int(l)))
    if not hits:
        return TemplateDetection([], 0, False)
    l, group = _modal(hits)
    if len(group) < 3:
        return TemplateDetection([], 0, False)
    src = np.array([lay.template_pos[i] for i, *_ in group], dtype=np.float64)
    dst = np.array([(x, y) for _, x, y, _, _ in group], dtype=np.float64)
    affine, resid = fit_affine(src, dst)
    if len(group) >= 4 and resid > params.max_fit_residual:
        return TemplateDetection([], 0, False)
    return TemplateDetection([(x, y, d) for _, x, y, d, _ in group], l, True, affine, "search", [g_[0] for g_ in group])


def _map(affine: np.ndarray, pos: Position, w: int, h: int) -> Position:
    x, y = affine @ np.array([pos[0], pos[1], 1.0])
    return int(np.clip(np.round(x), 0, w - 1)), int(np.clip(np.round(y), 0, h - 1))


def despread_segment(g: np.ndarray, det: TemplateDetection, lay: WmsLayout, params: WmsParams):
    """Per channel bit: d = (1/M) sum aligned * c, and the normalized |correlation|."""
    _, h, w = g.shape
    bpp, m = params.bits_per_position, params.M
    d = np.zeros(params.capacity)
    rho = np.zeros(params.capacity)
    for p, pos in enumerate(lay.payload_pos):
        x, y = _map(det.affine, pos, w, h)
        a = np.roll(g[:, y, x], -det.start_offset).reshape(bpp, m)
        c = lay.chips.reshape(bpp, m)
        dots = (a * c).sum(axis=1)
        norms = np.linalg.norm(a, axis=1) * np.sqrt(m)
        d[p * bpp:(p + 1) * bpp] = dots / m
        rho[p * bpp:(p + 1) * bpp] = np.divide(np.abs(dots), norms, out=np.zeros_like(dots), where=norms > 0)
    return d, rho


def wms_detect(
    clip: VideoClip,
    key: WatermarkKey,
    params: WmsParams = WmsParams(),
    nbits: Optional[int] = None,
    ground_truth: Optional[Sequence[int]] = None,
) -> DetectionResult:
    nbits = params.capacity if nbits is None else nbits
    if not 1 <= nbits <= params.capacity:
        raise CapacityError(f"cannot read {nbits} bits from a WMS holding {params.capacity}")
    seg = wms_segments(clip, params.N)
    lay = layout(key, params, clip.width, clip.height)
    y = luma_stack(clip)
    detections, soft, hard, rhos = [], [], [], []
    for a, b in seg.scenes:
        det = detect_template(y[a:b], key, params, lay)
        detections.append(det)
        if not det.found:
            continue
        g = y[a:b] - y[a:b].mean(axis=0)
        d, rho = despread_segment(g, det, lay, params)
        soft.append(d)
        hard.append(sign_pm(d))
        rhos.append(rho.mean())
    info = {"templates": detections, "segments": seg.scenes}
    if not soft:
        result = DetectionResult(np.zeros(0, np.int8), np.zeros(0), params.detect_threshold, False, info=info)
        return score_against(result, ground_truth)
    idx = np.arange(params.capacity) % nbits
    votes = np.bincount(idx, weights=np.sum(hard, axis=0), minlength=nbits)
    sums = np.bincount(idx, weights=np.sum(soft, axis=0), minlength=nbits)
    bits = np.where(votes != 0, sign_pm(votes), sign_pm(sums)).astype(np.int8)
    rho = float(np.mean(rhos))
    info["rho"] = rho
    result = DetectionResult(bits, sums, params.detect_threshold, rho > params.detect_threshold, info=info)
    return score_against(result, ground_truth)
