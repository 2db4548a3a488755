"""Deterministic, parameterized clip attacks for robustness measurement."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np
from scipy import ndimage

from .errors import FormatError, UsageError
from .media import VideoClip, to_u8
from .prng import WatermarkKey, keyed_permutation
from .transforms import block_dct, block_idct, pad_to_multiple


class AttackKind(str, enum.Enum):
    FRAME_DROP = "FRAME_DROP"
    FRAME_AVERAGE = "FRAME_AVERAGE"
    FRAME_SWAP = "FRAME_SWAP"
    GAUSSIAN_NOISE = "GAUSSIAN_NOISE"
    SALT_PEPPER = "SALT_PEPPER"
    LOSSY_COMPRESS = "LOSSY_COMPRESS"
    CROP = "CROP"
    SCALE = "SCALE"
    ROTATE = "ROTATE"
    MEDIAN_FILTER = "MEDIAN_FILTER"
    LOW_PASS = "LOW_PASS"
    ROW_COL_REMOVAL = "ROW_COL_REMOVAL"
    IDENTITY = "IDENTITY"


# name of the single scalar parameter and its default, per kind
_PARAM: Dict[AttackKind, tuple] = {
    AttackKind.FRAME_DROP: ("p", 0.1),
    AttackKind.FRAME_AVERAGE: ("w", 3),
    AttackKind.FRAME_SWAP: ("p", 0.5),
    AttackKind.GAUSSIAN_NOISE: ("sigma", 2.0),
    AttackKind.SALT_PEPPER: ("d", 0.01),
    AttackKind.LOSSY_COMPRESS: ("q", 75),
    AttackKind.SCALE: ("s", 0.5),
    AttackKind.ROTATE: ("theta", 2.0),
    AttackKind.MEDIAN_FILTER: ("k", 3),
    AttackKind.LOW_PASS: ("k", 3),
    AttackKind.ROW_COL_REMOVAL: ("n", 2),
}

# Standard JPEG luminance quantization table (quality 50).
JPEG_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


@dataclass
class AttackSpec:
    kind: AttackKind
    params: Dict[str, Any] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        self.kind = AttackKind(self.kind)
        if self.kind in _PARAM:
            name, default = _PARAM[self.kind]
            self.params = {name: default, **self.params}
        _validate(self)

    @property
    def value(self):
        name = _PARAM.get(self.kind, (None,))[0]
        return self.params.get(name)

    @property
    def label(self) -> str:
        """Short human label, e.g. ``GAUSSIAN_NOISE(sigma=5)``."""
        if not self.params:
            return self.kind.value
        inner = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))
        return f"{self.kind.value}({inner})"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, **self.params, "seed": self.rng_seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "AttackSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise FormatError("attack spec must be an object with a 'kind' field")
        d = dict(d)
        kind = str(d.pop("kind")).upper()
        if kind not in AttackKind.__members__:
            raise UsageError(f"unknown attack kind {kind!r}")
        seed = int(d.pop("seed", d.pop("rng_seed", 0)))
        return cls(AttackKind(kind), d, seed)

    @classmethod
    def from_json(cls, text: str) -> "AttackSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad attack JSON: {exc.msg}", exc.pos) from None


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def load_attacks(text: str) -> List[AttackSpec]:
    """Parse a JSON attack file: one spec object or a list of them."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad attack JSON: {exc.msg}", exc.pos) from None
    items = data if isinstance(data, list) else [data]
    return [AttackSpec.from_dict(d) for d in items]


def _odd(k, name):
    if int(k) != k or k < 1 or k % 2 == 0:
        raise UsageError(f"{name} must be an odd positive integer, got {k}")


def _validate(spec: AttackSpec) -> None:
    k, v = spec.kind, spec.value
    allowed = {"rect"} if k is AttackKind.CROP else {_PARAM[k][0]} if k in _PARAM else set()
    extra = sorted(set(spec.params) - allowed)
    if extra:
        raise UsageError(f"unknown parameter(s) {', '.join(extra)} for {k.value}")
    bad = False
    if k in (AttackKind.FRAME_DROP, AttackKind.FRAME_SWAP, AttackKind.SALT_PEPPER):
        bad = not 0 <= v < 1 if k is AttackKind.FRAME_DROP else not 0 <= v <= 1
    elif k is AttackKind.FRAME_AVERAGE:
        _odd(v, "window w")
        bad = v < 3
    elif k is AttackKind.GAUSSIAN_NOISE:
        bad = v < 0
    elif k is AttackKind.LOSSY_COMPRESS:
        bad = not 1 <= v <= 100
    elif k is AttackKind.SCALE:
        bad = not 0 < v
    elif k in (AttackKind.MEDIAN_FILTER, AttackKind.LOW_PASS):
        _odd(v, "kernel k")
    elif k is AttackKind.ROW_COL_REMOVAL:
        bad = int(v) != v or v < 0
    elif k is AttackKind.CROP:
        rect = spec.params.get("rect")
        if rect is None or len(rect) != 4 or rect[2] < 1 or rect[3] < 1 or min(rect[:2]) < 0:
            raise UsageError("CROP needs rect = [x, y, width, height] with positive size")
    if bad:
        raise UsageError(f"invalid parameter {v!r} for {k.value}")


def _rng(spec: AttackSpec) -> np.random.Generator:
    return np.random.default_rng(spec.rng_seed)


def _per_plane(clip: VideoClip, fn) -> VideoClip:
    frames = [f.copy(planes=to_u8(np.stack([fn(p.astype(np.float64)) for p in f.planes]))) for f in clip]
    return clip.with_frames(frames)


def quant_table(q: int) -> np.ndarray:
    """JPEG-style quality scaling of the luminance table (entries >= 1)."""
    s = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    return np.maximum(np.floor((JPEG_LUMA * s + 50.0) / 100.0), 1.0)


def _compress(plane: np.ndarray, q: int) -> np.ndarray:
    h, w = plane.shape
    c = block_dct(pad_to_multiple(plane - 128.0, 8), 8)
    t = quant_table(q)
    c = np.round(c / t) * t
    return block_idct(c)[:h, :w] + 128.0


def _bilinear(plane: np.ndarray, rows: np.ndarray, cols: np.ndarray, cval=None) -> np.ndarray:
    if cval is None:
        return ndimage.map_coordinates(plane, [rows, cols], order=1, mode="nearest")
    return ndimage.map_coordinates(plane, [rows, cols], order=1, mode="constant", cval=cval)


def _scale(plane: np.ndarray, s: float) -> np.ndarray:
    h, w = plane.shape
    sh, sw = max(1, int(round(h * s))), max(1, int(round(w * s)))
    r = np.linspace(0, h - 1, sh)
    c = np.linspace(0, w - 1, sw)
    small = _bilinear(plane, *np.meshgrid(r, c, indexing="ij"))
    r = np.linspace(0, sh - 1, h)
    c = np.linspace(0, sw - 1, w)
    return _bilinear(small, *np.meshgrid(r, c, indexing="ij"))


def _rotate(plane: np.ndarray, theta_deg: float) -> np.ndarray:
    h, w = plane.shape
    t = np.deg2rad(theta_deg)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # inverse map: output pixel -> source coordinate
    sy = cy + (yy - cy) * np.cos(t) - (xx - cx) * np.sin(t)
    sx = cx + (yy - cy) * np.sin(t) + (xx - cx) * np.cos(t)
    return _bilinear(plane, sy, sx, cval=0.0)


def _remove_rows_cols(plane: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    kept = np.delete(np.delete(plane, rows, axis=0), cols, axis=1)
    kh, kw = kept.shape
    r = np.linspace(0, kh - 1, h)
    c = np.linspace(0, kw - 1, w)
    return _bilinear(kept, *np.meshgrid(r, c, indexing="ij"))


def apply_attack(clip: VideoClip, spec: AttackSpec) -> VideoClip:
    k, v = spec.kind, spec.value
    if k is AttackKind.IDENTITY:
        return clip.with_frames([f.copy() for f in clip])
    if k is AttackKind.FRAME_DROP:
        keep = _rng(spec).random(len(clip)) >= v
        return clip.with_frames([f.copy() for f, kp in zip(clip, keep) if kp])
    if k is AttackKind.FRAME_SWAP:
        frames = [f.copy() for f in clip]
        rng = _rng(spec)
        i = 0
        while i < len(frames) - 1:
            if rng.random() < v:
                frames[i], frames[i + 1] = frames[i + 1], frames[i]
                i += 2
            else:
                i += 1
        return clip.with_frames(frames)
    if k is AttackKind.FRAME_AVERAGE:
        a = clip.array().astype(np.float64)
        n, half = len(a), int(v) // 2
        idx = np.clip(np.arange(n)[:, None] + np.arange(-half, half + 1)[None], 0, n - 1)
        out = to_u8(a[idx].mean(axis=1))
        return clip.with_frames([f.copy(planes=o) for f, o in zip(clip, out)])
    if k is AttackKind.GAUSSIAN_NOISE:
        a = clip.array().astype(np.float64)
        out = to_u8(a + _rng(spec).normal(0.0, v, a.shape)) if v > 0 else clip.array()
        return clip.with_frames([f.copy(planes=o) for f, o in zip(clip, out)])
    if k is AttackKind.SALT_PEPPER:
        a = clip.array().copy()
        rng = _rng(spec)
        hit = rng.random(a.shape) < v
        a[hit] = np.where(rng.random(int(hit.sum())) < 0.5, 0, 255).astype(np.uint8)
        return clip.with_frames([f.copy(planes=o) for f, o in zip(clip, a)])
    if k is AttackKind.LOSSY_COMPRESS:
        return _per_plane(clip, lambda p: _compress(p, int(v)))
    if k is AttackKind.CROP:
        x, y, w, h = (int(t) for t in spec.params["rect"])
        mask = np.zeros((clip.height, clip.width), dtype=bool)
        mask[y:y + h, x:x + w] = True
        return _per_plane(clip, lambda p: np.where(mask, p, 0.0))
    if k is AttackKind.SCALE:
        return _per_plane(clip, lambda p: _scale(p, float(v)))
    if k is AttackKind.ROTATE:
        return _per_plane(clip, lambda p: _rotate(p, float(v)))
    if k is AttackKind.MEDIAN_FILTER:
        return _per_plane(clip, lambda p: ndimage.median_filter(p, size=int(v), mode="nearest"))
    if k is AttackKind.LOW_PASS:
        return _per_plane(clip, lambda p: ndimage.uniform_filter(p, size=int(v), mode="nearest"))
    if k is AttackKind.ROW_COL_REMOVAL:
        n = int(v)
        if n >= min(clip.width, clip.height):
            raise UsageError(f"cannot remove {n} rows and columns from a {clip.width}x{clip.height} frame")
        key = WatermarkKey(spec.rng_seed)
        rows = keyed_permutation(key, "attack-rows", clip.height, n)
        cols = keyed_permutation(key, "attack-cols", clip.width, n)
        return _per_plane(clip, lambda p: _remove_rows_cols(p, rows, cols))
    raise UsageError(f"unhandled attack {k}")
