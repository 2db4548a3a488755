"""The six embedding schemes behind one small adapter interface.

An adapter embeds a ±1 payload under a key and scores a received clip
against that payload, so the robustness bench can treat every scheme alike.
Schemes without a bit payload (pca) report no BER; schemes without a presence
verdict (svd, dwt) report no detection flag.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from ..errors import UsageError
from ..media import VideoClip
from ..metrics import ber
from ..prng import WatermarkKey
from ..scenes import detect_scenes
from .common import DetectionResult, as01, as_pm1
from .dct_ss import DctParams, dct_detect, dct_embed
from .dwt_scene import DwtParams, dwt_detect, dwt_embed, resolve_tile, split_exponents, watermark_preprocess
from .pca import PcaParams, pca_detect, pca_embed
from .ss import SpreadParams, ss_detect, ss_embed
from .svd_bits import SvdParams, svd_embed, svd_extract
from .wms import WmsParams, wms_detect, wms_embed


@dataclass
class Outcome:
    ber: Optional[float]
    present: Optional[bool]
    detail: Any = None


@dataclass
class EmbedRecord:
    """What an embed produced plus what the detector needs to score it."""

    clip: VideoClip
    truth: np.ndarray
    context: Dict[str, Any]


def bits_to_image(bits, height: int, width: int) -> np.ndarray:
    """Pack a payload (repeated cyclically) MSB-first into a uint8 image."""
    b = np.resize(as01(bits), height * width * 8)
    return np.packbits(b).reshape(height, width)


class Scheme:
    name = ""
    params_type: type = object

    def __init__(self, params=None):
        self.params = params if params is not None else self.params_type()

    def with_overrides(self, **overrides) -> "Scheme":
        known = {f.name for f in fields(self.params_type)}
        picked = {k: v for k, v in overrides.items() if k in known and v is not None}
        return type(self)(replace(self.params, **picked))

    def embed(self, clip: VideoClip, payload, key: WatermarkKey) -> EmbedRecord:
        raise NotImplementedError

    def detect(self, clip: VideoClip, key: WatermarkKey, record: EmbedRecord) -> Outcome:
        raise NotImplementedError


class _SpreadLike(Scheme):
    embed_fn: Callable = None
    detect_fn: Callable = None

    def embed(self, clip, payload, key):
        x = as_pm1(payload)
        return EmbedRecord(type(self).embed_fn(clip, x, key, self.params), x, {})

    def detect(self, clip, key, record):
        r: DetectionResult = type(self).detect_fn(clip, key, self.params, record.truth.size, record.truth)
        return Outcome(r.ber_vs, r.present, r)


class SsScheme(_SpreadLike):
    name = "ss"
    params_type = SpreadParams
    embed_fn = staticmethod(ss_embed)
    detect_fn = staticmethod(ss_detect)


class DctScheme(_SpreadLike):
    name = "dct"
    params_type = DctParams
    embed_fn = staticmethod(dct_embed)
    detect_fn = staticmethod(dct_detect)


class WmsScheme(_SpreadLike):
    name = "wms"
    params_type = WmsParams
    embed_fn = staticmethod(wms_embed)
    detect_fn = staticmethod(wms_detect)


class SvdScheme(Scheme):
    name = "svd"
    params_type = SvdParams

    def embed(self, clip, payload, key):
        x = as_pm1(payload)
        return EmbedRecord(svd_embed(clip, x, key, self.params), x, {})

    def detect(self, clip, key, record):
        r = svd_extract(clip, key, self.params, record.truth.size)
        return Outcome(ber(record.truth, r.bits), None, r)


class DwtScheme(Scheme):
    """The payload is packed into the grayscale watermark image."""

    name = "dwt"
    params_type = DwtParams

    def embed(self, clip, payload, key):
        m = len(detect_scenes(clip, self.params.scene_threshold).scenes)
        side = resolve_tile(clip.width, clip.height, self.params)
        _, p, q = split_exponents(m)
        wm = watermark_preprocess(bits_to_image(payload, side * 2 ** p, side * 2 ** q), m, side)
        return EmbedRecord(dwt_embed(clip, wm, key, self.params), as_pm1(payload), {"wm": wm})

    def detect(self, clip, key, record):
        wm = record.context["wm"]
        r = dwt_detect(clip, key, self.params, wm.scene_count, original=wm)
        return Outcome(float(np.mean(list(r.tile_ber.values()))), None, r)


class PcaScheme(Scheme):
    """Presence-only: the payload is ignored, the key is the watermark."""

    name = "pca"
    params_type = PcaParams

    def embed(self, clip, payload, key):
        return EmbedRecord(pca_embed(clip, key, self.params), as_pm1(payload), {})

    def detect(self, clip, key, record):
        r = pca_detect(clip, key, self.params)
        return Outcome(None, r.present, r)


REGISTRY: Dict[str, type] = {s.name: s for s in (SsScheme, WmsScheme, DctScheme, DwtScheme, PcaScheme, SvdScheme)}
PRESENCE_SCHEMES: Tuple[str, ...] = ("ss", "wms", "dct", "pca")


def get_scheme(name: str, **overrides) -> Scheme:
    try:
        cls = REGISTRY[name.lower()]
    except KeyError:
        raise UsageError(f"unknown scheme {name!r}; choose from {', '.join(sorted(REGISTRY))}") from None
    return cls().with_overrides(**overrides)
