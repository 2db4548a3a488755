"""Scheme x attack robustness matrix and its JSON/CSV reports."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .attacks import AttackSpec, apply_attack
from .errors import WatermarkError
from .media import VideoClip, psnr
from .metrics import ber  # noqa: F401  re-exported as part of the bench API
from .prng import WatermarkKey
from .schemes import Scheme, get_scheme

# harness policy for the qualitative "robust" column
ROBUST_MAX_BER = 0.2
ROBUST_MIN_DETECT = 0.8

CSV_COLUMNS = ("scheme", "attack", "params", "ber", "detect_rate", "psnr_embed", "psnr_attack")


class ReportFormat(str, enum.Enum):
    JSON = "JSON"
    CSV = "CSV"


@dataclass
class ReportRow:
    scheme: str
    attack: str
    params: Dict[str, Any]
    ber: Optional[float] = None
    detect_rate: Optional[float] = None
    psnr_embed: Optional[float] = None
    psnr_attack: Optional[float] = None
    robust: Optional[bool] = None
    skipped: Optional[str] = None


@dataclass
class RobustnessReport:
    rows: List[ReportRow] = field(default_factory=list)
    clip_id: str = ""
    key_count: int = 0
    timestamp: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "key_count": self.key_count,
            "timestamp": self.timestamp,
            "rows": [{k: _encode(v) for k, v in asdict(r).items()} for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RobustnessReport":
        rows = [ReportRow(**{k: _decode(v) for k, v in r.items()}) for r in d.get("rows", [])]
        return cls(rows, d.get("clip_id", ""), int(d.get("key_count", 0)), d.get("timestamp", ""))

    def row(self, scheme: str, attack: str) -> ReportRow:
        for r in self.rows:
            if r.scheme == scheme and r.attack == attack:
                return r
        raise KeyError((scheme, attack))


def _encode(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return round(v, 6)
    return v


def _decode(v):
    if v in ("inf", "-inf"):
        return float(v)
    return v


def clip_id(clip: VideoClip) -> str:
    digest = hashlib.blake2b(clip.array().tobytes(), digest_size=8).hexdigest()
    return f"{clip.label or 'clip'}:{digest}"


def report_timestamp() -> str:
    """UTC time from SOURCE_DATE_EPOCH (0 when unset) so reports are reproducible."""
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _mean(values: Sequence[float]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    if all(math.isinf(v) for v in vals):
        return float("inf")
    finite = [v for v in vals if not math.isinf(v)]
    return float(np.mean(finite))


def _verdict(ber_value: Optional[float], detect_rate: Optional[float]) -> Optional[bool]:
    if ber_value is None and detect_rate is None:
        return None
    return bool((ber_value is not None and ber_value <= ROBUST_MAX_BER) or (detect_rate is not None and detect_rate >= ROBUST_MIN_DETECT))


def _unique_attacks(attacks: Sequence[AttackSpec]) -> List[AttackSpec]:
    seen, out = set(), []
    for a in attacks:
        if a.label not in seen:
            seen.add(a.label)
            out.append(a)
    return out


def _scheme_rows(scheme: Scheme, clip: VideoClip, attacks: Sequence[AttackSpec], keys: Sequence[WatermarkKey], payload) -> List[ReportRow]:
    cells = {a.label: {"ber": [], "present": [], "pe": [], "pa": [], "error": None} for a in attacks}
    for key in keys:
        try:
            record = scheme.embed(clip, payload, key)
        except WatermarkError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            return [ReportRow(scheme.name, a.label, a.to_dict(), skipped=reason) for a in attacks]
        pe = psnr(clip, record.clip).mean_psnr
        for a in attacks:
            cell = cells[a.label]
            if cell["error"]:
                continue
            try:
                attacked = apply_attack(record.clip, a)
                outcome = scheme.detect(attacked, key, record)
            except WatermarkError as exc:
                cell["error"] = f"{type(exc).__name__}: {exc}"
                continue
            cell["pe"].append(pe)
            cell["pa"].append(psnr(record.clip, attacked).mean_psnr if len(attacked) == len(record.clip) else None)
            cell["ber"].append(outcome.ber)
            cell["present"].append(outcome.present)
    rows = []
    for a in attacks:
        cell = cells[a.label]
        if cell["error"]:
            rows.append(ReportRow(scheme.name, a.label, a.to_dict(), skipped=cell["error"]))
            continue
        b = _mean(cell["ber"])
        flags = [p for p in cell["present"] if p is not None]
        rate = float(np.mean(flags)) if flags else None
        rows.append(ReportRow(scheme.name, a.label, a.to_dict(), b, rate, _mean(cell["pe"]), _mean(cell["pa"]), _verdict(b, rate)))
    return rows


def run_matrix(clip: VideoClip, schemes: Sequence, attacks: Sequence[AttackSpec], keys: Sequence[WatermarkKey], payload) -> RobustnessReport:
    """Embed, attack and detect every (scheme, attack, key); means over keys.

    ``schemes`` holds scheme names or :class:`Scheme` adapters. A failing cell
    is recorded as skipped with its reason and leaves the other cells alone.
    """
    attacks = _unique_attacks(attacks)
    rows: List[ReportRow] = []
    for s in schemes:
        scheme = get_scheme(s) if isinstance(s, str) else s
        rows += _scheme_rows(scheme, clip, attacks, keys, payload)
    rows.sort(key=lambda r: (r.scheme, r.attack))
    return RobustnessReport(rows, clip_id(clip), len(keys), report_timestamp())


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return str(v)


def render_report(report: RobustnessReport, fmt=ReportFormat.JSON) -> bytes:
    fmt = fmt if isinstance(fmt, ReportFormat) else ReportFormat(str(fmt).upper())
    if fmt is ReportFormat.JSON:
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([r.scheme, r.attack, json.dumps(r.params, sort_keys=True), _cell(r.ber), _cell(r.detect_rate), _cell(r.psnr_embed), _cell(r.psnr_attack)])
    return buf.getvalue().encode()


def parse_report(data: bytes) -> RobustnessReport:
    return RobustnessReport.from_dict(json.loads(data.decode()))
