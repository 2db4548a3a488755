"""Command line entry point: ``vidmark <subcommand> ...``.

Exit codes: 0 success, 1 numeric failure, 2 usage error, 3 capacity error,
4 format or dimension error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from .attacks import AttackSpec, apply_attack, load_attacks
from .bench import ReportFormat, render_report, run_matrix
from .errors import UsageError, WatermarkError
from .media import ColorSpace, VideoClip, convert_clip, load_clip, psnr, save_clip
from .metrics import ber
from .prng import WatermarkKey, derive_keys, pn_sequence
from .scenes import DEFAULT_SCENE_THRESHOLD, detect_scenes
from .schemes import REGISTRY, bits_to_image, get_scheme
from .schemes.dct_ss import dct_detect
from .schemes.dwt_scene import dwt_detect, dwt_embed, resolve_tile, split_exponents, watermark_preprocess
from .schemes.pca import pca_detect, pca_embed
from .schemes.ss import ss_detect
from .schemes.svd_bits import svd_extract
from .schemes.wms import wms_detect
from .synthetic import acceptance_clip

BUNDLED = "bundled"


def parse_payload(text: str) -> np.ndarray:
    """A payload is written as a string of 0/1 characters, e.g. ``1011``."""
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise UsageError(f"payload must be a non-empty string of 0/1 characters, got {text!r}")
    return np.array([1 if c == "1" else -1 for c in text], dtype=np.int8)


def _bits_text(bits) -> str:
    return "".join("1" if b > 0 else "0" for b in np.asarray(bits).ravel())


def _read_clip(source: str) -> VideoClip:
    if source == BUNDLED:
        return acceptance_clip()
    return load_clip(source)


def _scheme_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scheme parameters (defaults come from the scheme)")
    g.add_argument("--chip-rate", "--cr", type=int, dest="chip_rate")
    g.add_argument("--amplitude", type=float, help="ss/dct strength (--beta is accepted as an alias)")
    g.add_argument("--band", type=_band, help="dct: zig-zag range lo..hi")
    g.add_argument("--highpass", choices=["LAPLACIAN3x3", "TEMPORAL_DIFF"])
    g.add_argument("--N", type=int, dest="N", help="WMS length in frames")
    g.add_argument("--M", type=int, dest="M", help="wms: chips per bit; pca: watermark length")
    g.add_argument("--beta", type=float)
    g.add_argument("--positions", type=int, dest="payload_positions")
    g.add_argument("--scene-threshold", type=float, dest="scene_threshold")
    g.add_argument("--window", type=int)
    g.add_argument("--tile", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--matrix", choices=["S", "U", "V"], dest="matrix_choice")
    g.add_argument("--bits-per-frame", type=int, dest="per_frame_bits")


_OVERRIDES = ("chip_rate", "amplitude", "band", "highpass", "N", "M", "beta", "payload_positions", "scene_threshold", "window", "tile", "alpha", "matrix_choice", "per_frame_bits")


def _band(text: str):
    try:
        lo, hi = (int(t) for t in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like lo..hi, got {text!r}") from None
    return tuple(range(lo, hi + 1))


def _scheme(args):
    overrides = {k: getattr(args, k) for k in _OVERRIDES}
    if args.scheme.lower() in ("ss", "dct") and overrides["amplitude"] is None:
        overrides["amplitude"] = overrides.pop("beta")
    return get_scheme(args.scheme, **overrides)


def _prepare(clip: VideoClip, scheme_name: str) -> VideoClip:
    if scheme_name == "pca" and clip.colorspace is not ColorSpace.RGB8:
        return convert_clip(clip, ColorSpace.RGB8)
    return clip


def cmd_embed(args) -> int:
    scheme = _scheme(args)
    key = WatermarkKey.from_hex(args.key)
    clip = _prepare(_read_clip(args.inp), scheme.name)
    if scheme.name == "dwt":
        params = scheme.params
        m = len(detect_scenes(clip, params.scene_threshold).scenes)
        side = resolve_tile(clip.width, clip.height, params)
        if args.watermark:
            image = np.asarray(Image.open(args.watermark).convert("L"))
        else:
            _, p, q = split_exponents(m)
            image = bits_to_image(parse_payload(args.payload or "1"), side * 2 ** p, side * 2 ** q)
        out = dwt_embed(clip, watermark_preprocess(image, m, side), key, params)
    elif scheme.name == "pca":
        out = pca_embed(clip, key, scheme.params)
    else:
        if args.payload is None:
            raise UsageError(f"--payload is required for scheme {scheme.name}")
        out = scheme.embed(clip, parse_payload(args.payload), key).clip
    save_clip(out, args.out)
    print(json.dumps({"scheme": scheme.name, "frames": len(out), "psnr": _num(psnr(clip, out).mean_psnr)}, sort_keys=True))
    return 0


def _num(v: float):
    return "inf" if v == float("inf") else round(v, 4)


def cmd_extract(args) -> int:
    scheme = _scheme(args)
    key = WatermarkKey.from_hex(args.key)
    clip = _prepare(_read_clip(args.inp), scheme.name)
    out = {"scheme": scheme.name}
    if scheme.name == "dwt":
        m = args.scenes or len(detect_scenes(clip, scheme.params.scene_threshold).scenes)
        r = dwt_detect(clip, key, scheme.params, m)
        out.update(scenes=len(r.segmentation.scenes), sync_warning=r.sync_warning)
        if args.out:
            Image.fromarray(r.image, "L").save(args.out)
            out["image"] = str(args.out)
    elif scheme.name == "pca":
        r = pca_detect(clip, key, scheme.params)
        out.update(present=r.present, mean_cv=round(r.info["mean_cv"], 6) if "mean_cv" in r.info else None, threshold=round(r.threshold, 6))
    elif scheme.name == "svd":
        nbits = args.bits or scheme.params.per_frame_bits
        r = svd_extract(clip, key, scheme.params, nbits)
        out.update(bits=_bits_text(2 * r.bits.astype(int) - 1), per_scene=[_bits_text(2 * s.astype(int) - 1) for s in r.per_scene])
        if args.payload:
            out["ber"] = ber(parse_payload(args.payload)[:nbits], 2 * r.bits.astype(int) - 1)
    else:
        nbits = args.bits or (len(args.payload) if args.payload else 1)
        truth = parse_payload(args.payload) if args.payload else None
        detector = {"ss": ss_detect, "dct": dct_detect, "wms": wms_detect}[scheme.name]
        r = detector(clip, key, scheme.params, nbits, truth)
        out.update(bits=_bits_text(r.bits), present=r.present, ber=r.ber_vs)
        if scheme.name == "wms":
            out["templates"] = [json.loads(t.to_json()) for t in r.info["templates"]]
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_attack(args) -> int:
    specs = load_attacks(Path(args.spec).read_text())
    clip = _read_clip(args.inp)
    for spec in specs:
        clip = apply_attack(clip, spec)
    save_clip(clip, args.out)
    print(json.dumps({"attacks": [s.label for s in specs], "frames": len(clip)}, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    names = [s.strip() for s in args.schemes.split(",") if s.strip()]
    schemes = [get_scheme(n) for n in names]
    attacks = load_attacks(Path(args.attacks).read_text()) if args.attacks else [AttackSpec("IDENTITY")]
    if args.keys < 1:
        raise UsageError("--keys must be >= 1")
    keys = derive_keys(args.seed, args.keys)
    payload = pn_sequence(WatermarkKey(args.seed), "bench-payload", args.payload_bits).chips
    clip = _read_clip(args.inp)
    if "pca" in names and clip.colorspace is not ColorSpace.RGB8:
        clip = convert_clip(clip, ColorSpace.RGB8)
    report = run_matrix(clip, schemes, attacks, keys, payload)
    fmt = args.format or ("CSV" if str(args.report).lower().endswith(".csv") else "JSON")
    data = render_report(report, ReportFormat(fmt.upper()))
    if args.report:
        Path(args.report).write_bytes(data)
    else:
        sys.stdout.write(data.decode())
    return 0


def cmd_psnr(args) -> int:
    ref, test = _read_clip(args.ref), _read_clip(args.test)
    if test.colorspace is not ref.colorspace:
        test = convert_clip(test, ref.colorspace)
    score = psnr(ref, test)
    print(json.dumps({"mean_psnr": _num(score.mean_psnr), "mean_mse": round(float(np.mean(score.mse)), 6), "per_frame": [_num(v) for v in score.per_frame_psnr]}, sort_keys=True))
    return 0


def cmd_scenes(args) -> int:
    print(detect_scenes(_read_clip(args.inp), args.threshold).to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vidmark", description="Video watermark embedding, attack and robustness bench.")
    sub = parser.add_subparsers(dest="command", required=True)
    schemes = sorted(REGISTRY)

    p = sub.add_parser("embed", help="embed a watermark")
    p.add_argument("--scheme", required=True, help=f"one of {', '.join(schemes)}")
    p.add_argument("--key", required=True, help="64-bit key as hex")
    p.add_argument("--payload", help="payload bits as a 0/1 string")
    p.add_argument("--watermark", help="dwt: grayscale watermark image")
    p.add_argument("--in", dest="inp", required=True, help=f"Y4M file, PNG directory or '{BUNDLED}'")
    p.add_argument("--out", required=True)
    _scheme_options(p)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("extract", help="detect / extract a watermark")
    p.add_argument("--scheme", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--payload", help="expected payload; reports BER when given")
    p.add_argument("--bits", type=int, help="number of payload bits to read")
    p.add_argument("--scenes", type=int, help="dwt: scene count at embed time")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", help="dwt: write the recovered watermark image here")
    _scheme_options(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("attack", help="apply attacks from a JSON spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("bench", help="run the scheme x attack robustness matrix")
    p.add_argument("--schemes", required=True, help="comma separated scheme names")
    p.add_argument("--attacks", help="JSON file with one attack spec or a list")
    p.add_argument("--keys", type=int, default=5, help="number of keys derived from --seed")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=0, help="master seed")
    p.add_argument("--payload-bits", type=int, default=4)
    p.add_argument("--in", dest="inp", default=BUNDLED)
    p.add_argument("--report", help="output path (.csv for CSV, JSON otherwise); stdout when absent")
    p.add_argument("--format", choices=["JSON", "CSV", "json", "csv"])
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("psnr", help="PSNR between two clips")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(fn=cmd_psnr)

    p = sub.add_parser("scenes", help="scene segmentation as JSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_SCENE_THRESHOLD)
    p.set_defaults(fn=cmd_scenes)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except WatermarkError as exc:
        print(f"vidmark: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"vidmark: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
