"""The eight acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line with the measured values, then asserts.
"""

import time

import numpy as np
import pytest

from vidmark.attacks import AttackSpec, apply_attack
from vidmark.bench import ReportFormat, render_report, run_matrix
from vidmark.media import psnr
from vidmark.prng import WatermarkKey, derive_keys, pn_sequence
from vidmark.scenes import detect_scenes
from vidmark.schemes import get_scheme
from vidmark.schemes.dct_ss import DctParams, dct_detect, dct_embed
from vidmark.schemes.dwt_scene import DwtParams, exchange
from vidmark.schemes.pca import calibrate_pca_threshold, pca_detect, pca_embed
from vidmark.schemes.ss import SpreadParams, ss_detect, ss_embed
from vidmark.schemes.svd_bits import get_bit7, set_bit7
from vidmark.schemes.wms import WmsParams, layout, wms_detect, wms_embed
from vidmark.transforms import dct2, dwt2, idct2, idwt2, pca_fit, pca_project, pca_reconstruct, svd

from conftest import gray_clip


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


def bits_for(key, n):
    return pn_sequence(key, "acceptance-payload", n).chips


def test_1_transform_oracles(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = {"dct": 0.0, "dwt": 0.0, "pca": 0.0, "svd": 0.0}
    for _ in range(200):
        h, w = rng.integers(1, 17, 2)
        x = rng.normal(0, 50, (h, w))
        worst["dct"] = max(worst["dct"], np.abs(idct2(dct2(x)) - x).max())
        h, w = rng.integers(16, 65, 2)
        x = rng.normal(0, 50, (h, w))
        worst["dwt"] = max(worst["dwt"], np.abs(idwt2(dwt2(x, 4)) - x).max())
        z = rng.normal(0, 10, (int(rng.integers(2, 40)), int(rng.integers(1, 10))))
        m = pca_fit(z)
        worst["pca"] = max(worst["pca"], np.abs(pca_reconstruct(m, pca_project(m, z)) - z).max())
    for _ in range(50):
        a = rng.normal(size=(16, 16))
        oracle = np.sqrt(np.clip(np.linalg.eigvalsh(a.T @ a)[::-1], 0, None))
        worst["svd"] = max(worst["svd"], np.abs(svd(a).S - oracle).max())
    elapsed = time.perf_counter() - t0
    ok = max(worst["dct"], worst["dwt"], worst["pca"]) <= 1e-9 and worst["svd"] <= 1e-8 and elapsed <= 30
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items()) + f" time={elapsed:.1f}s"
    assert report(1, ok, detail), detail


def test_2_clean_channel(report, cover, flat):
    t0 = time.perf_counter()
    keys = derive_keys(0xACCE, 20)
    worst = {}
    for name, clip in (("svd", cover), ("dwt", cover), ("ss", flat), ("wms", flat)):
        scheme = get_scheme(name)
        bers = []
        for k in keys:
            rec = scheme.embed(clip, bits_for(k, 4 if name in ("svd", "dwt") else 16), k)
            bers.append(scheme.detect(rec.clip, k, rec).ber)
        worst[name] = max(bers)
    elapsed = time.perf_counter() - t0
    ok = all(v == 0 for v in worst.values()) and elapsed <= 120
    detail = " ".join(f"{k}_max_ber={v:g}" for k, v in worst.items()) + f" time={elapsed:.1f}s"
    assert report(2, ok, detail), detail


def test_3_imperceptibility(report, cover, key):
    values = {}
    for name in ("ss", "wms", "dct", "dwt", "pca", "svd"):
        rec = get_scheme(name).embed(cover, bits_for(key, 4), key)
        values[name] = psnr(cover, rec.clip).mean_psnr
    ok = all(v >= 35 for v in values.values())
    detail = " ".join(f"{k}={v:.2f}dB" for k, v in values.items())
    assert report(3, ok, detail), detail


def test_4_false_positives(report, cover, key):
    t0 = time.perf_counter()
    wrong = derive_keys(0xBAD, 200)
    bits = bits_for(key, 16)
    rates = {}
    marked = ss_embed(cover, bits, key)
    rates["ss"] = np.mean([ss_detect(marked, k, SpreadParams(), 16).present for k in wrong])
    marked = wms_embed(cover, bits, key)
    rates["wms"] = np.mean([wms_detect(marked, k, WmsParams(), 16).present for k in wrong])
    marked = dct_embed(cover, bits, key)
    rates["dct"] = np.mean([dct_detect(marked, k, DctParams(), 16).present for k in wrong])
    marked = pca_embed(cover, key)
    params = calibrate_pca_threshold(marked)
    rates["pca"] = np.mean([pca_detect(marked, k, params).present for k in wrong])
    elapsed = time.perf_counter() - t0
    ok = all(r <= 0.01 for r in rates.values()) and elapsed <= 180
    detail = " ".join(f"{k}={v:.3f}" for k, v in rates.items()) + f" time={elapsed:.1f}s"
    assert report(4, ok, detail), detail


def _mean_ber(scheme, clip, spec, keys, nbits):
    out = []
    for k in keys:
        rec = scheme.embed(clip, bits_for(k, nbits), k)
        out.append(scheme.detect(apply_attack(rec.clip, spec), k, rec).ber)
    return float(np.mean(out))


def test_5_table_rows(report, cover, flat, keys10):
    m = {
        "dwt_drop": _mean_ber(get_scheme("dwt"), cover, AttackSpec("FRAME_DROP", {"p": 0.5}, 11), keys10, 4),
        "svd_swap": _mean_ber(get_scheme("svd"), cover, AttackSpec("FRAME_SWAP", {"p": 0.5}, 12), keys10, 4),
        "svd_avg": _mean_ber(get_scheme("svd"), cover, AttackSpec("FRAME_AVERAGE", {"w": 3}), keys10, 4),
        "ss_noise": _mean_ber(get_scheme("ss", chip_rate=4096), flat, AttackSpec("GAUSSIAN_NOISE", {"sigma": 2}, 13), keys10, 16),
        "dct_q80": _mean_ber(get_scheme("dct", chip_rate=512), cover, AttackSpec("LOSSY_COMPRESS", {"q": 80}), keys10, 16),
    }
    ok = m["dwt_drop"] <= 0.01 and m["svd_swap"] == 0 and m["svd_avg"] <= 0.1 and m["ss_noise"] <= 0.05 and m["dct_q80"] <= 0.1
    detail = " ".join(f"{k}={v:.4f}" for k, v in m.items())
    assert report(5, ok, detail), detail


def test_6_monotonicity(report, cover):
    keys = derive_keys(0x6, 10)
    sigmas = (0, 2, 5, 10)
    curves = {}
    for name in ("ss", "dct"):
        scheme = get_scheme(name)
        curves[name] = [_mean_ber(scheme, cover, AttackSpec("GAUSSIAN_NOISE", {"sigma": s}, 21), keys, 16) for s in sigmas]
    psnr_ok = True
    for seed in range(5):
        noise = [psnr(cover, apply_attack(cover, AttackSpec("GAUSSIAN_NOISE", {"sigma": s}, seed))).mean_psnr for s in (1, 2, 5, 10)]
        psnr_ok &= all(a >= b for a, b in zip(noise, noise[1:]))
    comp = [psnr(cover, apply_attack(cover, AttackSpec("LOSSY_COMPRESS", {"q": q}))).mean_psnr for q in (20, 50, 80, 95)]
    psnr_ok &= all(a <= b for a, b in zip(comp, comp[1:]))
    ber_ok = all(all(a <= b for a, b in zip(c, c[1:])) for c in curves.values())
    ok = ber_ok and psnr_ok
    detail = " ".join(f"{k}_ber={[round(v, 4) for v in c]}" for k, c in curves.items()) + f" psnr_monotone={psnr_ok}"
    assert report(6, ok, detail), detail


def test_7_determinism(report, cover, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    attacks = [AttackSpec("IDENTITY"), AttackSpec("GAUSSIAN_NOISE", {"sigma": 2}, 3), AttackSpec("FRAME_DROP", {"p": 0.25}, 4)]
    payload = pn_sequence(WatermarkKey(9), "bench-payload", 4).chips
    schemes = ["ss", "wms", "dct", "dwt", "pca", "svd"]
    out = []
    for _ in range(2):
        rep = run_matrix(cover, schemes, attacks, derive_keys(9, 2), payload)
        out.append((render_report(rep, ReportFormat.JSON), render_report(rep, ReportFormat.CSV)))
    ok = out[0] == out[1]
    rows = len(out[0][1].splitlines()) - 1
    detail = f"json_identical={out[0][0] == out[1][0]} csv_identical={out[0][1] == out[1][1]} rows={rows}"
    assert report(7, ok, detail), detail


def test_8_structural_invariants(report):
    rng = np.random.default_rng(8)
    violations = {"wms_disjoint": 0, "dwt_multiset": 0, "scene_partition": 0, "bit7": 0}
    for k in derive_keys(88, 50):
        lay = layout(k, WmsParams(), 128, 128)
        pts = lay.template_pos + lay.payload_pos + [p for s in lay.sync_pos for p in s]
        violations["wms_disjoint"] += len(pts) != len(set(pts))
    for _ in range(200):
        vec = rng.normal(0, 20, 500)
        groups = rng.permutation(500)[:400].reshape(80, 5)
        bits = rng.integers(0, 2, 80)
        out = exchange(vec, groups, bits)
        violations["dwt_multiset"] += int(not np.array_equal(np.sort(out[groups], axis=1), np.sort(vec[groups], axis=1)))
        untouched = np.setdiff1d(np.arange(500), groups)
        violations["dwt_multiset"] += int(not np.array_equal(out[untouched], vec[untouched]))
    for _ in range(50):
        arr = rng.choice([0, 80, 160, 240], size=(int(rng.integers(1, 12)), 1, 1))
        clip = gray_clip(np.broadcast_to(arr, (arr.shape[0], 8, 8)))
        seg = detect_scenes(clip, float(rng.uniform(0.05, 1.0)))
        try:
            seg.validate()
        except ValueError:
            violations["scene_partition"] += 1
    xs = rng.uniform(-1e5, 1e5, 100_000)
    want = rng.integers(0, 2, xs.size)
    for x, b in zip(xs.tolist(), want.tolist()):
        violations["bit7"] += get_bit7(set_bit7(x, b)) != b
    ok = not any(violations.values())
    detail = " ".join(f"{k}={v}" for k, v in violations.items())
    assert report(8, ok, detail), detail
