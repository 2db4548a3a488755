import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vidmark.errors import CapacityError, UsageError
from vidmark.media import psnr
from vidmark.prng import WatermarkKey, derive_keys, pn_sequence
from vidmark.schemes.wms import (
    WmsParams,
    cdma_encode,
    channel_bits,
    detect_template,
    embed_template,
    layout,
    offset_scores,
    temporal_sigma,
    wms_detect,
    wms_embed,
)

from conftest import gray_clip


def payload(n, seed=0):
    return np.random.default_rng(seed).choice([-1, 1], n).astype(np.int8)


class TestSigma:
    def test_constant(self):
        assert temporal_sigma(np.full((4, 2, 2), 7.0), 1, 1) == 0.0

    def test_alternating(self):
        seg = np.zeros((6, 1, 1))
        seg[::2], seg[1::2] = 100, 120
        assert temporal_sigma(seg, 0, 0) == pytest.approx(10.0)

    def test_single_frame(self):
        with pytest.raises(UsageError):
            temporal_sigma(np.zeros((1, 2, 2)), 0, 0)


class TestCdma:
    def test_single_bit(self, key):
        p = WmsParams(N=8, M=8, template_count=3)
        c = pn_sequence(key, "cdma-chips", 8).chips
        assert np.array_equal(cdma_encode([1], key, p), c)

    def test_two_bits(self, key):
        p = WmsParams(N=8, M=4, template_count=3)
        c = pn_sequence(key, "cdma-chips", 8).chips
        assert np.array_equal(cdma_encode([1, -1], key, p), np.concatenate([c[:4], -c[4:]]))

    def test_mismatch(self, key):
        with pytest.raises(UsageError):
            cdma_encode([1, 1, 1], key, WmsParams())

    def test_channel_capacity(self):
        assert WmsParams().capacity == 64
        assert channel_bits([1, -1], WmsParams()).tolist() == [1, -1] * 32
        with pytest.raises(CapacityError):
            channel_bits(np.ones(65), WmsParams())


class TestLayout:
    @given(st.integers(0, 2 ** 64 - 1))
    def test_orthogonal_and_disjoint(self, seed):
        lay = layout(WatermarkKey(seed), WmsParams(), 64, 64)
        seqs = np.array(lay.templates + lay.sync)
        assert np.array_equal(seqs @ seqs.T, 32 * np.eye(len(seqs)))
        allpos = lay.template_pos + lay.payload_pos + [p for s in lay.sync_pos for p in s]
        assert len(set(allpos)) == len(allpos)

    def test_params(self):
        with pytest.raises(UsageError):
            WmsParams(N=24)
        with pytest.raises(UsageError):
            WmsParams(M=5)


class TestTemplate:
    def test_zero_beta(self, key):
        seg = np.random.default_rng(0).uniform(0, 255, (32, 16, 16))
        assert np.array_equal(embed_template(seg, key, WmsParams(beta=0)), seg)

    def test_constant_segment(self, key):
        seg = np.full((32, 16, 16), 128.0)
        out = embed_template(seg, key, WmsParams())
        lay = layout(key, WmsParams(), 16, 16)
        for (x, y), v in zip(lay.template_pos, lay.templates):
            assert np.array_equal(out[:, y, x], 128 + v)

    def test_perturbation_bound(self, key):
        seg = np.random.default_rng(1).uniform(0, 255, (32, 16, 16))
        out = embed_template(seg, key, WmsParams(beta=1))
        assert np.abs(out - seg).max() <= seg.std(axis=0).max() + 1 + 0.5

    def test_self_consistency(self, key):
        seg = np.random.default_rng(2).uniform(60, 190, (32, 32, 32))
        det = detect_template(embed_template(seg, key, WmsParams(beta=2)), key, WmsParams(beta=2))
        lay = layout(key, WmsParams(), 32, 32)
        assert det.found and det.start_offset == 0 and det.stage == "exact"
        assert sorted((x, y) for x, y, _ in det.positions) == sorted(lay.template_pos)
        assert json.loads(det.to_json())["found"] is True

    def test_circular_shift(self, key):
        seg = np.full((32, 16, 16), 128.0)
        out = np.roll(embed_template(seg, key, WmsParams()), 3, axis=0)
        det = detect_template(out, key, WmsParams())
        assert det.found and det.start_offset == 3

    def test_noise_false_alarms(self):
        seg = np.random.default_rng(3).uniform(0, 255, (32, 32, 32))
        found = sum(detect_template(seg, k).found for k in derive_keys(4, 100))
        assert found <= 1

    def test_offset_scores_peak(self):
        v = pn_sequence(WatermarkKey(1), "x", 32).chips.astype(float)
        sc = offset_scores(np.roll(v - v.mean(), 5)[None], v)[0]
        assert int(np.argmax(sc)) == 5 and sc[5] == pytest.approx(1.0)


class TestClip:
    def test_constant_cover(self, flat, key):
        bits = payload(16)
        r = wms_detect(wms_embed(flat, bits, key), key, WmsParams(), 16, bits)
        assert r.ber_vs == 0.0 and r.present

    def test_zero_beta_identity(self, flat, key):
        out = wms_embed(flat, np.ones(8), key, WmsParams(beta=0))
        assert np.array_equal(out.array(), flat.array())

    def test_segments_and_psnr(self, cover, key):
        marked = wms_embed(cover, payload(16), key)
        r = wms_detect(marked, key, WmsParams(), 16)
        assert r.info["segments"] == [(0, 32), (32, 64)]
        assert psnr(cover, marked).mean_psnr >= 40

    def test_segment_drop(self, flat, key):
        bits = payload(16)
        marked = wms_embed(flat, bits, key)
        survivor = marked.with_frames(marked.frames[32:])
        r = wms_detect(survivor, key, WmsParams(), 16, bits)
        assert r.ber_vs == 0.0 and len(r.info["segments"]) == 1

    def test_wrong_keys(self, flat, key):
        marked = wms_embed(flat, payload(16), key)
        hits = sum(wms_detect(marked, k, WmsParams(), 16).present for k in derive_keys(8, 100))
        assert hits <= 1

    def test_translation_recovered(self, flat, key):
        bits = payload(16)
        marked = wms_embed(flat, bits, key)
        moved = gray_clip(np.roll(marked.array()[:, 0], 2, axis=2))
        r = wms_detect(moved, key, WmsParams(), 16, bits)
        assert r.ber_vs == 0.0 and r.info["templates"][0].stage == "search"

    def test_unmarked_not_found(self, cover, key):
        r = wms_detect(cover, key, WmsParams(), 16)
        assert not r.present and r.bits.size == 0
