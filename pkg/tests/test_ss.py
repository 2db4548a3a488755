import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vidmark.errors import CapacityError, DimensionError, UsageError
from vidmark.media import VideoClip
from vidmark.prng import WatermarkKey, derive_keys, pn_sequence
from vidmark.schemes.ss import HighPass, SpreadParams, highpass, line_scan, line_unscan, spread_bits, ss_detect, ss_embed

from conftest import gray_clip


def payload(n, seed=0):
    return np.random.default_rng(seed).choice([-1, 1], n).astype(np.int8)


class TestLineScan:
    def test_raster(self):
        assert line_scan(gray_clip([[[1, 2], [3, 4]]])).tolist() == [1, 2, 3, 4]

    @given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 3), st.integers(1, 5), st.integers(1, 5))))
    def test_inverse(self, arr):
        clip = gray_clip(arr)
        assert np.array_equal(line_unscan(line_scan(clip), arr.shape).array(), clip.array())

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            line_unscan(np.zeros(5), (1, 2, 2))


class TestSpread:
    def test_examples(self):
        assert spread_bits([1], 3).tolist() == [1, 1, 1]
        assert spread_bits([1, -1], 2).tolist() == [1, 1, -1, -1]

    def test_zero_bit(self):
        with pytest.raises(UsageError):
            spread_bits([1, 0], 2)

    @given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=20), st.integers(1, 9))
    def test_definition(self, bits, cr):
        y = spread_bits(bits, cr)
        assert y.size == len(bits) * cr
        assert all(y[i] == bits[i // cr] for i in range(y.size))


class TestEmbed:
    def test_zero_amplitude(self, cover, key):
        out = ss_embed(cover, payload(8), key, SpreadParams(amplitude=0))
        assert np.array_equal(out.array(), cover.array())

    def test_constant_cover_pattern(self, key):
        clip = gray_clip(np.full((2, 16, 16), 128))
        bits = payload(4)
        out = ss_embed(clip, bits, key, SpreadParams(chip_rate=64, amplitude=2))
        v = line_scan(out).astype(int)
        expect = 128 + 2 * spread_bits(bits, 64).astype(int) * pn_sequence(key, "ss", 256).chips
        assert np.array_equal(v[:256], expect)
        assert set(np.unique(v[:256])) == {126, 130}
        assert np.all(v[256:] == 128)

    def test_capacity(self, key):
        clip = gray_clip(np.zeros((1, 4, 4)))
        with pytest.raises(CapacityError):
            ss_embed(clip, [1], key, SpreadParams(chip_rate=17))

    @given(st.floats(0, 6), st.integers(0, 2 ** 32))
    def test_perturbation_bound(self, beta, seed):
        rng = np.random.default_rng(seed)
        clip = gray_clip(rng.integers(0, 256, (1, 8, 8)))
        out = ss_embed(clip, payload(2, seed), WatermarkKey(seed), SpreadParams(chip_rate=32, amplitude=beta))
        assert np.abs(out.array().astype(int) - clip.array().astype(int)).max() <= np.ceil(beta)

    def test_params(self):
        with pytest.raises(UsageError):
            SpreadParams(chip_rate=0)


class TestDetect:
    def test_flat_round_trip(self, flat, keys10):
        for k in keys10[:3]:
            bits = payload(4, k.seed % 1000)
            r = ss_detect(ss_embed(flat, bits, k), k, SpreadParams(), 4, bits)
            assert r.ber_vs == 0.0 and r.present
            assert np.array_equal(r.bits, np.sign(r.correlations))

    def test_natural_round_trip(self, cover, key):
        bits = payload(16)
        r = ss_detect(ss_embed(cover, bits, key), key, SpreadParams(), 16, bits)
        assert r.ber_vs == 0.0 and r.present

    def test_all_zero_signal(self, flat, key):
        r = ss_detect(flat, key, SpreadParams(), 4)
        assert r.bits.tolist() == [1, 1, 1, 1] and not r.present

    def test_noise_false_positives(self):
        rng = np.random.default_rng(5)
        clip = gray_clip(rng.integers(0, 256, (1, 128, 128)))
        hits = sum(ss_detect(clip, k, SpreadParams(), 4).present for k in derive_keys(77, 200))
        assert hits / 200 <= 0.01

    def test_temporal_filter(self, key):
        rng = np.random.default_rng(2)
        base = np.repeat(rng.integers(40, 200, (1, 32, 32)), 8, axis=0)
        clip = gray_clip(base)
        bits = payload(2)
        params = SpreadParams(chip_rate=2048, highpass=HighPass.TEMPORAL_DIFF)
        r = ss_detect(ss_embed(clip, bits, key, params), key, params, 2, bits)
        assert r.ber_vs == 0.0

    def test_highpass_leading_frames(self, cover):
        full = highpass(cover, HighPass.TEMPORAL_DIFF)
        assert np.array_equal(highpass(cover, HighPass.TEMPORAL_DIFF, 3), full[:3])

    def test_capacity(self, key):
        with pytest.raises(CapacityError):
            ss_detect(gray_clip(np.zeros((1, 4, 4))), key, SpreadParams(chip_rate=8), 3)
