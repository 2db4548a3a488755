import math

import numpy as np
import pytest
import scipy.fft
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vidmark.errors import NumericError, UsageError
from vidmark.transforms import (
    block_dct,
    block_idct,
    dct2,
    dwt2,
    idct2,
    idwt2,
    pca_fit,
    pca_project,
    pca_reconstruct,
    svd,
    symmetric_eigen,
    zigzag,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def naive_dct2(x):
    m, n = x.shape
    out = np.zeros((m, n))
    for u in range(m):
        for v in range(n):
            cu = math.sqrt((1 if u == 0 else 2) / m)
            cv = math.sqrt((1 if v == 0 else 2) / n)
            s = 0.0
            for i in range(m):
                for j in range(n):
                    s += x[i, j] * math.cos(math.pi * (2 * i + 1) * u / (2 * m)) * math.cos(math.pi * (2 * j + 1) * v / (2 * n))
            out[u, v] = cu * cv * s
    return out


class TestDct:
    def test_constant_block(self):
        c = dct2(np.full((8, 8), 3.0))
        assert c[0, 0] == pytest.approx(24.0, abs=1e-12)
        c[0, 0] = 0
        assert np.abs(c).max() < 1e-12

    def test_zero_block(self):
        assert not dct2(np.zeros((8, 8))).any()

    def test_naive_oracle(self):
        x = np.random.default_rng(0).normal(size=(8, 8))
        assert np.abs(dct2(x) - naive_dct2(x)).max() < 1e-10

    @given(hnp.arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=finite))
    def test_scipy_oracle_and_round_trip(self, x):
        c = dct2(x)
        assert np.allclose(c, scipy.fft.dctn(x, norm="ortho"), atol=1e-9)
        assert np.abs(idct2(c) - x).max() <= 1e-9
        e = (x ** 2).sum()
        assert abs((c ** 2).sum() - e) <= 1e-6 * max(e, 1.0)

    def test_empty(self):
        with pytest.raises(UsageError):
            dct2(np.zeros((0, 8)))

    def test_block_round_trip(self):
        x = np.random.default_rng(1).normal(size=(16, 24))
        c = block_dct(x)
        assert c.shape == (2, 3, 8, 8)
        assert np.allclose(c[1, 2], dct2(x[8:16, 16:24]))
        assert np.abs(block_idct(c) - x).max() < 1e-9

    def test_zigzag_prefix(self):
        assert zigzag(8)[:6] == ((0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2))
        assert len(set(zigzag(8))) == 64


class TestDwt:
    def test_ones(self):
        p = dwt2(np.ones((2, 2)), 1)
        assert p.ll[0, 0] == pytest.approx(2.0)
        assert all(np.allclose(p.band(f"{b}1"), 0) for b in ("LH", "HL", "HH"))

    def test_too_small(self):
        with pytest.raises(UsageError):
            dwt2(np.zeros((8, 8)), 4)

    def test_orientation(self):
        # rows differ, columns constant: detail lives in LH (high-pass along y)
        x = np.repeat(np.array([[0.0], [1.0]]), 2, axis=1)
        p = dwt2(x, 1)
        assert abs(p.band("LH1")[0, 0]) > 0 and p.band("HL1")[0, 0] == pytest.approx(0.0)

    def test_four_levels(self):
        x = np.random.default_rng(2).normal(size=(64, 64))
        p = dwt2(x, 4)
        assert p.band("LH3").shape == (8, 8) and p.ll.shape == (4, 4)
        assert np.abs(idwt2(p) - x).max() <= 1e-9

    @given(
        hnp.arrays(np.float64, st.tuples(st.integers(4, 21), st.integers(4, 21)), elements=finite),
        st.integers(1, 2),
    )
    def test_round_trip_any_shape(self, x, levels):
        p = dwt2(x, levels)
        assert np.abs(idwt2(p) - x).max() <= 1e-9

    @given(hnp.arrays(np.float64, (16, 16), elements=finite))
    def test_energy(self, x):
        p = dwt2(x, 3)
        e = (p.ll ** 2).sum() + sum((b ** 2).sum() for lvl in p.bands for b in lvl.values())
        assert abs(e - (x ** 2).sum()) <= 1e-6 * max((x ** 2).sum(), 1.0)


def check_factors(a, f):
    n = a.shape[0]
    assert np.all(np.diff(f.S) <= 0) and np.all(f.S >= 0)
    assert np.abs(f.U.T @ f.U - np.eye(n)).max() <= 1e-9
    assert np.abs(f.V.T @ f.V - np.eye(n)).max() <= 1e-9
    assert np.abs(f.reconstruct() - a).max() <= 1e-8 * max(1.0, np.abs(a).max())


class TestSvd:
    def test_identity(self):
        assert np.allclose(svd(np.eye(4)).S, 1.0)

    def test_diag(self):
        f = svd(np.diag([1.0, 3.0]))
        assert np.allclose(f.S, [3, 1])
        assert np.allclose(np.abs(f.U), [[0, 1], [1, 0]]) and np.allclose(np.abs(f.V), [[0, 1], [1, 0]])

    def test_eigen_oracle(self):
        a = np.random.default_rng(3).normal(size=(16, 16))
        lam = np.linalg.eigvalsh(a.T @ a)[::-1]
        f = svd(a)
        assert np.abs(f.S - np.sqrt(np.clip(lam, 0, None))).max() <= 1e-8
        check_factors(a, f)

    @given(hnp.arrays(np.float64, st.integers(1, 9).map(lambda n: (n, n)), elements=finite))
    def test_invariants(self, a):
        f = svd(a)
        check_factors(a, f)
        assert np.allclose(f.S, np.linalg.svd(a, compute_uv=False), atol=1e-8 * max(1.0, np.abs(a).max()))

    def test_rank_deficient(self):
        a = np.outer([1.0, 2, 3, 4], [1.0, 0, -1, 2])
        check_factors(a, svd(a))

    def test_values_only(self):
        assert np.allclose(svd(np.diag([2.0, 5.0]), compute_uv=False).S, [5, 2])

    def test_errors(self):
        with pytest.raises(UsageError):
            svd(np.zeros((2, 3)))
        with pytest.raises(NumericError):
            svd(np.array([[np.nan, 0], [0, 1]]))


class TestPca:
    def test_hand_example(self):
        m = pca_fit([[1, 1], [-1, -1]])
        assert np.allclose(m.eigenvalues, [4, 0])
        assert np.allclose(m.basis[:, 0], [1 / math.sqrt(2)] * 2)

    def test_degenerate(self):
        m = pca_fit([[2.0, 5.0]] * 4)
        assert np.allclose(m.eigenvalues, 0)
        assert np.allclose(pca_project(m, [2.0, 5.0]), 0)

    def test_rank_one_truncation(self):
        m = pca_fit([[1, 1], [-1, -1]]).truncated(1)
        z = np.array([[1.0, 1.0], [-1.0, -1.0]])
        assert np.abs(pca_reconstruct(m, pca_project(m, z)) - z).max() < 1e-12

    def test_errors(self):
        with pytest.raises(UsageError):
            pca_fit([[1.0, 2.0]])
        m = pca_fit([[0, 1], [1, 0], [2, 2]])
        with pytest.raises(UsageError):
            pca_project(m, [1.0, 2.0, 3.0])

    @given(hnp.arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 6)), elements=finite))
    def test_model_invariants(self, z):
        m = pca_fit(z)
        k = m.dim
        assert np.abs(m.basis.T @ m.basis - np.eye(k)).max() <= 1e-9
        assert np.all(np.diff(m.eigenvalues) <= 1e-9 * max(1.0, abs(m.eigenvalues).max()))
        assert m.eigenvalues.min() >= -1e-9 * max(1.0, m.eigenvalues.max())
        pivots = np.abs(m.basis).argmax(axis=0)
        assert np.all(m.basis[pivots, np.arange(k)] > 0)
        assert np.abs(pca_reconstruct(m, pca_project(m, z)) - z).max() <= 1e-9 * max(1.0, np.abs(z).max())

    def test_eigh_oracle(self):
        z = np.random.default_rng(4).normal(size=(50, 6))
        lam, _ = symmetric_eigen(np.cov(z.T))
        assert np.allclose(lam, np.linalg.eigvalsh(np.cov(z.T))[::-1], atol=1e-10)
