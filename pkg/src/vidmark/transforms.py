"""Numeric kernels: orthonormal DCT, multilevel Haar DWT, Jacobi SVD and PCA.

The SVD and symmetric eigensolver are Jacobi iterations compiled with numba;
they are slow compared with LAPACK but deterministic and self-contained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
from numba import njit

from .errors import DimensionError, NumericError, UsageError

# -- DCT ---------------------------------------------------------------------


@lru_cache(maxsize=32)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; its transpose is the DCT-III inverse."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    c[0] /= math.sqrt(2.0)
    c.setflags(write=False)
    return c


def _check_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise UsageError(f"expected a non-empty 2-D array, got shape {x.shape}")
    return x


def dct2(block) -> np.ndarray:
    x = _check_2d(block)
    return dct_matrix(x.shape[0]) @ x @ dct_matrix(x.shape[1]).T


def idct2(coeffs) -> np.ndarray:
    x = _check_2d(coeffs)
    return dct_matrix(x.shape[0]).T @ x @ dct_matrix(x.shape[1])


def to_blocks(plane: np.ndarray, size: int = 8) -> np.ndarray:
    """(H, W) -> (H/size, W/size, size, size); dims must be multiples of size."""
    h, w = plane.shape
    return plane.reshape(h // size, size, w // size, size).swapaxes(1, 2)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    nh, nw, s, _ = blocks.shape
    return blocks.swapaxes(1, 2).reshape(nh * s, nw * s)


def pad_to_multiple(plane: np.ndarray, size: int) -> np.ndarray:
    h, w = plane.shape
    ph, pw = (-h) % size, (-w) % size
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def block_dct(plane: np.ndarray, size: int = 8) -> np.ndarray:
    c = dct_matrix(size)
    return np.einsum("ij,abjk,lk->abil", c, to_blocks(np.asarray(plane, dtype=np.float64), size), c, optimize=True)


def block_idct(coeffs: np.ndarray) -> np.ndarray:
    c = dct_matrix(coeffs.shape[-1])
    return from_blocks(np.einsum("ji,abjk,kl->abil", c, coeffs, c, optimize=True))


@lru_cache(maxsize=8)
def zigzag(size: int = 8) -> Tuple[Tuple[int, int], ...]:
    """(row, col) pairs of a size x size block in JPEG zig-zag order."""
    order = sorted(
        ((r, c) for r in range(size) for c in range(size)),
        key=lambda rc: (rc[0] + rc[1], rc[1] if (rc[0] + rc[1]) % 2 == 0 else rc[0]),
    )
    return tuple(order)


# -- DWT ---------------------------------------------------------------------

HAAR = "HAAR"
_R2 = math.sqrt(2.0)


@dataclass
class SubbandPyramid:
    """Detail bands per level (1 = finest) plus the deepest LL band."""

    levels: int
    bands: List[Dict[str, np.ndarray]]
    ll: np.ndarray
    original_dims: Tuple[int, int]
    level_dims: List[Tuple[int, int]] = field(default_factory=list)

    def band(self, name: str) -> np.ndarray:
        """Look up e.g. ``"LH3"`` or ``"LL4"``."""
        kind, level = name[:2], int(name[2:])
        if kind == "LL":
            if level != self.levels:
                raise UsageError("only the deepest LL band is kept")
            return self.ll
        return self.bands[level - 1][kind]


def _haar_axis(x: np.ndarray, axis: int):
    if x.shape[axis] % 2:
        last = np.take(x, [-1], axis=axis)
        x = np.concatenate([x, last], axis=axis)
    a = np.take(x, np.arange(0, x.shape[axis], 2), axis=axis)
    b = np.take(x, np.arange(1, x.shape[axis], 2), axis=axis)
    return (a + b) / _R2, (a - b) / _R2


def _ihaar_axis(lo: np.ndarray, hi: np.ndarray, axis: int, n: int):
    a = (lo + hi) / _R2
    b = (lo - hi) / _R2
    shape = list(lo.shape)
    shape[axis] *= 2
    out = np.empty(shape)
    idx = [slice(None)] * 2
    idx[axis] = slice(0, None, 2)
    out[tuple(idx)] = a
    idx[axis] = slice(1, None, 2)
    out[tuple(idx)] = b
    idx[axis] = slice(0, n)
    return out[tuple(idx)]


def dwt2(frame, levels: int, wavelet: str = HAAR) -> SubbandPyramid:
    """Separable orthonormal Haar analysis.

    ``LH`` is low-pass along x and high-pass along y; ``HL`` the converse.
    Odd lengths are extended by repeating the last sample.
    """
    if wavelet != HAAR:
        raise UsageError(f"unsupported wavelet {wavelet!r}")
    x = _check_2d(frame)
    if levels < 1:
        raise UsageError("levels must be >= 1")
    if min(x.shape) < 2 ** levels:
        raise UsageError(f"{x.shape[1]}x{x.shape[0]} frame too small for {levels} levels")
    bands, dims = [], []
    for _ in range(levels):
        dims.append(x.shape)
        lo, hi = _haar_axis(x, 1)
        ll, lh = _haar_axis(lo, 0)
        hl, hh = _haar_axis(hi, 0)
        bands.append({"LH": lh, "HL": hl, "HH": hh})
        x = ll
    return SubbandPyramid(levels, bands, x, tuple(dims[0]), dims)


def idwt2(pyr: SubbandPyramid) -> np.ndarray:
    x = pyr.ll
    for lev in range(pyr.levels - 1, -1, -1):
        h, w = pyr.level_dims[lev]
        b = pyr.bands[lev]
        lo = _ihaar_axis(x, b["LH"], 0, h)
        hi = _ihaar_axis(b["HL"], b["HH"], 0, h)
        x = _ihaar_axis(lo, hi, 1, w)
    return x


# -- SVD ---------------------------------------------------------------------


@dataclass
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


@njit(cache=True)
def _one_sided_jacobi(cols, vcols, tol, floor, max_sweeps, with_v):
    # cols[j] is column j of the working matrix; rotations orthogonalise rows of cols
    n, m = cols.shape
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    a = cols[p, k]
                    b = cols[q, k]
                    alpha += a * a
                    beta += b * b
                    gamma += a * b
                # columns that are numerically zero are left alone
                if gamma == 0.0 or alpha <= floor or beta <= floor or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    a = cols[p, k]
                    b = cols[q, k]
                    cols[p, k] = c * a - s * b
                    cols[q, k] = s * a + c * b
                if with_v:
                    for k in range(n):
                        a = vcols[p, k]
                        b = vcols[q, k]
                        vcols[p, k] = c * a - s * b
                        vcols[q, k] = s * a + c * b
        if not rotated:
            return sweep + 1
    return -1


SVD_TOL = 1e-12
SVD_MAX_SWEEPS = 60


def svd(matrix, compute_uv: bool = True) -> SvdFactors:
    """One-sided (Hestenes) Jacobi SVD of a square matrix.

    With ``compute_uv=False`` only ``S`` is filled in; U and V are empty.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
        raise UsageError(f"svd needs a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("svd input has non-finite entries")
    n = a.shape[0]
    cols = np.ascontiguousarray(a.T)
    vcols = np.eye(n) if compute_uv else np.zeros((1, 1))
    floor = (1e-15 * np.linalg.norm(a)) ** 2
    sweeps = _one_sided_jacobi(cols, vcols, SVD_TOL, floor, SVD_MAX_SWEEPS, compute_uv)
    if sweeps < 0:
        raise NumericError(f"Jacobi SVD did not converge in {SVD_MAX_SWEEPS} sweeps")
    sigma = np.sqrt(np.einsum("ij,ij->i", cols, cols))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    if not compute_uv:
        return SvdFactors(np.empty((0, 0)), sigma, np.empty((0, 0)))
    cols = cols[order]
    v = vcols[order].T
    scale = np.where(sigma > 0, sigma, 1.0)
    u = cols.T / scale
    # re-orthonormalise; columns of (numerically) zero singular values get an
    # orthonormal completion from the QR factor
    q, r = np.linalg.qr(u)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    u = q * d
    return SvdFactors(u, sigma, v)


# -- symmetric eigen / PCA ---------------------------------------------------


@njit(cache=True)
def _jacobi_eigen(a, v, tol, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        total = 0.0
        for i in range(n):
            for j in range(n):
                total += a[i, j] * a[i, j]
                if i != j:
                    off += a[i, j] * a[i, j]
        if off <= tol * tol * total or off == 0.0:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1


def symmetric_eigen(matrix) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors (columns) by cyclic Jacobi."""
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError("symmetric_eigen needs a square matrix")
    a = 0.5 * (a + a.T)
    v = np.eye(a.shape[0])
    if _jacobi_eigen(a, v, 1e-15, 100) < 0:
        raise NumericError("Jacobi eigensolver did not converge in 100 sweeps")
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return lam[order], v[:, order]


@dataclass
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray  # columns are eigenvectors, descending eigenvalue
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def truncated(self, k: int) -> "PcaModel":
        return PcaModel(self.mean, self.basis[:, :k], self.eigenvalues[:k])


def pca_fit(samples) -> PcaModel:
    """Sample mean, unbiased covariance and its ordered eigenbasis.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    z = np.asarray(samples, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise UsageError("pca_fit needs at least 2 sample vectors")
    mu = z.mean(axis=0)
    d = z - mu
    cov = d.T @ d / (z.shape[0] - 1)
    lam, e = symmetric_eigen(cov)
    pivot = np.argmax(np.abs(e), axis=0)
    signs = np.sign(e[pivot, np.arange(e.shape[1])])
    signs[signs == 0] = 1.0
    return PcaModel(mu, e * signs, lam)


def pca_project(model: PcaModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.dim:
        raise UsageError(f"vector length {z.shape[-1]} does not match model dimension {model.dim}")
    return (z - model.mean) @ model.basis


def pca_reconstruct(model: PcaModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != model.basis.shape[1]:
        raise UsageError(f"coordinate length {y.shape[-1]} does not match basis size {model.basis.shape[1]}")
    return y @ model.basis.T + model.mean
