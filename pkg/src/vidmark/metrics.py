"""Bit error rate and re-exported PSNR."""

import numpy as np

from .errors import UsageError
from .media import FidelityScore, psnr, psnr_value  # noqa: F401


def _as01(bits) -> np.ndarray:
    b = np.asarray(bits).astype(np.int64).ravel()
    if np.any(b < 0):
        return (b > 0).astype(np.int64)
    return b


def ber(truth, recovered) -> float:
    """Fraction of differing bits; {0,1} and {-1,+1} alphabets may be mixed."""
    t, r = _as01(truth), _as01(recovered)
    if t.shape != r.shape:
        raise UsageError(f"bit sequences differ in length: {t.size} vs {r.size}")
    if t.size == 0:
        return 0.0
    return float(np.count_nonzero(t != r)) / t.size
