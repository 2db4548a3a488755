"""Deterministic pseudo-random material derived from a 64-bit key.

Everything is built on splitmix64 with FNV-1a domain separation, so a given
``(key, stream_id)`` pair produces the same stream on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import CapacityError, UsageError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


@dataclass(frozen=True)
class WatermarkKey:
    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MASK64:
            raise UsageError(f"key seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_hex(cls, text: str) -> "WatermarkKey":
        try:
            value = int(text, 16)
        except ValueError:
            raise UsageError(f"key must be hexadecimal, got {text!r}") from None
        return cls(value)

    def hex(self) -> str:
        return f"{self.seed:016x}"


@dataclass
class ChipSequence:
    chips: np.ndarray  # int8, values in {-1, +1}
    stream_id: str

    def __len__(self):
        return len(self.chips)


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def splitmix64(state: int, count: int) -> np.ndarray:
    """The first ``count`` outputs of splitmix64 started at ``state``."""
    with np.errstate(over="ignore"):
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(state) + steps * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _stream(key: WatermarkKey, stream_id: str, count: int) -> np.ndarray:
    return splitmix64(key.seed ^ fnv1a64(stream_id), count)


def pn_sequence(key: WatermarkKey, stream_id: str, length: int) -> ChipSequence:
    """±1 chips: -1 where the generator output has its top bit set."""
    if length < 1:
        raise UsageError("PN sequence length must be at least 1")
    raw = _stream(key, stream_id, int(length))
    chips = np.where(raw >> np.uint64(63), -1, 1).astype(np.int8)
    return ChipSequence(chips, stream_id)


def derive_keys(master: int, count: int) -> List[WatermarkKey]:
    """``key_i`` is the i-th splitmix64 output of the master seed."""
    return [WatermarkKey(int(v)) for v in splitmix64(int(master) & MASK64, count)]


def _hadamard(n: int) -> np.ndarray:
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


def keyed_permutation(key: WatermarkKey, stream_id: str, n: int, count=None) -> np.ndarray:
    """First ``count`` entries of a Fisher-Yates shuffle of ``range(n)``."""
    count = n if count is None else count
    if count > n:
        raise CapacityError(f"cannot draw {count} distinct items from {n}")
    raw = _stream(key, stream_id, count)
    perm = np.arange(n)
    for i in range(count):
        j = i + int(raw[i] % np.uint64(n - i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:count]


def orthogonal_set(key: WatermarkKey, count: int, length: int) -> List[ChipSequence]:
    """``count`` mutually orthogonal ±1 sequences of ``length`` chips.

    Rows of a Sylvester Hadamard matrix other than the all-ones row, picked in
    keyed order and multiplied by a shared PN scrambler. Scrambling by a ±1
    vector leaves every pairwise dot product unchanged.
    """
    if length < 2 or length & (length - 1):
        raise UsageError(f"orthogonal sequence length must be a power of two >= 2, got {length}")
    if count > length - 1:
        raise CapacityError(f"at most {length - 1} orthogonal sequences of length {length}, asked for {count}")
    h = _hadamard(length)
    rows = 1 + keyed_permutation(key, "orthogonal-rows", length - 1, count)
    scrambler = pn_sequence(key, "orthogonal-scrambler", length).chips.astype(np.int64)
    return [ChipSequence((h[r] * scrambler).astype(np.int8), f"orthogonal-{i}") for i, r in enumerate(rows)]


def select_positions(key: WatermarkKey, stream_id: str, count: int, width: int, height: int) -> List[Tuple[int, int]]:
    """``count`` distinct (x, y) pixel coordinates drawn over raster order."""
    if count > width * height:
        raise CapacityError(f"{count} positions requested but frame has only {width * height} pixels")
    idx = keyed_permutation(key, stream_id, width * height, count)
    return [(int(i % width), int(i // width)) for i in idx]


def disjoint_positions(key: WatermarkKey, requests, width: int, height: int):
    """Draw several position sets that never share a pixel.

    ``requests`` is a sequence of ``(stream_id, count)``; each stream walks its
    own keyed permutation and skips pixels claimed by earlier streams.
    """
    total = sum(c for _, c in requests)
    if total > width * height:
        raise CapacityError(f"{total} positions requested but frame has only {width * height} pixels")
    taken = set()
    out = []
    for stream_id, count in requests:
        need = count + len(taken)
        order = keyed_permutation(key, stream_id, width * height, need)
        chosen = []
        for i in order:
            if len(chosen) == count:
                break
            if int(i) not in taken:
                chosen.append(int(i))
        taken.update(chosen)
        out.append([(i % width, i // width) for i in chosen])
    return out
