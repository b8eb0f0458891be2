"""
Distinct-element (F0) sketch and the vectorized hashing it shares with the
streaming estimators.
"""
import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from infostream.errors import ContractViolation
from infostream.oracles import derive_key

logger = logging.getLogger(__name__)

# k = ceil(KMV_CONSTANT / ε0²) minimum hash values are kept per repetition
KMV_CONSTANT = 4.0

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_64 = float(2 ** 64)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over a uint64 array (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hash_items(items: np.ndarray, salt: int) -> np.ndarray:
    """64-bit salted hash of each item."""
    return splitmix64(np.asarray(items, dtype=np.int64).astype(np.uint64) ^ np.uint64(salt))


def unit_interval(hashes: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to floats in [0, 1) using the top 53 bits."""
    return (hashes >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def repetitions_for(delta: float) -> int:
    """Odd number of independent repetitions, at least ln(1/δ)."""
    reps = max(1, math.ceil(math.log(1.0 / delta)))
    return reps if reps % 2 else reps + 1


class F0Sketch:
    """k-minimum-values summary: (1 ± ε0)-estimate of the number of distinct
    items with probability 1 − δ, as the median over independent
    repetitions.

    Each repetition keeps the k smallest distinct 64-bit hashes seen. While
    fewer than k distinct hashes exist the count is exact.
    """

    def __init__(self, epsilon0: float, delta: float = 0.05, seed: int = 0,
                 constant: float = KMV_CONSTANT, salts: Optional[Sequence[int]] = None):
        if not 0.0 < epsilon0 < 1.0:
            raise ContractViolation(f"epsilon0 must lie in (0, 1), got {epsilon0}")
        if not 0.0 < delta < 1.0:
            raise ContractViolation(f"delta must lie in (0, 1), got {delta}")
        self.epsilon0 = epsilon0
        self.delta = delta
        self.k = max(2, math.ceil(constant / (epsilon0 * epsilon0)))
        if salts is None:
            salts = [derive_key(seed, "kmv", r) for r in range(repetitions_for(delta))]
        self.salts = list(salts)
        self._mins: List[np.ndarray] = [np.empty(0, dtype=np.uint64) for _ in self.salts]

    @property
    def repetitions(self) -> int:
        return len(self.salts)

    def insert(self, item: int):
        self.insert_many(np.array([item], dtype=np.int64))

    def insert_many(self, items: np.ndarray):
        items = np.asarray(items, dtype=np.int64)
        if items.size:
            self.absorb_hashes([hash_items(items, salt) for salt in self.salts])

    def absorb_hashes(self, hashes: Sequence[np.ndarray]):
        """Merge pre-computed per-repetition hashes (one array per salt)."""
        for r, h in enumerate(hashes):
            if h.size == 0:
                continue
            kept = self._mins[r]
            if kept.size == self.k:
                h = h[h < kept[-1]]
                if h.size == 0:
                    continue
            self._mins[r] = np.union1d(kept, h)[:self.k]

    def _estimate_one(self, kept: np.ndarray) -> float:
        if kept.size < self.k:
            return float(kept.size)
        return (self.k - 1) * _TWO_64 / (float(kept[-1]) + 1.0)

    def estimate(self) -> float:
        return float(np.median([self._estimate_one(kept) for kept in self._mins]))

    @property
    def space_words(self) -> int:
        """Registers held plus one salt per repetition."""
        return sum(int(kept.size) for kept in self._mins) + len(self.salts)

    def get_info(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "repetitions": self.repetitions,
            "epsilon0": self.epsilon0,
            "delta": self.delta,
            "space_words": self.space_words,
        }


def f0_insert(sketch: F0Sketch, item: int):
    sketch.insert(item)


def f0_estimate(sketch: F0Sketch) -> float:
    return sketch.estimate()
