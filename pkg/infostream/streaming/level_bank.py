"""
Single-pass entropy estimation from distinct counts of subsampled streams.

For a length guess m̃ the bank keeps k = ceil(log2(n/ε)) levels; a token
joins level j with probability min(1, 2^j/(m̃·t)), t = (1+ε)², and each
level feeds an F0 sketch. Σ_j F0_j/2^j is sandwiched by affine functions
of H, so it serves as an entropy estimate up to those bounds. Guesses
m̃ = (1+ε)^i all run in the same pass; the one with m̃ ≤ m < (1+ε)·m̃ is
reported.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from infostream.errors import ContractViolation, LadderOverflow
from infostream.oracles import Target, derive_key
from infostream.streaming.sketches import (
    KMV_CONSTANT, F0Sketch, hash_items, repetitions_for, unit_interval,
)
from infostream.streaming.tokens import TokenStream, target_code

logger = logging.getLogger(__name__)

_E_FACTOR = 1.0 - 1.0 / math.e

# Smallest piece of tokens processed between checks for passed guesses
MIN_PIECE = 1024


def level_count(n: int, epsilon: float) -> int:
    return max(1, math.ceil(math.log2(n / epsilon)))


def dilation(epsilon: float) -> float:
    return (1.0 + epsilon) ** 2


def level_probability(level: int, m_tilde: float, t: float) -> float:
    return min(1.0, 2.0 ** level / (m_tilde * t))


def inclusion_probability(p_i: float, m: int, m_tilde: float, t: float, level: int) -> float:
    """Probability that an item with mass ``p_i`` (m·p_i occurrences) reaches
    level ``level`` at least once: 1 − (1 − 2^j/(m̃t))^(m·p_i)."""
    x = level_probability(level, m_tilde, t)
    if x >= 1.0:
        return 1.0 if m * p_i > 0 else 0.0
    return float(-math.expm1(m * p_i * math.log1p(-x)))


def inclusion_sandwich(p_i: float, epsilon: float, level: int) -> Tuple[float, float]:
    """[(1−1/e)·2^j·p_i/t, (1+ε)²·2^j·p_i/t], valid when p_i·2^j ≤ 1 and
    m̃ ≤ m < (1+ε)·m̃."""
    t = dilation(epsilon)
    base = 2.0 ** level * p_i / t
    return _E_FACTOR * base, dilation(epsilon) * base


def expected_raw_sum(counts, m_tilde: float, epsilon: float, levels: Optional[int] = None) -> float:
    """Exact expectation over the coins of Σ_j F0_j/2^j for a realized
    frequency vector, with exact distinct counts."""
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    n = np.asarray(counts).size
    t = dilation(epsilon)
    k = levels or level_count(n, epsilon)
    total = 0.0
    for j in range(1, k + 1):
        x = level_probability(j, m_tilde, t)
        reached = np.ones_like(c) if x >= 1.0 else -np.expm1(c * math.log1p(-x))
        total += float(reached.sum()) / 2.0 ** j
    return total


def entropy_sandwich(entropy: float, epsilon: float) -> Tuple[float, float]:
    """Bounds on E[Σ_j F0_j/2^j]: ((1/t)(1−1/e)(H−1), (1/t)(1+ε)²H + 2)."""
    t = dilation(epsilon)
    return (_E_FACTOR * (entropy - 1.0) / t, dilation(epsilon) * entropy / t + 2.0)


def bias_adjusted(raw: float, epsilon: float) -> float:
    """Invert the lower sandwich edge shifted by the additive 2."""
    return (raw - 2.0) * dilation(epsilon) / _E_FACTOR


@dataclass
class F0LevelBank:
    """One length guess: k levels, each with its own F0 sketch."""

    m_tilde: float
    t: float
    levels: int
    epsilon0: float
    delta: float
    salts: List[int]
    kmv_constant: float = KMV_CONSTANT
    sketches: List[Optional[F0Sketch]] = field(default_factory=list)

    def __post_init__(self):
        self.sketches = [None] * self.levels
        self.thresholds = np.array([level_probability(j, self.m_tilde, self.t)
                                    for j in range(1, self.levels + 1)])

    def sketch(self, level_index: int) -> F0Sketch:
        if self.sketches[level_index] is None:
            self.sketches[level_index] = F0Sketch(self.epsilon0, self.delta,
                                                  constant=self.kmv_constant, salts=self.salts)
        return self.sketches[level_index]

    def raw_sum(self) -> float:
        return sum(sk.estimate() / 2.0 ** (j + 1)
                   for j, sk in enumerate(self.sketches) if sk is not None)

    @property
    def space_words(self) -> int:
        return 2 + sum(sk.space_words for sk in self.sketches if sk is not None)


@dataclass
class F0EntropyReport:
    raw: float
    m: int
    m_tilde: float
    t: float
    levels: int
    space_words: int
    epsilon: float
    epsilon0: float
    epsilon_c: float

    def sandwich(self, entropy: float) -> Tuple[float, float]:
        return entropy_sandwich(entropy, self.epsilon)

    def widened_sandwich(self, entropy: float) -> Tuple[float, float]:
        """The sandwich widened by the concentration slack (1 ± ε_c) and the
        sketch error (1 ± ε0)."""
        low, high = self.sandwich(entropy)
        low *= (1.0 - self.epsilon_c) * (1.0 - self.epsilon0)
        high *= (1.0 + self.epsilon_c) * (1.0 + self.epsilon0)
        return low, high

    @property
    def bias_adjusted(self) -> float:
        return bias_adjusted(self.raw, self.epsilon)

    def to_dict(self, entropy: Optional[float] = None) -> Dict[str, Any]:
        info = {
            "raw": self.raw,
            "bias_adjusted": self.bias_adjusted,
            "m": self.m,
            "m_tilde": self.m_tilde,
            "t": self.t,
            "levels": self.levels,
            "space_words": self.space_words,
        }
        if entropy is not None:
            info["sandwich"] = list(self.sandwich(entropy))
            info["widened_sandwich"] = list(self.widened_sandwich(entropy))
        return info


class F0EntropyEstimator:
    """Runs the whole ladder of length guesses over one pass.

    Coins are a hash of (token position, level), so every guess sees the
    same uniform u per token and level; a guess includes the token when u is
    below its level threshold. Guesses whose window has passed
    (m ≥ (1+ε)·m̃) are dropped as soon as the count passes them.
    """

    def __init__(self, n: int, epsilon: float, epsilon0: float, max_length: int,
                 delta: float = 0.05, epsilon_c: float = 0.1, seed: int = 0,
                 kmv_constant: float = KMV_CONSTANT):
        if not 0.0 < epsilon < 1.0:
            raise ContractViolation(f"epsilon must lie in (0, 1), got {epsilon}")
        if max_length < 1:
            raise ContractViolation(f"max_length must be positive, got {max_length}")
        self.n = n
        self.epsilon = epsilon
        self.epsilon0 = epsilon0
        self.epsilon_c = epsilon_c
        self.t = dilation(epsilon)
        self.levels = level_count(n, epsilon)
        self.m = 0
        self.peak_space = 0

        self.coin_salts = [derive_key(seed, "level-coin", j) for j in range(1, self.levels + 1)]
        self.hash_salts = [derive_key(seed, "level-kmv", r) for r in range(repetitions_for(delta))]

        rungs = max(1, math.ceil(math.log(max_length) / math.log1p(epsilon)) + 1)
        self.banks: Dict[int, F0LevelBank] = {
            i: F0LevelBank((1.0 + epsilon) ** i, self.t, self.levels, epsilon0, delta,
                           self.hash_salts, kmv_constant)
            for i in range(rungs)
        }
        self.max_rung = rungs - 1
        logger.debug(f"F0 bank: n={n}, levels={self.levels}, rungs={rungs}, t={self.t:.4f}")

    def insert_many(self, items: np.ndarray):
        """Feed items in pieces of at most max(MIN_PIECE, ε·m) tokens so that
        guesses are dropped close to the moment their window passes."""
        items = np.asarray(items, dtype=np.int64)
        start = 0
        while start < items.size:
            piece = max(MIN_PIECE, int(self.epsilon * self.m))
            self._insert_piece(items[start:start + piece])
            start += piece

    def _insert_piece(self, items: np.ndarray):
        size = items.size
        positions = np.arange(self.m, self.m + size, dtype=np.int64)
        hashes = [hash_items(items, salt) for salt in self.hash_salts]

        for level_index, salt in enumerate(self.coin_salts):
            u = unit_interval(hash_items(positions, salt))
            order = np.argsort(u, kind="stable")
            sorted_u = u[order]
            for bank in self.banks.values():
                cut = int(np.searchsorted(sorted_u, bank.thresholds[level_index], side="left"))
                if cut:
                    chosen = order[:cut]
                    bank.sketch(level_index).absorb_hashes([h[chosen] for h in hashes])

        self.m += size
        self.peak_space = max(self.peak_space, self.space_words)
        self._drop_passed()

    def _drop_passed(self):
        passed = [i for i, bank in self.banks.items() if self.m >= (1.0 + self.epsilon) * bank.m_tilde]
        for i in passed:
            del self.banks[i]
        if not self.banks:
            raise LadderOverflow(f"stream length {self.m} exceeds the largest guess "
                                 f"{(1.0 + self.epsilon) ** self.max_rung:.0f}")

    def consume(self, stream: TokenStream, which=Target.P):
        code = target_code(which)
        for _, ids, items in stream.chunks():
            self.insert_many(items[ids == code])

    @property
    def space_words(self) -> int:
        return 1 + len(self.coin_salts) + sum(bank.space_words for bank in self.banks.values())

    def selected_bank(self) -> Optional[F0LevelBank]:
        for bank in self.banks.values():
            if bank.m_tilde <= self.m < (1.0 + self.epsilon) * bank.m_tilde:
                return bank
        return None

    def finish(self) -> F0EntropyReport:
        bank = self.selected_bank()
        raw = bank.raw_sum() if bank is not None else 0.0
        m_tilde = bank.m_tilde if bank is not None else 0.0
        return F0EntropyReport(raw, self.m, m_tilde, self.t, self.levels,
                               max(self.peak_space, self.space_words),
                               self.epsilon, self.epsilon0, self.epsilon_c)


def f0_entropy_estimate(stream: TokenStream, epsilon: float, epsilon0: float,
                        epsilon_c: float = 0.1, n: Optional[int] = None,
                        max_length: Optional[int] = None, delta: float = 0.05,
                        seed: int = 0, kmv_constant: float = KMV_CONSTANT) -> F0EntropyReport:
    """Single-pass F0-bank entropy estimate of the P-tokens of ``stream``.

    ``max_length`` sizes the guess ladder and defaults to the stream length.
    """
    n = n or stream.n
    m = stream.length(Target.P)
    if m and m < n / epsilon:
        logger.warning(f"F0 bank: stream length {m} is not >> n/eps = {n / epsilon:.0f}; "
                       f"the sandwich bounds may not hold")
    estimator = F0EntropyEstimator(n, epsilon, epsilon0, max_length or max(m, 1), delta,
                                   epsilon_c, seed, kmv_constant)
    estimator.consume(stream)
    report = estimator.finish()
    logger.debug(f"F0 bank: m={report.m}, m_tilde={report.m_tilde:.1f}, raw={report.raw:.4f}, "
                 f"space={report.space_words} words")
    return report
