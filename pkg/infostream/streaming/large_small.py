"""
Single-pass entropy upper estimate from exactly tracked heavy items.

Items are picked for tracking at random as they arrive and counted exactly
from then on. Tracked items whose count reaches m·n^(−α) form the heavy
set; the remaining mass ŵ is charged the maximum entropy it could carry
over n items. Because tracked counts never exceed true counts, the result
is never below the empirical entropy of the stream.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, NamedTuple, Optional

import numpy as np
from scipy import optimize

from infostream.errors import ContractViolation, LadderOverflow, NoSolution
from infostream.oracles import Target, make_rng
from infostream.streaming.tokens import TokenStream, target_code

logger = logging.getLogger(__name__)

# Tracking probability multiplier C_track in min(1, C·n^α·log2 n/(ε·m̃))
TRACK_CONSTANT = 4.0

# Tracked-set cap, as a multiple of the expected number of tracked items
TRACK_CAP_FACTOR = 4.0


def tracking_probability(n: int, alpha: float, epsilon: float, m_tilde: float,
                         constant: float = TRACK_CONSTANT) -> float:
    log_n = max(math.log2(n), 1.0)
    return min(1.0, constant * n ** alpha * log_n / (epsilon * m_tilde))


def tracking_cap(n: int, alpha: float, epsilon: float,
                 constant: float = TRACK_CONSTANT) -> int:
    log_n = max(math.log2(n), 1.0)
    return min(n, math.ceil(TRACK_CAP_FACTOR * constant * n ** alpha * log_n / epsilon))


@dataclass
class TrackedCounters:
    """Exact counts of the items picked for tracking under one length guess.

    The dense arrays stand in for a hash map; space is charged per tracked
    entry.
    """

    n: int
    m_tilde: float
    probability: float
    cap: int
    tracked: np.ndarray = field(init=False)
    counts: np.ndarray = field(init=False)
    size: int = 0
    capped: bool = False

    def __post_init__(self):
        self.tracked = np.zeros(self.n, dtype=bool)
        self.counts = np.zeros(self.n, dtype=np.int64)

    def update(self, items: np.ndarray, coins: np.ndarray):
        """Process a chunk in order: a tracked item counts every occurrence;
        an untracked one starts at its first occurrence whose coin succeeds,
        and that occurrence counts."""
        length = items.size
        start = np.where(self.tracked, 0, length)
        candidate = (coins < self.probability) & ~self.tracked[items]
        if candidate.any():
            positions = np.flatnonzero(candidate)
            fresh, first = np.unique(items[positions], return_index=True)
            first_pos = positions[first]
            room = self.cap - self.size
            if fresh.size > room:
                keep = np.argsort(first_pos, kind="stable")[:max(room, 0)]
                fresh, first_pos = fresh[keep], first_pos[keep]
                if not self.capped:
                    logger.warning(f"Large-small: tracked-set cap {self.cap} reached "
                                   f"at guess m~={self.m_tilde:.0f}")
                self.capped = True
            start[fresh] = first_pos
            self.tracked[fresh] = True
            self.size += int(fresh.size)
        counted = np.arange(length) >= start[items]
        self.counts += np.bincount(items[counted], minlength=self.n)

    @property
    def space_words(self) -> int:
        return 2 * self.size + 3


@dataclass
class LargeSmallReport:
    estimate: float
    m: int
    m_tilde: float
    w_hat: float
    heavy: Dict[int, int]
    tracked: int
    space_words: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "m": self.m,
            "m_tilde": self.m_tilde,
            "w_hat": self.w_hat,
            "heavy_items": len(self.heavy),
            "tracked": self.tracked,
            "space_words": self.space_words,
        }


def large_small_combine(heavy_counts: np.ndarray, m: int, n: int) -> float:
    """Ĥ = ŵ·log2(n/ŵ) + Σ (c/m)·log2(m/c) over heavy counts."""
    c = np.asarray(heavy_counts, dtype=np.float64)
    c = c[c > 0]
    heavy_part = float(((c / m) * np.log2(m / c)).sum()) if c.size else 0.0
    w_hat = (m - float(c.sum())) / m
    tail = w_hat * math.log2(n / w_hat) if w_hat > 0.0 else 0.0
    return heavy_part + tail


class LargeSmallEstimator:
    """Runs the doubling ladder m̃ = 2^i in one pass; a guess is abandoned
    once the stream exceeds 2m̃."""

    def __init__(self, n: int, alpha: float, epsilon: float, max_length: int,
                 seed: int = 0, track_constant: float = TRACK_CONSTANT):
        if not 0.0 < alpha < 1.0:
            raise ContractViolation(f"alpha must lie in (0, 1), got {alpha}")
        if not 0.0 < epsilon < 1.0:
            raise ContractViolation(f"epsilon must lie in (0, 1), got {epsilon}")
        self.n = n
        self.alpha = alpha
        self.epsilon = epsilon
        self.m = 0
        self.peak_space = 0
        self.rng = make_rng(seed, "large-small")
        cap = tracking_cap(n, alpha, epsilon, track_constant)
        rungs = max(1, math.ceil(math.log2(max(max_length, 1))) + 1)
        self.rungs: Dict[int, TrackedCounters] = {
            i: TrackedCounters(n, float(2 ** i),
                               tracking_probability(n, alpha, epsilon, 2 ** i, track_constant), cap)
            for i in range(rungs)
        }
        logger.debug(f"Large-small: n={n}, alpha={alpha}, rungs={rungs}, cap={cap}")

    def insert_many(self, items: np.ndarray):
        items = np.asarray(items, dtype=np.int64)
        if items.size == 0:
            return
        coins = self.rng.random(items.size)
        for rung in self.rungs.values():
            rung.update(items, coins)
        self.m += int(items.size)
        self.peak_space = max(self.peak_space, self.space_words)
        for i in [i for i, rung in self.rungs.items() if self.m > 2 * rung.m_tilde]:
            del self.rungs[i]
        if not self.rungs:
            raise LadderOverflow(f"stream length {self.m} exceeds twice the largest guess")

    def consume(self, stream: TokenStream, which=Target.P):
        code = target_code(which)
        for _, ids, items in stream.chunks():
            self.insert_many(items[ids == code])

    @property
    def space_words(self) -> int:
        return 1 + sum(rung.space_words for rung in self.rungs.values())

    def selected(self) -> Optional[TrackedCounters]:
        eligible = [rung for rung in self.rungs.values() if rung.m_tilde <= self.m <= 2 * rung.m_tilde]
        return max(eligible, key=lambda rung: rung.m_tilde) if eligible else None

    def finish(self) -> LargeSmallReport:
        space = max(self.peak_space, self.space_words)
        rung = self.selected()
        if rung is None or self.m == 0:
            return LargeSmallReport(0.0, self.m, 0.0, 0.0, {}, 0, space)
        threshold = self.m * self.n ** (-self.alpha)
        heavy_idx = np.flatnonzero(rung.tracked & (rung.counts >= threshold))
        heavy_counts = rung.counts[heavy_idx]
        w_hat = (self.m - int(heavy_counts.sum())) / self.m
        estimate = large_small_combine(heavy_counts, self.m, self.n)
        heavy = dict(zip(heavy_idx.tolist(), heavy_counts.tolist()))
        return LargeSmallReport(estimate, self.m, rung.m_tilde, w_hat, heavy, rung.size, space)


def large_small_estimate(stream: TokenStream, alpha: float, epsilon: float,
                         n: Optional[int] = None, max_length: Optional[int] = None,
                         seed: int = 0, track_constant: float = TRACK_CONSTANT) -> LargeSmallReport:
    """Single-pass upper estimate of the entropy (bits) of the P-tokens."""
    n = n or stream.n
    estimator = LargeSmallEstimator(n, alpha, epsilon, max_length or max(stream.length(Target.P), 1),
                                    seed, track_constant)
    estimator.consume(stream)
    report = estimator.finish()
    logger.debug(f"Large-small: m={report.m}, estimate={report.estimate:.4f}, "
                 f"w_hat={report.w_hat:.4g}, heavy={len(report.heavy)}, space={report.space_words}")
    return report


# --- Error bounds ---

class ErrorBound(NamedTuple):
    factor: float
    additive: float

    def upper(self, entropy: float) -> float:
        return self.factor * entropy + self.additive


def large_small_error_bound(alpha: float, epsilon: float, n: int,
                            entropy: Optional[float] = None) -> ErrorBound:
    """Multiplicative factor (1/α)(1 + log(1/ε)/log n) and additive term
    ε(log2(n/ε) + n^(−α)); the estimate lies in [H, factor·H + additive]."""
    if not 0.0 < alpha < 1.0:
        raise ContractViolation(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < epsilon < 1.0 or n < 2:
        raise ContractViolation("error bound needs epsilon in (0, 1) and n >= 2")
    factor = (1.0 / alpha) * (1.0 + math.log(1.0 / epsilon) / math.log(n))
    additive = epsilon * (math.log2(n / epsilon) + n ** (-alpha))
    return ErrorBound(factor, additive)


def relative_error(epsilon: float, alpha: float, n: int, entropy: float) -> float:
    """ε′ = α(ε·log2(n/ε) + n^(−α))/H + log(1/ε)/log n."""
    return (alpha * (epsilon * math.log2(n / epsilon) + n ** (-alpha)) / entropy
            + math.log(1.0 / epsilon) / math.log(n))


_EPS_FLOOR = 1e-12


def epsilon_for_relative_error(target: float, alpha: float, n: int, entropy: float) -> float:
    """Largest ε in (0, 1) with relative_error(ε) ≤ target.

    relative_error is convex-shaped in ε (falling, then rising), so the
    admissible set is an interval around its minimizer; the returned ε is
    its right end, found by bracketing on the rising branch.
    """
    if entropy <= 0:
        raise ContractViolation("entropy must be positive")

    def excess(eps: float) -> float:
        return relative_error(eps, alpha, n, entropy) - target

    hi = 1.0 - _EPS_FLOOR
    best = optimize.minimize_scalar(excess, bounds=(_EPS_FLOOR, hi), method="bounded",
                                    options={"xatol": 1e-12})
    if best.fun > 0.0:
        raise NoSolution(f"relative error {target} is below the attainable minimum "
                         f"{best.fun + target:.6g}")
    if excess(hi) <= 0.0:
        return hi
    return float(optimize.brentq(excess, best.x, hi, xtol=1e-14))
