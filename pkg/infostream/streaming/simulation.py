"""
Serving a canonical oracle algorithm from a stream.

Generative calls are answered from a stored prefix of the stream (one
pass, random order) or from reservoir samples (two passes); evaluative
calls are answered from exact counters divided by the stream length. Only
indices that were sampled, or chosen uniformly in advance, are counted, so
the wrapped algorithm must be canonical.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from infostream.errors import BudgetExhausted, ContractViolation, StreamOrderError
from infostream.oracles import TableOracle, Target, as_target, make_rng
from infostream.streaming.tokens import TokenStream, target_code

logger = logging.getLogger(__name__)


class SimulationMode(str, Enum):
    ONE_PASS = "one-pass"
    TWO_PASS = "two-pass"


class PrefixSampler:
    """Turns a random-order prefix into i.i.d. draws from the whole multiset.

    ``consumed`` holds tokens already read before the prefix, ``fresh`` the
    prefix itself, and ``total`` the multiset size M. Call j (1-based) sees
    d = min(|consumed| + j − 1, M) tokens already read: with probability
    (M − d)/M it returns the next fresh token, otherwise a uniformly chosen
    token among the d already read.
    """

    def __init__(self, fresh: np.ndarray, total: int, consumed: Optional[np.ndarray] = None):
        self.fresh = np.asarray(fresh, dtype=np.int64)
        self.consumed = (np.zeros(0, dtype=np.int64) if consumed is None
                         else np.asarray(consumed, dtype=np.int64))
        self.total = int(total)
        if self.total < 1:
            raise ContractViolation("cannot sample from an empty multiset")
        if self.consumed.size + self.fresh.size > self.total:
            raise ContractViolation("more tokens read than the multiset holds")

    def seen(self, j: int) -> int:
        return min(self.consumed.size + j - 1, self.total)

    def branch_weights(self, j: int) -> Tuple[Fraction, Fraction]:
        """Exact (fresh, each-seen-token) probabilities of call j."""
        d = self.seen(j)
        fresh = Fraction(self.total - d, self.total)
        each = (1 - fresh) / d if d else Fraction(0)
        return fresh, each

    def draw(self, count: int, rng: np.random.Generator) -> np.ndarray:
        s = self.consumed.size
        available = min(count, self.total - s)
        if self.fresh.size < available:
            raise ContractViolation(f"prefix holds {self.fresh.size} tokens, {available} needed")
        pool = np.concatenate([self.consumed, self.fresh[:available]])
        j = np.arange(1, count + 1)
        d = np.minimum(s + j - 1, self.total)
        take_fresh = rng.random(count) * self.total < (self.total - d)
        pick = np.floor(rng.random(count) * np.maximum(d, 1)).astype(np.int64)
        pick = np.minimum(pick, np.maximum(d - 1, 0))
        fresh_pos = np.minimum(s + j - 1, pool.size - 1)
        return np.where(take_fresh, pool[fresh_pos], pool[pick])


class StreamOracle(TableOracle):
    """Oracle view of a processed stream: draws come from the corrected
    samples, probes from exact counts over the counted index set."""

    def __init__(self, n: int, samples: Dict[Target, np.ndarray], counted: np.ndarray,
                 counts: Dict[Target, np.ndarray], lengths: Dict[Target, int],
                 seed: int = 0, space_words: int = 0):
        values = {t: counts[t] / lengths[t] for t in samples}
        super().__init__(n, samples, counted, values, seed=seed)
        self.lengths = lengths
        self.counts = counts
        self.space_words = space_words


@dataclass
class SimulationResult:
    output: Any
    oracle: StreamOracle
    mode: SimulationMode

    @property
    def space_words(self) -> int:
        return self.oracle.space_words


def _choose_extra(n: int, counted: np.ndarray, extra: Optional[int], t: int,
                  rng: np.random.Generator) -> np.ndarray:
    complement = np.setdiff1d(np.arange(n), counted, assume_unique=True)
    size = min(t, complement.size) if extra is None else extra
    if size > complement.size:
        raise ContractViolation(f"{size} extra indices requested but only {complement.size} uncounted")
    return np.sort(rng.choice(complement, size=size, replace=False)) if size else np.zeros(0, np.int64)


def _count_indices(stream: TokenStream, targets, index: np.ndarray):
    """Per-target counts of the sorted ``index`` over the whole stream."""
    counts = {target: np.zeros(index.size, dtype=np.int64) for target in targets}
    lookup = np.full(stream.n, -1, dtype=np.int64)
    lookup[index] = np.arange(index.size)
    for _, ids, items in stream.chunks():
        slot = lookup[items]
        hit = slot >= 0
        for target in targets:
            mine = hit & (ids == target_code(target))
            counts[target] += np.bincount(slot[mine], minlength=index.size)
    return counts


def _prefix_end(stream: TokenStream, targets, t: int) -> int:
    """Stream position just after both per-target prefixes of length t fill
    (or the stream end)."""
    end = 0
    for target in targets:
        positions = np.flatnonzero(stream.dist_ids == target_code(target))
        if positions.size >= t:
            end = max(end, int(positions[t - 1]) + 1)
        else:
            return len(stream)
    return end


def simulate_one_pass(stream: TokenStream, t: int, seed: int = 0,
                      extra_probes: Optional[int] = None) -> StreamOracle:
    """Buffer tokens until every target has t prefix tokens, count the
    prefix items and the extra uniform indices for the rest of the pass,
    then correct the prefix into i.i.d. draws."""
    if not stream.random_order:
        raise StreamOrderError("one-pass simulation needs a stream flagged as random-order")
    if t < 1:
        raise ContractViolation(f"t must be at least 1, got {t}")
    targets = stream.targets
    if not targets:
        raise ContractViolation("empty stream")
    rng = make_rng(seed, "stream-oracle-1p")

    end = _prefix_end(stream, targets, t)
    buffer_ids, buffer_items = stream.dist_ids[:end], stream.items[:end]
    prefixes = {target: buffer_items[buffer_ids == target_code(target)][:t] for target in targets}
    sampled = np.unique(np.concatenate(list(prefixes.values())))
    extra = _choose_extra(stream.n, sampled, extra_probes, t, rng)
    counted = np.union1d(sampled, extra)

    counts = _count_indices(stream, targets, counted)
    lengths = {target: stream.length(target) for target in targets}
    samples = {target: PrefixSampler(prefixes[target], lengths[target]).draw(t, rng)
               for target in targets}
    space = end + 2 * counted.size * len(targets) + len(targets)
    logger.debug(f"Stream oracle (1 pass): t={t}, buffered={end}, counted={counted.size}, "
                 f"space={space}")
    return StreamOracle(stream.n, samples, counted, counts, lengths, seed, space)


def reservoir_samples(stream: TokenStream, which, t: int, rng: np.random.Generator) -> np.ndarray:
    """t independent size-1 reservoirs over one target's tokens, so the
    result is t uniform draws with replacement.

    Each reservoir jumps straight to its next replacement: after accepting
    the k-th token it next accepts token floor(k/U) + 1.
    """
    code = target_code(which)
    held = np.full(t, -1, dtype=np.int64)
    next_pos = np.ones(t, dtype=np.int64)
    seen = 0
    for _, ids, items in stream.chunks():
        mine = items[ids == code]
        end = seen + mine.size
        due = next_pos <= end
        while due.any():
            k = next_pos[due]
            held[due] = mine[k - seen - 1]
            u = 1.0 - rng.random(k.size)
            next_pos[due] = np.floor(np.minimum(k / u, 2.0 ** 62)).astype(np.int64) + 1
            due = next_pos <= end
        seen = end
    if seen == 0:
        raise ContractViolation(f"no tokens for target '{as_target(which).value}'")
    return held


def simulate_two_pass(stream: TokenStream, t: int, seed: int = 0,
                      extra_probes: Optional[int] = None) -> StreamOracle:
    """Pass 1 fills t reservoirs per target and fixes the counted set; pass
    2 counts it exactly."""
    if not stream.replayable:
        raise StreamOrderError("two-pass simulation needs a replayable stream")
    if t < 1:
        raise ContractViolation(f"t must be at least 1, got {t}")
    targets = stream.targets
    if not targets:
        raise ContractViolation("empty stream")
    rng = make_rng(seed, "stream-oracle-2p")

    samples = {target: reservoir_samples(stream, target, t, rng) for target in targets}
    sampled = np.unique(np.concatenate(list(samples.values())))
    extra = _choose_extra(stream.n, sampled, extra_probes, t, rng)
    counted = np.union1d(sampled, extra)

    counts = _count_indices(stream, targets, counted)
    lengths = {target: stream.length(target) for target in targets}
    space = (2 * t + 2 * counted.size) * len(targets) + len(targets)
    logger.debug(f"Stream oracle (2 pass): t={t}, counted={counted.size}, space={space}")
    return StreamOracle(stream.n, samples, counted, counts, lengths, seed, space)


def simulate_combined_oracle(stream: TokenStream, t: int, mode: SimulationMode,
                             wrapped: Callable[[StreamOracle], Any], seed: int = 0,
                             extra_probes: Optional[int] = None) -> SimulationResult:
    """Run a canonical oracle algorithm against a stream.

    ``wrapped`` receives the stream oracle and may issue up to ``t``
    generative calls per target and probes of counted indices only;
    anything else raises ``BudgetExhausted`` or ``ProbeOutsideCountedSet``.
    """
    mode = SimulationMode(mode)
    if mode is SimulationMode.ONE_PASS:
        oracle = simulate_one_pass(stream, t, seed, extra_probes)
    else:
        oracle = simulate_two_pass(stream, t, seed, extra_probes)
    try:
        output = wrapped(oracle)
    except BudgetExhausted:
        logger.error(f"Stream oracle: wrapped algorithm asked for more than t={t} samples")
        raise
    return SimulationResult(output, oracle, mode)


def default_simulation_size(n: int, epsilon: float, query_constant: float) -> int:
    """t = ceil(C·log2(n)/ε²)."""
    return math.ceil(query_constant * max(math.log2(n), 1.0) / epsilon ** 2)
