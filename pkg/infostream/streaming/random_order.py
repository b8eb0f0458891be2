"""
(1+ε)-approximate entropy of a randomly ordered stream in one pass.

Dominant items are detected from small consecutive batches (MS) and
counted exactly from then on (the set A). Once a batch shows no dominant
item, the rest of the stream restricted to items outside A is handed to
the combined-oracle entropy estimator, fed by a corrected prefix. The
pieces are joined with the grouping identity

    H = Σ_A (c/m)·log2(m/c) + w·log2(1/w) + w·H(rest),   w = 1 − Σ_A c/m.

When the stream runs out while the remainder still fits in the buffers,
the remainder is measured exactly.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from infostream.dist_core import empirical_entropy
from infostream.errors import ContractViolation, StreamOrderError
from infostream.oracles import TableOracle, Target, make_rng
from infostream.streaming.simulation import PrefixSampler
from infostream.streaming.tokens import TokenStream
from infostream.testers import combined_entropy_run

logger = logging.getLogger(__name__)

# Batch-size multiplier: |MS| = c1·log2 n
C1 = 8

# Query multiplier: t = C·log2(n)/ε²
QUERY_CONSTANT = 48


@dataclass
class RandomOrderReport:
    estimate: float
    m: int
    absorbed: int
    rounds: int
    residual_length: int
    residual_entropy: float
    exact_residual: bool
    t: int
    space_words: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "m": self.m,
            "absorbed": self.absorbed,
            "rounds": self.rounds,
            "residual_length": self.residual_length,
            "residual_entropy": self.residual_entropy,
            "exact_residual": self.exact_residual,
            "t": self.t,
            "space_words": self.space_words,
        }


def grouped_entropy(absorbed_counts, m: int, residual_entropy: float, residual_length: int) -> float:
    """Entropy (bits) of a length-m multiset from exact counts of some items
    and the entropy of the remaining ``residual_length`` tokens."""
    c = np.asarray(absorbed_counts, dtype=np.float64)
    c = c[c > 0]
    total = float(((c / m) * np.log2(m / c)).sum()) if c.size else 0.0
    w = residual_length / m
    if w > 0.0:
        total += w * math.log2(1.0 / w) + w * residual_entropy
    return total


def _collect_outside(items: np.ndarray, pos: int, need: int, in_a: np.ndarray,
                     a_counts: np.ndarray) -> Tuple[np.ndarray, int]:
    """Read forward from ``pos`` until ``need`` tokens outside A are seen,
    counting A's tokens on the way."""
    parts = []
    while need > 0 and pos < items.size:
        window = items[pos:pos + max(4 * need, 1024)]
        outside = ~in_a[window]
        seen = np.cumsum(outside)
        stop = int(np.searchsorted(seen, need)) + 1 if seen[-1] >= need else window.size
        part = window[:stop]
        inside = in_a[part]
        a_counts += np.bincount(part[inside], minlength=a_counts.size)
        parts.append(part[~inside])
        need -= int((~inside).sum())
        pos += stop
    collected = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return collected, pos


def random_stream_entropy(stream: TokenStream, epsilon: float, c1: int = C1,
                          n: Optional[int] = None, query_constant: float = QUERY_CONSTANT,
                          seed: int = 0) -> RandomOrderReport:
    """Entropy (bits) of the P-tokens of a random-order stream."""
    if not stream.random_order:
        raise StreamOrderError("random-order entropy needs a stream flagged as random-order")
    if not 0.0 < epsilon <= 1.0:
        raise ContractViolation(f"epsilon must lie in (0, 1], got {epsilon}")
    n = n or stream.n
    items = stream.project(Target.P)
    m = int(items.size)
    log_n = max(math.log2(n), 1.0)
    batch = max(1, math.ceil(c1 * log_n))
    dominant = 0.5 * c1 * log_n
    t = math.ceil(query_constant * log_n / epsilon ** 2)
    if m == 0:
        return RandomOrderReport(0.0, 0, 0, 0, 0, 0.0, True, t, 0)

    in_a = np.zeros(n, dtype=bool)
    a_counts = np.zeros(n, dtype=np.int64)
    pos, rounds = 0, 0
    while True:
        ms, pos = _collect_outside(items, pos, batch, in_a, a_counts)
        rounds += 1
        if ms.size < batch:
            residual, projected = ms, None
            break
        ms_counts = np.bincount(ms, minlength=n)
        if ms_counts.max() >= dominant:
            in_a[ms_counts > 0] = True
            a_counts += ms_counts
            logger.debug(f"Random-order: round {rounds} absorbed, |A|={int(in_a.sum())}")
            continue
        rest = items[pos:]
        inside = in_a[rest]
        a_counts += np.bincount(rest[inside], minlength=n)
        projected = rest[~inside]
        residual = np.concatenate([ms, projected])
        break

    residual_length = int(residual.size)
    exact = projected is None or projected.size <= t
    if exact:
        residual_entropy = empirical_entropy(np.bincount(residual, minlength=n))
        tracked_size = 0
    else:
        prefix = projected[:t]
        tracked = np.union1d(ms, prefix)
        lookup = np.searchsorted(tracked, residual)
        hit = (lookup < tracked.size) & (tracked[np.minimum(lookup, tracked.size - 1)] == residual)
        counts = np.bincount(lookup[hit], minlength=tracked.size)
        rng = make_rng(seed, "random-order")
        draws = PrefixSampler(prefix, residual_length, consumed=ms).draw(t, rng)
        oracle = TableOracle(n, {Target.P: draws}, tracked, {Target.P: counts / residual_length},
                             seed=seed)
        residual_entropy = combined_entropy_run(oracle, t)
        tracked_size = int(tracked.size)

    estimate = grouped_entropy(a_counts[in_a], m, residual_entropy, residual_length)
    space = 2 * int(in_a.sum()) + batch + (0 if exact else t) + 2 * tracked_size + 4
    logger.debug(f"Random-order: m={m}, rounds={rounds}, |A|={int(in_a.sum())}, "
                 f"residual={residual_length}, exact={exact}, estimate={estimate:.4f}")
    return RandomOrderReport(estimate, m, int(in_a.sum()), rounds, residual_length,
                             residual_entropy, exact, t, space)
