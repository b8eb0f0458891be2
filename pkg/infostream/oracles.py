"""
Generative, evaluative and combined oracle access with call budgeting.

``sample(which)`` returns an index drawn from the target distribution and
``probe(which, i)`` returns its exact mass. Every call is counted in a
``CallTrace``; sessions with a budget refuse calls past it. Three oracle
flavours share the same surface (``OracleAccess``): a direct
``OracleSession`` over explicit distributions, a ``TableOracle`` that
replays a canonical plan, and the stream-backed oracles in
``infostream.streaming.simulation``.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Union

import mmh3
import numpy as np

from infostream.dist_core import Distribution
from infostream.errors import (
    BudgetExhausted, ContractViolation, IndexOutOfRange, ProbeOutsideCountedSet,
)

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class Target(str, Enum):
    P = "p"
    Q = "q"


TargetLike = Union[Target, str]


def as_target(which: TargetLike) -> Target:
    return which if isinstance(which, Target) else Target(str(which).lower())


def derive_key(seed: int, *labels) -> int:
    """Fold labels into a 64-bit key; distinct labels give unrelated keys."""
    key = int(seed) & MASK64
    for label in labels:
        key = mmh3.hash64(f"{key}:{label}")[0] & MASK64
    return key


def make_rng(seed: int, *labels) -> np.random.Generator:
    """Project-wide generator: Philox (counter-based, 64-bit keyed)."""
    return np.random.Generator(np.random.Philox(derive_key(seed, *labels)))


@dataclass
class CallTrace:
    """Per-target counts of sample and probe calls."""

    samples: Dict[Target, int] = field(default_factory=lambda: {t: 0 for t in Target})
    probes: Dict[Target, int] = field(default_factory=lambda: {t: 0 for t in Target})

    @property
    def total(self) -> int:
        return sum(self.samples.values()) + sum(self.probes.values())

    def to_dict(self, seed: Optional[int] = None) -> Dict[str, Optional[int]]:
        return {
            "samples_p": self.samples[Target.P],
            "samples_q": self.samples[Target.Q],
            "probes_p": self.probes[Target.P],
            "probes_q": self.probes[Target.Q],
            "seed": seed,
        }


class OracleAccess:
    """Shared surface of every oracle: tracing, budgeting, scalar wrappers.

    Subclasses implement ``_draw`` and ``_lookup``; callers use
    ``sample``/``probe`` or their vectorized ``*_many`` forms, which count
    one call per element.
    """

    def __init__(self, n: int, targets, seed: int = 0, budget: Optional[int] = None):
        self.n = int(n)
        self.targets = tuple(targets)
        self.seed = int(seed)
        self.budget = budget
        self.trace = CallTrace()

    def _check_target(self, which: TargetLike) -> Target:
        target = as_target(which)
        if target not in self.targets:
            raise ContractViolation(f"oracle has no target '{target.value}'")
        return target

    def _charge(self, counter: Dict[Target, int], target: Target, count: int):
        if self.budget is not None and self.trace.total + count > self.budget:
            raise BudgetExhausted(
                f"budget of {self.budget} calls exhausted "
                f"({self.trace.total} used, {count} requested)")
        counter[target] += count

    def sample_many(self, which: TargetLike, count: int) -> np.ndarray:
        target = self._check_target(which)
        self._charge(self.trace.samples, target, count)
        return self._draw(target, count)

    def probe_many(self, which: TargetLike, indices) -> np.ndarray:
        target = self._check_target(which)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexOutOfRange(f"probe index outside [0, {self.n})")
        self._charge(self.trace.probes, target, int(idx.size))
        return self._lookup(target, idx)

    def sample(self, which: TargetLike) -> int:
        return int(self.sample_many(which, 1)[0])

    def probe(self, which: TargetLike, i: int) -> float:
        return float(self.probe_many(which, [i])[0])

    def trace_dict(self) -> Dict[str, Optional[int]]:
        return self.trace.to_dict(self.seed)

    def _draw(self, target: Target, count: int) -> np.ndarray:
        raise NotImplementedError

    def _lookup(self, target: Target, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class OracleSession(OracleAccess):
    """Combined-oracle access to one (``p``) or two (``p``, ``q``) explicit
    distributions, drawing with the alias method from a seeded generator."""

    def __init__(self, p: Distribution, q: Optional[Distribution] = None,
                 seed: int = 0, budget: Optional[int] = None):
        dists = {Target.P: p}
        if q is not None:
            if q.n != p.n:
                raise ContractViolation(f"base sizes differ: {p.n} vs {q.n}")
            dists[Target.Q] = q
        super().__init__(p.n, dists.keys(), seed=seed, budget=budget)
        self.dists = dists
        self.rng = make_rng(seed, "oracle-session")

    def _draw(self, target: Target, count: int) -> np.ndarray:
        return self.dists[target].alias.draw(self.rng, count)

    def _lookup(self, target: Target, idx: np.ndarray) -> np.ndarray:
        return self.dists[target].probs[idx].copy()


class TableOracle(OracleAccess):
    """Oracle answering from pre-drawn samples and a finite probe table.

    Samples are handed out in order; asking for more than were drawn
    exhausts the oracle, and probing an index outside the table is a
    contract violation by the wrapped (non-canonical) algorithm.
    """

    def __init__(self, n: int, samples: Dict[Target, np.ndarray], probe_index: np.ndarray,
                 probe_values: Dict[Target, np.ndarray], seed: int = 0):
        super().__init__(n, samples.keys(), seed=seed)
        self._samples = {t: np.asarray(s, dtype=np.int64) for t, s in samples.items()}
        self._cursor = {t: 0 for t in samples}
        self._index = np.asarray(probe_index, dtype=np.int64)
        self._values = probe_values

    def _draw(self, target: Target, count: int) -> np.ndarray:
        start = self._cursor[target]
        pool = self._samples[target]
        if start + count > pool.size:
            raise BudgetExhausted(f"only {pool.size} samples of '{target.value}' available")
        self._cursor[target] = start + count
        return pool[start:start + count].copy()

    def _lookup(self, target: Target, idx: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._index, idx)
        pos = np.minimum(pos, max(self._index.size - 1, 0))
        if self._index.size == 0 or np.any(self._index[pos] != idx):
            missing = idx[(self._index.size == 0) | (self._index[pos] != idx)]
            raise ProbeOutsideCountedSet(f"index {int(missing[0])} was never counted")
        return self._values[target][pos].copy()


@dataclass
class CanonicalPlan:
    """The realized oracle transcript of a canonical algorithm.

    All samples come first; then every distinct sampled index is probed,
    followed by ``extra`` indices chosen uniformly without replacement from
    the unsampled remainder of the base.
    """

    t: int
    n: int
    samples: Dict[Target, np.ndarray]
    probe_set: np.ndarray
    extra: np.ndarray
    probe_values: Dict[Target, np.ndarray]
    seed: int

    @property
    def calls(self) -> int:
        per_target = self.t + self.probe_set.size
        return per_target * len(self.samples)

    def oracle(self) -> TableOracle:
        """Replay the plan to a wrapped canonical algorithm."""
        return TableOracle(self.n, self.samples, self.probe_set, self.probe_values, seed=self.seed)


def canonicalize(t: int, extra_probes: int, session: OracleAccess) -> CanonicalPlan:
    """Take ``t`` samples per target, probe every distinct sampled index in
    every target, then probe ``extra_probes`` uniform unsampled indices."""
    if t < 1:
        raise ContractViolation(f"canonical plan needs t >= 1, got {t}")
    samples = {target: session.sample_many(target, t) for target in session.targets}
    sampled = np.unique(np.concatenate(list(samples.values())))
    complement_size = session.n - sampled.size
    if extra_probes > complement_size:
        raise ContractViolation(
            f"{extra_probes} extra probes requested but only {complement_size} unsampled indices")

    if extra_probes:
        rng = make_rng(session.seed, "canonical-extra", t)
        complement = np.setdiff1d(np.arange(session.n), sampled, assume_unique=True)
        extra = np.sort(rng.choice(complement, size=extra_probes, replace=False))
    else:
        extra = np.zeros(0, dtype=np.int64)

    probe_set = np.union1d(sampled, extra)
    probe_values = {target: session.probe_many(target, probe_set) for target in session.targets}
    logger.debug(f"Canonical plan: t={t}, distinct={sampled.size}, extra={extra.size}, "
                 f"calls={session.trace.total}")
    return CanonicalPlan(t=t, n=session.n, samples=samples, probe_set=probe_set,
                         extra=extra, probe_values=probe_values, seed=session.seed)
