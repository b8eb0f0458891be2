"""
Exact discrete distributions, f-divergences and entropy.

This is the ground-truth layer: every estimator in the package is checked
against the closed forms computed here. Entropy is measured in bits; the
f-divergences use natural logarithms.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from infostream.errors import (
    ContractViolation, DimensionMismatch, InvalidDistribution, UnsupportedKind,
)

logger = logging.getLogger(__name__)

# Absolute tolerance for the sum-to-one invariant and identity checks
TOLERANCE = 1e-9

# Returned (never truncated) when KL has mass where the reference has none
INFINITE_DIVERGENCE = math.inf

# Bound used for the four bounded symmetric kinds
BOUNDED_TAU = 2.0

PathLike = Union[str, Path]


class AliasTable:
    """Vose alias table: O(n) construction, O(1) per draw.

    Columns with zero mass get probability 0 and always defer to their
    alias, so unsupported items are never drawn.
    """

    def __init__(self, probs: np.ndarray):
        n = len(probs)
        scaled = np.asarray(probs, dtype=np.float64) * n
        self.prob = np.zeros(n, dtype=np.float64)
        self.alias = np.arange(n, dtype=np.int64)

        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]

        while small and large:
            lo = small.pop()
            hi = large.pop()
            self.prob[lo] = scaled[lo]
            self.alias[lo] = hi
            scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
            if scaled[hi] < 1.0:
                small.append(hi)
            else:
                large.append(hi)
        # Leftovers are 1 up to rounding; a massless leftover must still
        # never be returned
        heaviest = int(np.argmax(probs))
        for rest in (small, large):
            while rest:
                i = rest.pop()
                if probs[i] > 0.0:
                    self.prob[i] = 1.0
                else:
                    self.alias[i] = heaviest

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` indices."""
        column = rng.integers(0, len(self.prob), size=size)
        toss = rng.random(size)
        return np.where(toss < self.prob[column], column, self.alias[column])


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over the base ``[0, n)``."""

    probs: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidDistribution("probs must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(probs)):
            raise InvalidDistribution("probs must be finite")
        if np.any(probs < 0.0):
            raise InvalidDistribution(f"negative mass at index {int(np.argmin(probs))}")
        total = float(probs.sum())
        if abs(total - 1.0) > TOLERANCE:
            raise InvalidDistribution(f"masses sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "n", int(probs.size))

    @classmethod
    def from_weights(cls, weights: Iterable[float]) -> "Distribution":
        """Normalize non-negative weights into a distribution."""
        w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights,
                       dtype=np.float64)
        total = w.sum()
        if total <= 0:
            raise InvalidDistribution("weights must have positive total")
        return cls(w / total)

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "Distribution":
        """Empirical distribution of a frequency vector."""
        return cls.from_weights(np.asarray(counts, dtype=np.float64))

    @classmethod
    def uniform(cls, n: int, support: Optional[int] = None) -> "Distribution":
        """Uniform over the first ``support`` items (all ``n`` by default)."""
        support = n if support is None else support
        if not 1 <= support <= n:
            raise InvalidDistribution(f"support {support} outside [1, {n}]")
        probs = np.zeros(n)
        probs[:support] = 1.0 / support
        return cls(probs)

    @classmethod
    def point_mass(cls, n: int, item: int = 0) -> "Distribution":
        probs = np.zeros(n)
        probs[item] = 1.0
        return cls(probs)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs)

    @cached_property
    def alias(self) -> AliasTable:
        return AliasTable(self.probs)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Distribution(n={self.n}, support={self.support.size})"


# --- Divergence kinds ---

class DivergenceTag(str, Enum):
    L1 = "l1"
    L2_SQUARED = "l2sq"
    HELLINGER = "hellinger"
    JENSEN_SHANNON = "js"
    TRIANGLE = "triangle"
    KL = "kl"


def _f_l1(u):
    return np.abs(u - 1.0)


def _f_hellinger(u):
    return (np.sqrt(u) - 1.0) ** 2


def _f_triangle(u):
    return (u - 1.0) ** 2 / (u + 1.0)


def _f_js(u):
    return np.log(2.0 / (1.0 + u)) + u * np.log(2.0 * u / (1.0 + u))


def _f_kl(u):
    return u * np.log(u)


@dataclass(frozen=True)
class DivergenceKind:
    """An f-divergence generator with its boundedness data.

    ``f_at_zero`` is lim_{u→0} f(u) and ``slope_at_infinity`` is
    lim_{u→∞} f(u)/u; together they give the limit conventions for terms
    where one side has no mass.
    """

    tag: DivergenceTag
    f: Optional[Callable[[np.ndarray], np.ndarray]]
    tau: float
    symmetric: bool
    f_at_zero: float = 0.0
    slope_at_infinity: float = 0.0

    @property
    def bounded(self) -> bool:
        return self.f is not None and math.isfinite(self.tau)

    @property
    def tight_tau(self) -> float:
        """max(lim_{u→0} f(u), lim_{u→∞} f(u)/u); never larger than ``tau``."""
        return max(self.f_at_zero, self.slope_at_infinity)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """f(u) for u ≥ 0, using the limit value at u = 0."""
        if self.f is None:
            raise UnsupportedKind(f"{self.tag.value} is not an f-divergence")
        u = np.asarray(u, dtype=np.float64)
        out = np.full(u.shape, self.f_at_zero, dtype=np.float64)
        positive = u > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            out[positive] = self.f(u[positive])
        return out

    def conjugate(self, u: np.ndarray) -> np.ndarray:
        """f*(u) = u·f(1/u) for u > 0."""
        u = np.asarray(u, dtype=np.float64)
        return u * self.evaluate(1.0 / u)

    @cached_property
    def g(self) -> "GFunction":
        return GFunction(self)


@dataclass(frozen=True)
class GFunction:
    """g(x) = ½(f(x) + x·f(1/x)), the symmetrized generator.

    g(1) = 0 and g ≥ 0; for bounded kinds g ≤ τ on [0, 1]. At x = 0 the
    limit ½(f(0) + lim f(u)/u) is used.
    """

    kind: DivergenceKind

    @property
    def at_zero(self) -> float:
        return 0.5 * (self.kind.f_at_zero + self.kind.slope_at_infinity)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.full(x.shape, self.at_zero, dtype=np.float64)
        positive = x > 0.0
        xp = x[positive]
        out[positive] = 0.5 * (self.kind.evaluate(xp) + xp * self.kind.evaluate(1.0 / xp))
        return out


L1 = DivergenceKind(DivergenceTag.L1, _f_l1, BOUNDED_TAU, True, 1.0, 1.0)
L2_SQUARED = DivergenceKind(DivergenceTag.L2_SQUARED, None, math.inf, True)
HELLINGER = DivergenceKind(DivergenceTag.HELLINGER, _f_hellinger, BOUNDED_TAU, True, 1.0, 1.0)
JENSEN_SHANNON = DivergenceKind(DivergenceTag.JENSEN_SHANNON, _f_js, BOUNDED_TAU, True,
                                math.log(2.0), math.log(2.0))
TRIANGLE = DivergenceKind(DivergenceTag.TRIANGLE, _f_triangle, BOUNDED_TAU, True, 1.0, 1.0)
KL = DivergenceKind(DivergenceTag.KL, _f_kl, math.inf, False, 0.0, math.inf)

KINDS = {kind.tag: kind for kind in (L1, L2_SQUARED, HELLINGER, JENSEN_SHANNON, TRIANGLE, KL)}
BOUNDED_KINDS = (L1, HELLINGER, JENSEN_SHANNON, TRIANGLE)


def kind_by_name(name: str) -> DivergenceKind:
    """Resolve a CLI/report name (``js``, ``l1``, ...) to its kind."""
    try:
        return KINDS[DivergenceTag(name.lower())]
    except ValueError:
        valid = ", ".join(tag.value for tag in DivergenceTag)
        raise UnsupportedKind(f"unknown divergence '{name}' (expected one of {valid})")


# --- Exact quantities ---

def _check_pair(p: Distribution, q: Distribution):
    if p.n != q.n:
        raise DimensionMismatch(f"base sizes differ: {p.n} vs {q.n}")


def entropy_exact(p: Distribution) -> float:
    """H(p) = Σ p_i log2(1/p_i) in bits, with 0·log(1/0) = 0."""
    mass = p.probs[p.probs > 0.0]
    return float(-(mass * np.log2(mass)).sum())


def empirical_entropy(counts) -> float:
    """Entropy in bits of the empirical distribution of a frequency vector."""
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        return 0.0
    m = c.sum()
    return float(((c / m) * np.log2(m / c)).sum())


def divergence_exact(kind: DivergenceKind, p: Distribution, q: Distribution) -> float:
    """D_f(p, q) = Σ p_i f(q_i/p_i) with the limit conventions.

    Terms with p_i = q_i = 0 vanish, terms with q_i = 0 < p_i contribute
    p_i·f(0), and terms with p_i = 0 < q_i contribute q_i·lim f(u)/u. When
    that limit is infinite (KL) the result is ``INFINITE_DIVERGENCE``.
    """
    _check_pair(p, q)
    if kind.tag is DivergenceTag.L2_SQUARED:
        return float(((p.probs - q.probs) ** 2).sum())

    pp, qq = p.probs, q.probs
    both = (pp > 0.0) & (qq > 0.0)
    p_only = (pp > 0.0) & (qq == 0.0)
    q_only = (pp == 0.0) & (qq > 0.0)

    if np.any(q_only) and not math.isfinite(kind.slope_at_infinity):
        logger.debug(f"divergence_exact: {kind.tag.value} infinite "
                     f"({int(q_only.sum())} items with mass only in q)")
        return INFINITE_DIVERGENCE

    total = float((pp[both] * kind.evaluate(qq[both] / pp[both])).sum())
    total += kind.f_at_zero * float(pp[p_only].sum())
    if np.any(q_only):
        total += kind.slope_at_infinity * float(qq[q_only].sum())
    return total


def divergence_via_g(kind: DivergenceKind, p: Distribution, q: Distribution) -> float:
    """Two-sided g-sum Σ_{p>q} p g(q/p) + Σ_{q>p} q g(p/q).

    Equals ``divergence_exact`` for symmetric bounded kinds.
    """
    if not (kind.symmetric and kind.bounded):
        raise UnsupportedKind(f"{kind.tag.value} is not a symmetric bounded f-divergence")
    _check_pair(p, q)
    pp, qq = p.probs, q.probs
    p_side = pp > qq
    q_side = qq > pp
    total = float((pp[p_side] * kind.g(qq[p_side] / pp[p_side])).sum())
    total += float((qq[q_side] * kind.g(pp[q_side] / qq[q_side])).sum())
    return total


def l1_distance(p: Distribution, q: Distribution) -> float:
    _check_pair(p, q)
    return float(np.abs(p.probs - q.probs).sum())


def l2_distance(p: Distribution, q: Distribution) -> float:
    _check_pair(p, q)
    return float(np.sqrt(((p.probs - q.probs) ** 2).sum()))


def linf_norm(p: Distribution) -> float:
    return float(p.probs.max())


def tail_entropy_bound(mass: float, set_size: int) -> float:
    """Largest entropy contribution (bits) of ``set_size`` items holding
    total ``mass``: mass·log2(set_size/mass), 0 for empty mass."""
    if not 0.0 <= mass <= 1.0:
        raise ContractViolation(f"mass {mass} outside [0, 1]")
    if set_size < 1:
        raise ContractViolation(f"set_size must be positive, got {set_size}")
    if mass == 0.0:
        return 0.0
    return mass * math.log2(set_size / mass)


# Slack on the Hoeffding comparison so exact boundary cases are not lost to
# the last bit of exp/log rounding
_HOEFFDING_RTOL = 1e-12


def required_samples(epsilon: float, delta: float, mean_lb: float, range_u: float) -> int:
    """Smallest m with 2·exp(−ε²·μ·m / (3u)) ≤ δ.

    ``mean_lb`` lower-bounds the mean μ of m independent variables with
    range [0, u]; with that many draws the empirical mean is within a
    (1 ± ε) factor of μ with probability at least 1 − δ.
    """
    if min(epsilon, delta, mean_lb, range_u) <= 0:
        raise ContractViolation("required_samples arguments must be positive")
    if epsilon > 1:
        raise ContractViolation(f"epsilon must be at most 1, got {epsilon}")
    rate = epsilon * epsilon * mean_lb / (3.0 * range_u)

    def fails(m: int) -> bool:
        return 2.0 * math.exp(-rate * m) > delta * (1.0 + _HOEFFDING_RTOL)

    m = max(1, math.ceil(math.log(2.0 / delta) / rate) if delta < 2.0 else 1)
    while m > 1 and not fails(m - 1):
        m -= 1
    while fails(m):
        m += 1
    return m


# --- Distribution files ---

def format_distribution(p: Distribution) -> str:
    """``#n=<n>`` then ``<i>\\t<p_i>`` for every supported index."""
    lines = [f"#n={p.n}"]
    lines.extend(f"{i}\t{float(p.probs[i])!r}" for i in p.support)
    return "\n".join(lines) + "\n"


def save_distribution(p: Distribution, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(format_distribution(p), encoding="utf-8")
    logger.debug(f"save_distribution: wrote {path} (n={p.n}, support={p.support.size})")
    return path


def parse_distribution(text: str) -> Distribution:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("#n="):
        raise InvalidDistribution("missing '#n=<n>' header")
    try:
        n = int(lines[0][3:])
    except ValueError:
        raise InvalidDistribution(f"bad header {lines[0]!r}")
    if n < 1:
        raise InvalidDistribution(f"n must be positive, got {n}")
    probs = np.zeros(n)
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2:
            raise InvalidDistribution(f"line {lineno}: expected '<i>\\t<p_i>'")
        try:
            i, mass = int(parts[0]), float(parts[1])
        except ValueError:
            raise InvalidDistribution(f"line {lineno}: unparseable entry {line!r}")
        if not 0 <= i < n:
            raise InvalidDistribution(f"line {lineno}: index {i} outside [0, {n})")
        if i in seen:
            raise InvalidDistribution(f"line {lineno}: index {i} listed twice")
        seen.add(i)
        probs[i] = mass
    return Distribution(probs)


def load_distribution(path: PathLike) -> Distribution:
    """Read a distribution file, rejecting any that violates the invariants."""
    return parse_distribution(Path(path).read_text(encoding="utf-8"))
