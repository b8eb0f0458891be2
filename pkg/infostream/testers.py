"""
Sublinear-sample testers and estimators in the oracle models.

- ``l2_closeness_test`` / ``delta_test``: generative-oracle closeness
  testing (collision statistic, heavy-element filtering).
- ``combined_distance_estimate`` / ``combined_l2_estimate`` /
  ``combined_entropy_estimate``: combined-oracle (1 ± ε) estimators with
  bounded per-iteration increments.
- ``hard_l1_instance``: the near/far instance family that forces
  Ω(1/(ε²·ℓ1)) oracle calls.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from infostream.dist_core import (
    L1, L2_SQUARED, DivergenceKind, DivergenceTag, Distribution, required_samples,
)
from infostream.errors import ContractViolation, InternalFault, UnsupportedKind
from infostream.oracles import OracleAccess, OracleSession, Target, make_rng

logger = logging.getLogger(__name__)

# Leading constant of the ℓ2 tester's sample count, calibrated on the two
# endpoint cases (p = q, and ℓ2 = 2ε on uniform halves at n = 1000). At 2 the
# p = q statistic sits about 3 standard deviations below the cut there.
L2_SAMPLE_CONSTANT = 2.0

# Leading constant of the Δ-tester's per-distribution sample count
DELTA_SAMPLE_CONSTANT = 1.0

# The ℓ2 tester passes when the collision estimate of ℓ2² is at most this
# fraction of ε²
L2_PASS_FRACTION = 0.75

# Fixed threshold divisor of the heavy-set statistic
HEAVY_STAT_DIVISOR = 10.0

DEFAULT_ALPHA = 2.0 / 3.0

# Halving mode never runs more iterations than
# HALVING_CAP_CONSTANT·n·ln(2/δ)/ε², and never more than MAX_HALVING_ITERATIONS
HALVING_CAP_CONSTANT = 4.0
MAX_HALVING_ITERATIONS = 10 ** 7

# Slack on the runtime range assertion of normalized increments
_RANGE_SLACK = 1e-12


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass
class TestOutcome:
    """Verdict of a closeness tester with the statistic that decided it."""

    verdict: Verdict
    m: int
    statistic: float
    threshold: float
    stage: str = "l2"

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


@dataclass
class EstimateResult:
    """Estimator output with the iteration count of the final run and the
    lower-bound guesses tried (one entry unless halving was used)."""

    value: float
    iterations: int
    guesses: List[float] = field(default_factory=list)

    def __float__(self) -> float:
        return self.value


# --- ℓ2 closeness (generative) ---

def l2_sample_count(epsilon: float, delta: float, b: float,
                    constant: float = L2_SAMPLE_CONSTANT) -> int:
    """s = C·ln(1/δ)·(b² + ε²·√b)/ε⁴ samples per distribution."""
    if epsilon <= 0 or not 0 < delta < 1 or b <= 0:
        raise ContractViolation("l2_sample_count needs epsilon > 0, delta in (0,1), b > 0")
    return max(2, math.ceil(constant * math.log(1.0 / delta)
                            * (b * b + epsilon * epsilon * math.sqrt(b)) / epsilon ** 4))


def collision_l2_squared(xs: np.ndarray, ys: np.ndarray, n: int) -> float:
    """Unbiased estimate of ℓ2²(p, q) from self- and cross-collision counts."""
    cp = np.bincount(xs, minlength=n).astype(np.float64)
    cq = np.bincount(ys, minlength=n).astype(np.float64)
    sp, sq = float(xs.size), float(ys.size)
    self_p = float((cp * (cp - 1.0)).sum()) / (sp * (sp - 1.0))
    self_q = float((cq * (cq - 1.0)).sum()) / (sq * (sq - 1.0))
    cross = float((cp * cq).sum()) / (sp * sq)
    return self_p + self_q - 2.0 * cross


def _l2_verdict(xs: np.ndarray, ys: np.ndarray, n: int, epsilon: float) -> TestOutcome:
    statistic = collision_l2_squared(xs, ys, n)
    threshold = L2_PASS_FRACTION * epsilon * epsilon
    verdict = Verdict.PASS if statistic <= threshold else Verdict.FAIL
    return TestOutcome(verdict, int(xs.size), statistic, threshold, stage="l2")


def l2_closeness_test(session: OracleAccess, epsilon: float, delta: float, b_hint: float,
                      constant: float = L2_SAMPLE_CONSTANT) -> TestOutcome:
    """Pass w.p. ≥ 1−δ when ℓ2(p,q) ≤ ε/2, fail w.p. ≥ 1−δ when ℓ2(p,q) ≥ ε.

    ``b_hint`` must upper-bound max_i max(p_i, q_i).
    """
    s = l2_sample_count(epsilon, delta, min(b_hint, 1.0), constant)
    xs = session.sample_many(Target.P, s)
    ys = session.sample_many(Target.Q, s)
    outcome = _l2_verdict(xs, ys, session.n, epsilon)
    logger.debug(f"l2 test: s={s}, stat={outcome.statistic:.3e}, "
                 f"threshold={outcome.threshold:.3e} -> {outcome.verdict.value}")
    return outcome


# --- Δ-testing (generative) ---

def heavy_sample_count(n: int, gamma: float, alpha: float = DEFAULT_ALPHA,
                       delta: float = 0.05, constant: float = DELTA_SAMPLE_CONSTANT) -> int:
    """C·ln(2/δ)·n^α·log n/γ² samples, after which every heavy estimate
    (≥ n^−α) is within p_i·γ/100 of p_i with probability 1 − δ/2.

    The 1/100 accuracy is folded into ``constant``.
    """
    if gamma <= 0 or not 0.0 < delta < 1.0:
        raise ContractViolation("heavy_sample_count needs gamma > 0 and delta in (0,1)")
    log_n = max(math.log2(n), 1.0)
    return math.ceil(constant * math.log(2.0 / delta) * n ** alpha * log_n / gamma ** 2)


def delta_test_sample_count(n: int, epsilon: float, alpha: float = DEFAULT_ALPHA,
                            delta: float = 0.05,
                            constant: float = DELTA_SAMPLE_CONSTANT) -> int:
    """Per-distribution sample count: the heavy-estimate count at γ = ε, or
    C·ln(1/δ)·(n^(2−2α) + ε²·n^(1−α/2))/ε⁴ when that is larger."""
    light_term = (n ** (2.0 - 2.0 * alpha) + epsilon ** 2 * n ** (1.0 - alpha / 2.0)) / epsilon ** 4
    return max(heavy_sample_count(n, epsilon, alpha, delta, constant),
               math.ceil(constant * math.log(1.0 / delta) * light_term))


@dataclass
class DeltaTestParams:
    """Parameters of the Δ-tester; ``m`` is the per-distribution sample count.

    ``m`` must reach ``heavy_sample_count`` at γ = ε for the domain being
    tested; ``require_domain`` checks that once n is known.
    """

    epsilon: float
    delta: float
    m: int
    alpha: float = DEFAULT_ALPHA
    sample_constant: float = DELTA_SAMPLE_CONSTANT

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ContractViolation(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon <= 0 or not 0.0 < self.delta < 1.0 or self.m < 1:
            raise ContractViolation("DeltaTestParams needs epsilon > 0, delta in (0,1), m >= 1")

    def require_domain(self, n: int):
        needed = heavy_sample_count(n, self.epsilon, self.alpha, self.delta, self.sample_constant)
        if self.m < needed:
            raise ContractViolation(f"m={self.m} is below the {needed} samples heavy estimates "
                                    f"need at n={n}, epsilon={self.epsilon}")

    @classmethod
    def for_domain(cls, n: int, epsilon: float, alpha: float = DEFAULT_ALPHA,
                   delta: float = 0.05, constant: float = DELTA_SAMPLE_CONSTANT) -> "DeltaTestParams":
        m = delta_test_sample_count(n, epsilon, alpha, delta, constant)
        return cls(epsilon=epsilon, delta=delta, m=m, alpha=alpha, sample_constant=constant)


def heavy_set(counts_p: np.ndarray, counts_q: np.ndarray, m: int, n: int,
              alpha: float) -> np.ndarray:
    """Indices whose larger sample count reaches m·n^(−α)."""
    return np.flatnonzero(np.maximum(counts_p, counts_q) >= m * n ** (-alpha))


def filter_draws(draws: np.ndarray, is_heavy: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Turn draws of p into draws of p′: every draw that lands on a heavy
    index is replaced by a uniform index over [n]."""
    out = np.array(draws, dtype=np.int64)
    replace = is_heavy[out]
    out[replace] = rng.integers(0, is_heavy.size, size=int(replace.sum()))
    return out


def delta_test(session: OracleAccess, params: DeltaTestParams,
               l2_constant: float = L2_SAMPLE_CONSTANT) -> TestOutcome:
    """Generative Δ-tester.

    Passes w.p. ≥ 1−δ when Δ(p,q) ≤ ε²/n^(1−α); passes w.p. < δ when
    Δ(p,q) ≥ ε. Heavy indices are judged directly from the empirical
    estimates; the rest is handed to the ℓ2 tester on the filtered
    distributions, in which every heavy index is replaced by a uniform one.
    """
    n, m = session.n, params.m
    eps, alpha = params.epsilon, params.alpha
    params.require_domain(n)

    counts_p = np.bincount(session.sample_many(Target.P, m), minlength=n)
    counts_q = np.bincount(session.sample_many(Target.Q, m), minlength=n)
    heavy = heavy_set(counts_p, counts_q, m, n, alpha)

    p_hat = counts_p[heavy] / m
    q_hat = counts_q[heavy] / m
    heavy_stat = float((((p_hat - q_hat) ** 2) / (p_hat + q_hat)).sum()) if heavy.size else 0.0
    heavy_threshold = eps / HEAVY_STAT_DIVISOR
    logger.debug(f"Delta test: n={n}, m={m}, |S|={heavy.size}, heavy_stat={heavy_stat:.4g}")
    if heavy_stat > heavy_threshold:
        return TestOutcome(Verdict.FAIL, m, heavy_stat, heavy_threshold, stage="heavy")

    # Filtered p′, q′ have max mass below n^(−α)(1 + ε) whp; that bound is the
    # ℓ2 tester's b
    l2_eps = eps / (2.0 * math.sqrt(n))
    b_hint = min(1.0, n ** (-alpha) * (1.0 + eps))
    s = l2_sample_count(l2_eps, params.delta, b_hint, l2_constant)
    is_heavy = np.zeros(n, dtype=bool)
    is_heavy[heavy] = True
    rng = make_rng(session.seed, "delta-filter")
    xs = filter_draws(session.sample_many(Target.P, s), is_heavy, rng)
    ys = filter_draws(session.sample_many(Target.Q, s), is_heavy, rng)

    outcome = _l2_verdict(xs, ys, n, l2_eps)
    outcome.m = m + s
    return outcome


# --- Combined-oracle estimators ---

def branch_contributions(kind: DivergenceKind, self_mass: np.ndarray,
                         other_mass: np.ndarray) -> np.ndarray:
    """Per-draw increment for an index drawn from the "self" distribution.

    Only the branch where the other side is lighter contributes: g(x) for
    f-divergences, self·(1 − x)² for ℓ2², with x = other/self < 1. Ties
    contribute 0. Summed over both sides these are unbiased for the
    divergence and each stays within [0, τ].
    """
    self_mass = np.asarray(self_mass, dtype=np.float64)
    ratio = np.asarray(other_mass, dtype=np.float64) / self_mass
    lighter = ratio < 1.0
    out = np.zeros(ratio.shape, dtype=np.float64)
    if kind.tag is DivergenceTag.L2_SQUARED:
        out[lighter] = self_mass[lighter] * (1.0 - ratio[lighter]) ** 2
    else:
        out[lighter] = kind.g(ratio[lighter])
    return out


def _increment_scale(kind: DivergenceKind, tau: Optional[float]) -> float:
    if kind.tag is DivergenceTag.L2_SQUARED:
        return 2.0
    if not (kind.symmetric and kind.bounded):
        raise UnsupportedKind(f"{kind.tag.value} is not a symmetric bounded f-divergence")
    return 2.0 * (kind.tau if tau is None else tau)


def _probe_sampled(session: OracleAccess, drawn_from: Target, idx: np.ndarray):
    """Probe both targets at indices sampled from ``drawn_from``."""
    mass_p = session.probe_many(Target.P, idx)
    mass_q = session.probe_many(Target.Q, idx)
    own = mass_p if drawn_from is Target.P else mass_q
    if np.any(own <= 0.0):
        raise InternalFault(f"sampled index with zero mass in '{drawn_from.value}'")
    return mass_p, mass_q


def _assert_unit_range(increments: np.ndarray, label: str):
    if increments.size and (increments.min() < -_RANGE_SLACK or increments.max() > 1.0 + _RANGE_SLACK):
        raise InternalFault(f"{label}: increment outside [0, 1] "
                            f"(min={increments.min()}, max={increments.max()})")


def combined_distance_run(session: OracleAccess, kind: DivergenceKind, iterations: int,
                          tau: Optional[float] = None) -> float:
    """One run of the combined-oracle divergence loop with a fixed count.

    Each iteration samples from p and from q (2 samples) and probes both
    targets at both draws (4 probes).
    """
    scale = _increment_scale(kind, tau)
    i = session.sample_many(Target.P, iterations)
    p_i, q_i = _probe_sampled(session, Target.P, i)
    j = session.sample_many(Target.Q, iterations)
    p_j, q_j = _probe_sampled(session, Target.Q, j)

    a = branch_contributions(kind, p_i, q_i)
    b = branch_contributions(kind, q_j, p_j)
    increments = (a + b) / scale
    _assert_unit_range(increments, "combined distance")
    return scale * float(increments.sum()) / iterations


def combined_distance_iterations(kind: DivergenceKind, epsilon: float, delta: float,
                                 lower_bound: float, tau: Optional[float] = None) -> int:
    scale = _increment_scale(kind, tau)
    return required_samples(epsilon, delta, min(lower_bound / scale, 1.0), 1.0)


def halving_iteration_cap(n: int, epsilon: float, delta: float) -> int:
    """Most iterations a single halving round may use."""
    return min(MAX_HALVING_ITERATIONS,
               math.ceil(HALVING_CAP_CONSTANT * n * math.log(2.0 / delta) / epsilon ** 2))


def _halving(run, iterations_for, start_guess: float, lower_bound: Optional[float],
             iterations: Optional[int], cap: int, label: str) -> EstimateResult:
    """Run with a known bound, a fixed count, or by halving a guessed bound
    until the estimate is at least half the guess.

    Increments are non-negative, so a run that sums to exactly 0 saw no
    disagreement at all and ends the search with 0. The search also ends
    once a round would need more than ``cap`` iterations (the first round
    is never cut short).
    """
    if iterations is not None:
        return EstimateResult(run(iterations), iterations)
    if lower_bound is not None:
        m = iterations_for(lower_bound)
        return EstimateResult(run(m), m, [lower_bound])

    cap = max(cap, iterations_for(start_guess))
    guess, guesses = start_guess, []
    while True:
        guesses.append(guess)
        m = iterations_for(guess)
        last = m >= cap
        m = min(m, cap)
        value = run(m)
        if value == 0.0:
            logger.debug(f"{label}: every increment was 0 at guess={guess:.4g} (m={m})")
            return EstimateResult(0.0, m, guesses)
        if value >= guess / 2.0 or last:
            logger.debug(f"{label}: halving settled at guess={guess:.4g} "
                         f"after {len(guesses)} rounds (m={m}{', capped' if last else ''})")
            return EstimateResult(value, m, guesses)
        guess /= 2.0


def combined_distance_estimate(session: OracleAccess, kind: DivergenceKind, epsilon: float,
                               delta: float, lower_bound: Optional[float] = None,
                               iterations: Optional[int] = None,
                               tau: Optional[float] = None) -> EstimateResult:
    """(1 ± ε)-estimate of a bounded symmetric f-divergence, w.p. ≥ 1 − δ.

    ``lower_bound`` (D_lb) sets the iteration count required_samples(ε, δ,
    D_lb/(2τ), 1); without it the bound is found by halving from τ.
    """
    if kind.tag is DivergenceTag.L2_SQUARED:
        raise UnsupportedKind("use combined_l2_estimate for l2 squared")
    scale = _increment_scale(kind, tau)
    return _halving(
        lambda m: combined_distance_run(session, kind, m, tau),
        lambda lb: combined_distance_iterations(kind, epsilon, delta, lb, tau),
        scale / 2.0, lower_bound, iterations,
        halving_iteration_cap(session.n, epsilon, delta), "Combined distance",
    )


def combined_distance_test(session: OracleAccess, kind: DivergenceKind, epsilon: float,
                           delta: float, tau: Optional[float] = None) -> TestOutcome:
    """Tell D_f(p,q) ≤ ε/2 (pass) from D_f(p,q) ≥ ε (fail) with the combined
    estimator run at lower bound ε/2 and relative accuracy 1/5; the cut
    sits at 0.7ε, between the two concentrated ranges."""
    m = combined_distance_iterations(kind, 0.2, delta, epsilon / 2.0, tau)
    value = combined_distance_run(session, kind, m, tau)
    threshold = 0.7 * epsilon
    verdict = Verdict.PASS if value <= threshold else Verdict.FAIL
    return TestOutcome(verdict, m, value, threshold, stage="combined")


def combined_l2_estimate(session: OracleAccess, epsilon: float, delta: float,
                         lower_bound: Optional[float] = None,
                         iterations: Optional[int] = None) -> EstimateResult:
    """(1 ± ε)-estimate of ℓ2²(p, q) in O(1/(ε²·ℓ2²)) calls."""
    return _halving(
        lambda m: combined_distance_run(session, L2_SQUARED, m),
        lambda lb: combined_distance_iterations(L2_SQUARED, epsilon, delta, lb),
        2.0, lower_bound, iterations,
        halving_iteration_cap(session.n, epsilon, delta), "Combined l2",
    )


def entropy_cutoff(n: int) -> float:
    """Masses below 1/n³ are ignored by the combined entropy estimator."""
    return float(n) ** -3


def combined_entropy_run(session: OracleAccess, iterations: int) -> float:
    """One run of the combined-oracle entropy loop (1 sample + 1 probe per
    iteration), in bits."""
    n = session.n
    if n < 2:
        return 0.0
    idx = session.sample_many(Target.P, iterations)
    mass = session.probe_many(Target.P, idx)
    if np.any(mass <= 0.0):
        raise InternalFault("sampled index with zero mass")
    bits = np.where(mass >= entropy_cutoff(n), -np.log2(mass), 0.0)
    _assert_unit_range(bits / (3.0 * math.log2(n)), "combined entropy")
    # Σ a·3·log n / m with a = bits/(3·log n), summed in bits to stay exact
    return float(bits.sum()) / iterations


def combined_entropy_iterations(n: int, epsilon: float, delta: float, lower_bound: float) -> int:
    log_n = math.log2(n) if n > 1 else 1.0
    return required_samples(epsilon / 2.0, delta, min(lower_bound / (3.0 * log_n), 1.0), 1.0)


def combined_entropy_estimate(session: OracleAccess, epsilon: float, delta: float,
                              lower_bound: Optional[float] = None,
                              iterations: Optional[int] = None) -> EstimateResult:
    """(1 ± ε)-estimate of H(p) in bits with O(log n/(ε²·H)) calls."""
    n = session.n
    return _halving(
        lambda m: combined_entropy_run(session, m),
        lambda lb: combined_entropy_iterations(n, epsilon, delta, lb),
        math.log2(n) if n > 1 else 1.0, lower_bound, iterations,
        halving_iteration_cap(n, epsilon, delta), "Combined entropy",
    )


# --- Hard instances ---

@dataclass
class HardInstance:
    """A near (ℓ1 = a) or far (ℓ1 = a(1+3ε)) pair from the lower-bound family."""

    p: Distribution
    q: Distribution
    a: float
    k: int
    epsilon: float
    r: int
    far: bool
    block: int

    @property
    def expected_l1(self) -> float:
        return self.a * (1.0 + 3.0 * self.epsilon) if self.far else self.a

    def describe(self) -> Dict[str, Any]:
        info = asdict(self)
        info.pop("p")
        info.pop("q")
        info["n"] = self.p.n
        info["expected_l1"] = self.expected_l1
        return info


def _integral(value: float, label: str) -> int:
    rounded = round(value)
    if rounded < 1 or abs(value - rounded) > 1e-9:
        raise ContractViolation(f"{label} must be a positive integer, got {value}")
    return int(rounded)


def hard_l1_instance(k: int, epsilon: float, a: float, far: bool, n: int,
                     permute_seed: int = 0) -> HardInstance:
    """Build p = (1−3a/2, k/ε atoms of 3aε/(2k), 0, …) and q with the atom
    block shifted by r = k/(3ε) (near) or k/(3ε)+k (far), both relabeled by
    the same seeded permutation."""
    if not 0.0 < a <= 2.0 / 3.0:
        raise ContractViolation(f"a must lie in (0, 2/3], got {a}")
    if not 0.0 < epsilon <= 2.0 / 3.0:
        raise ContractViolation(f"epsilon must lie in (0, 2/3], got {epsilon}")
    block = _integral(k / epsilon, "k/epsilon")
    r = _integral(k / (3.0 * epsilon), "k/(3 epsilon)") + (k if far else 0)
    if n < 1 + r + block:
        raise ContractViolation(f"n={n} too small for the shifted block (needs {1 + r + block})")
    if n < k / (a * epsilon ** 2):
        logger.warning(f"Hard instance: n={n} is not >> k/(a eps^2) = {k / (a * epsilon ** 2):.0f}; "
                       f"blind probes may hit the atom blocks")

    atom = 3.0 * a * epsilon / (2.0 * k)
    p = np.zeros(n)
    q = np.zeros(n)
    p[0] = q[0] = 1.0 - 1.5 * a
    p[1:1 + block] = atom
    q[1 + r:1 + r + block] = atom

    perm = make_rng(permute_seed, "hard-l1").permutation(n)
    p_perm = np.empty(n)
    q_perm = np.empty(n)
    p_perm[perm] = p
    q_perm[perm] = q
    return HardInstance(Distribution(p_perm), Distribution(q_perm), a, k, epsilon, r, far, block)


def hard_instance_distinguishing_rate(k: int, epsilon: float, a: float, n: int,
                                      iterations: int, trials: int, seed: int = 0) -> float:
    """Balanced accuracy of telling near from far with the ℓ1 estimator at a
    fixed iteration budget, classifying by the midpoint a(1 + 1.5ε)."""
    near = hard_l1_instance(k, epsilon, a, False, n, permute_seed=seed)
    far = hard_l1_instance(k, epsilon, a, True, n, permute_seed=seed)
    cut = a * (1.0 + 1.5 * epsilon)
    correct = 0
    for trial in range(trials):
        est_near = combined_distance_run(OracleSession(near.p, near.q, seed=seed * 1_000_003 + 2 * trial),
                                         L1, iterations)
        est_far = combined_distance_run(OracleSession(far.p, far.q, seed=seed * 1_000_003 + 2 * trial + 1),
                                        L1, iterations)
        correct += int(est_near <= cut) + int(est_far > cut)
    rate = correct / (2.0 * trials)
    logger.debug(f"Hard instance: iterations={iterations}, distinguishing rate={rate:.3f}")
    return rate
