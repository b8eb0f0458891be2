import math

import numpy as np
import pytest
from scipy import stats

from conftest import random_pair, zipf
from infostream.dist_core import (
    HELLINGER, JENSEN_SHANNON, KL, L1, L2_SQUARED, TRIANGLE, Distribution, divergence_exact,
    entropy_exact, l1_distance,
)
from infostream.errors import ContractViolation, UnsupportedKind
from infostream.oracles import OracleSession, Target, make_rng
from infostream.testers import (
    DeltaTestParams, Verdict, branch_contributions, collision_l2_squared, combined_distance_estimate,
    combined_distance_run, combined_distance_test, combined_entropy_estimate, combined_entropy_run,
    combined_l2_estimate, delta_test, delta_test_sample_count, entropy_cutoff, filter_draws,
    halving_iteration_cap, hard_instance_distinguishing_rate, hard_l1_instance, heavy_sample_count,
    heavy_set, l2_closeness_test, l2_sample_count,
)


def _perturbed_pair(n=64, shift=0.5, seed=0):
    """Uniform p and q = p·(1 ± shift) on alternating items, relabeled."""
    q = np.full(n, 1.0 / n)
    q[0::2] *= 1.0 + shift
    q[1::2] *= 1.0 - shift
    perm = make_rng(seed, "pair").permutation(n)
    return Distribution(np.full(n, 1.0 / n)), Distribution(q[perm])


# --- ℓ2 and Δ testing ---

def test_l2_sample_count_grows_with_accuracy():
    assert l2_sample_count(0.1, 0.05, 0.01) < l2_sample_count(0.05, 0.05, 0.01)
    with pytest.raises(ContractViolation):
        l2_sample_count(0.0, 0.05, 0.1)


def test_collision_statistic_is_unbiased(rng):
    p = Distribution.from_weights([4, 3, 2, 1])
    q = Distribution.from_weights([1, 2, 3, 4])
    exact = divergence_exact(L2_SQUARED, p, q)
    values = [collision_l2_squared(p.alias.draw(rng, 200), q.alias.draw(rng, 200), 4)
              for _ in range(400)]
    assert np.mean(values) == pytest.approx(exact, abs=4 * np.std(values) / math.sqrt(400))


def test_l2_closeness_endpoints():
    n = 1000
    uniform = Distribution.uniform(n)
    halves = Distribution.uniform(n, support=n // 2)
    b = 2.0 / n
    eps = 0.5 * divergence_exact(L2_SQUARED, uniform, halves) ** 0.5

    same = l2_closeness_test(OracleSession(uniform, uniform, seed=1), eps, 0.05, b)
    assert same.verdict is Verdict.PASS
    far = l2_closeness_test(OracleSession(uniform, halves, seed=2), eps, 0.05, b)
    assert far.verdict is Verdict.FAIL


def test_heavy_set():
    counts_p = np.array([50, 1, 0, 30])
    counts_q = np.array([0, 40, 2, 10])
    assert heavy_set(counts_p, counts_q, 100, 100, 0.5).tolist() == [0, 1, 3]


def test_delta_params_validation():
    with pytest.raises(ContractViolation):
        DeltaTestParams(epsilon=0.1, delta=0.05, m=10, alpha=1.0)
    params = DeltaTestParams.for_domain(1000, 0.5)
    assert params.m == delta_test_sample_count(1000, 0.5)


def test_delta_test_fails_on_heavy_disagreement():
    p = Distribution(np.array([0.9, 0.1]))
    q = Distribution(np.array([0.1, 0.9]))
    params = DeltaTestParams(epsilon=0.5, delta=0.05, m=2000)
    outcome = delta_test(OracleSession(p, q, seed=3), params)
    assert outcome.verdict is Verdict.FAIL
    assert outcome.stage == "heavy"


@pytest.mark.slow
def test_delta_test_endpoints():
    n = 10 ** 4
    uniform = Distribution.uniform(n)
    first = Distribution.uniform(n, support=n // 2)
    second = Distribution(first.probs[::-1].copy())
    params = DeltaTestParams.for_domain(n, 0.5)

    passes = sum(delta_test(OracleSession(uniform, uniform, seed=s), params).passed for s in range(100))
    fails = sum(not delta_test(OracleSession(first, second, seed=s), params).passed for s in range(100))
    assert passes >= 95
    assert fails >= 95


def test_heavy_sample_count_scaling():
    base = heavy_sample_count(1000, 0.5)
    assert heavy_sample_count(1000, 0.25) == pytest.approx(4 * base, abs=4)
    assert delta_test_sample_count(1000, 0.5) >= base
    with pytest.raises(ContractViolation):
        heavy_sample_count(1000, 0.0)


def test_delta_test_requires_heavy_sample_count():
    u = Distribution.uniform(1000)
    with pytest.raises(ContractViolation, match="heavy estimates"):
        delta_test(OracleSession(u, u, seed=0), DeltaTestParams(epsilon=0.5, delta=0.05, m=100))
    assert DeltaTestParams.for_domain(1000, 0.5).m >= heavy_sample_count(1000, 0.5)


@pytest.mark.slow
def test_heavy_estimates_within_gamma_hundredth():
    n, gamma, delta = 16, 1.0, 0.05
    # a constant of 10^4 puts the 1/100 accuracy back into the count
    m = heavy_sample_count(n, gamma, delta=delta, constant=1e4)
    weights = np.concatenate([[0.4, 0.3, 0.2], np.full(13, 0.1 / 13)])
    p, q = Distribution(weights), Distribution(weights[::-1].copy())
    cut = m * n ** (-2.0 / 3.0)
    good = 0
    for seed in range(40):
        session = OracleSession(p, q, seed=seed)
        ok = True
        for target, dist in ((Target.P, p), (Target.Q, q)):
            counts = np.bincount(session.sample_many(target, m), minlength=n)
            heavy = counts >= cut
            assert heavy.sum() == 3
            error = np.abs(counts[heavy] / m - dist.probs[heavy])
            ok = ok and bool(np.all(error <= dist.probs[heavy] * gamma / 100.0))
        good += ok
    assert good >= 39


def test_filtered_distributions_are_valid_and_flat():
    n, eps = 1000, 0.5
    params = DeltaTestParams.for_domain(n, eps)
    p, q = zipf(n), Distribution.uniform(n)
    ceiling = n ** (-params.alpha) * (1.0 + eps)
    for seed in range(20):
        session = OracleSession(p, q, seed=seed)
        counts_p = np.bincount(session.sample_many(Target.P, params.m), minlength=n)
        counts_q = np.bincount(session.sample_many(Target.Q, params.m), minlength=n)
        heavy = heavy_set(counts_p, counts_q, params.m, n, params.alpha)
        assert heavy.size > 0
        for dist in (p, q):
            filtered = dist.probs.copy()
            moved = filtered[heavy].sum()
            filtered[heavy] = 0.0
            filtered += moved / n
            assert Distribution(filtered).probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert filtered.max() < ceiling


def test_filter_draws_sample_the_filtered_distribution():
    n = 50
    p = zipf(n)
    is_heavy = np.zeros(n, dtype=bool)
    is_heavy[[0, 1, 2]] = True
    expected = p.probs.copy()
    moved = expected[is_heavy].sum()
    expected[is_heavy] = 0.0
    expected += moved / n

    draws = p.alias.draw(make_rng(0, "draws"), 200_000)
    before = draws.copy()
    out = filter_draws(draws, is_heavy, make_rng(1, "filter"))
    np.testing.assert_array_equal(draws, before)
    counts = np.bincount(out, minlength=n)
    assert stats.chisquare(counts, expected * out.size).pvalue > 1e-3


@pytest.mark.slow
def test_delta_test_passes_inside_pass_region():
    n, eps = 1000, 0.5
    p, q = _perturbed_pair(n, shift=0.1, seed=5)
    params = DeltaTestParams.for_domain(n, eps)
    assert divergence_exact(TRIANGLE, p, q) <= eps ** 2 / n ** (1.0 - params.alpha)
    passes = sum(delta_test(OracleSession(p, q, seed=s), params).passed for s in range(100))
    assert passes >= 95


# --- Combined-oracle distances ---

def test_branch_contributions():
    out = branch_contributions(L1, np.array([0.5, 0.2, 0.4]), np.array([0.25, 0.2, 0.8]))
    np.testing.assert_allclose(out, [0.5, 0.0, 0.0])
    sq = branch_contributions(L2_SQUARED, np.array([0.5]), np.array([0.0]))
    np.testing.assert_allclose(sq, [0.5])


def test_disjoint_l1_estimate_is_exact():
    p = Distribution.uniform(10, support=5)
    q = Distribution(p.probs[::-1].copy())
    for seed in range(5):
        session = OracleSession(p, q, seed=seed)
        assert combined_distance_run(session, L1, 500) == pytest.approx(2.0)


def test_disjoint_l1_estimate_with_halving():
    p = Distribution.uniform(10, support=5)
    q = Distribution(p.probs[::-1].copy())
    result = combined_distance_estimate(OracleSession(p, q, seed=0), L1, 0.1, 0.05)
    assert result.value == pytest.approx(2.0)
    assert result.guesses == [2.0]


def test_run_issues_two_samples_and_four_probes_per_iteration():
    p, q = _perturbed_pair()
    session = OracleSession(p, q, seed=0)
    combined_distance_run(session, HELLINGER, 100)
    trace = session.trace
    assert trace.samples[Target.P] == trace.samples[Target.Q] == 100
    assert trace.probes[Target.P] == trace.probes[Target.Q] == 200


def test_js_estimate_within_ten_percent():
    p, q = _perturbed_pair(seed=17)
    exact = divergence_exact(JENSEN_SHANNON, p, q)
    assert 0.05 <= exact <= 0.5
    hits = 0
    for seed in range(100):
        result = combined_distance_estimate(OracleSession(p, q, seed=seed), JENSEN_SHANNON,
                                            0.1, 0.05, lower_bound=exact)
        hits += abs(result.value - exact) <= 0.1 * exact
    assert hits >= 90


@pytest.mark.parametrize("kind", [HELLINGER, TRIANGLE, L1])
def test_bounded_kinds_track_exact_value(kind):
    p, q = _perturbed_pair(seed=3)
    exact = divergence_exact(kind, p, q)
    value = combined_distance_run(OracleSession(p, q, seed=8), kind, 200_000)
    assert value == pytest.approx(exact, rel=0.05)


def test_asymmetric_kind_rejected():
    p, q = _perturbed_pair()
    with pytest.raises(UnsupportedKind):
        combined_distance_estimate(OracleSession(p, q), KL, 0.1, 0.05)
    with pytest.raises(UnsupportedKind):
        combined_distance_estimate(OracleSession(p, q), L2_SQUARED, 0.1, 0.05)


def test_distance_test_verdicts():
    p = Distribution.uniform(10, support=5)
    q = Distribution(p.probs[::-1].copy())
    assert combined_distance_test(OracleSession(p, q, seed=1), L1, 0.5, 0.05).verdict is Verdict.FAIL
    assert combined_distance_test(OracleSession(p, p, seed=1), L1, 0.5, 0.05).verdict is Verdict.PASS


def test_l2_squared_two_point():
    p = Distribution(np.array([1.0, 0.0]))
    q = Distribution(np.array([0.0, 1.0]))
    result = combined_l2_estimate(OracleSession(p, q, seed=0), 0.1, 0.05)
    assert result.value == pytest.approx(2.0)


def test_l2_squared_matches_exact():
    p = Distribution(np.array([0.5, 0.5, 0.0, 0.0]))
    q = Distribution.uniform(4)
    exact = divergence_exact(L2_SQUARED, p, q)
    result = combined_l2_estimate(OracleSession(p, q, seed=5), 0.1, 0.05, iterations=200_000)
    assert result.value == pytest.approx(exact, rel=0.05)


@pytest.mark.parametrize("kind", [L1, HELLINGER, JENSEN_SHANNON, TRIANGLE, L2_SQUARED])
def test_increment_expectation_equals_divergence(kind, rng):
    for n in (2, 3, 8, 16):
        for _ in range(25):
            p, q = random_pair(rng, n)
            sp, sq = p.support, q.support
            a = branch_contributions(kind, p.probs[sp], q.probs[sp])
            b = branch_contributions(kind, q.probs[sq], p.probs[sq])
            # every (i, j) pair, i drawn from p and j from q
            weights = np.outer(p.probs[sp], q.probs[sq])
            expectation = float((weights * np.add.outer(a, b)).sum())
            assert expectation == pytest.approx(divergence_exact(kind, p, q), abs=1e-11)


@pytest.mark.parametrize("kind", [L1, HELLINGER, JENSEN_SHANNON, TRIANGLE])
def test_halving_returns_zero_when_p_equals_q(kind):
    u = Distribution.uniform(16)
    result = combined_distance_estimate(OracleSession(u, u, seed=1, budget=10 ** 6), kind, 0.1, 0.05)
    assert result.value == 0.0
    assert len(result.guesses) == 1


def test_l2_halving_returns_zero_when_p_equals_q():
    p = zipf(16)
    result = combined_l2_estimate(OracleSession(p, p, seed=1, budget=10 ** 6), 0.1, 0.05)
    assert result.value == 0.0
    assert len(result.guesses) == 1


def test_halving_stops_at_iteration_cap():
    p, q = _perturbed_pair(16, shift=1e-4)
    session = OracleSession(p, q, seed=2, budget=10 ** 6)
    result = combined_distance_estimate(session, L1, 0.1, 0.05)
    assert result.iterations == halving_iteration_cap(16, 0.1, 0.05)
    assert result.guesses[-1] < result.guesses[0]
    assert result.value == pytest.approx(l1_distance(p, q), rel=0.05)


# --- Combined-oracle entropy ---

def test_entropy_uniform_is_exact():
    session = OracleSession(Distribution.uniform(2 ** 16), seed=0)
    for _ in range(5):
        assert combined_entropy_run(session, 1000) == 16.0


def test_entropy_single_item_domain():
    assert combined_entropy_run(OracleSession(Distribution.point_mass(1), seed=0), 10) == 0.0


def test_entropy_dyadic_within_ten_percent():
    p = Distribution(np.array([0.5, 0.25, 0.25]))
    hits = 0
    for seed in range(100):
        result = combined_entropy_estimate(OracleSession(p, seed=seed), 0.1, 0.05, lower_bound=1.5)
        hits += abs(result.value - 1.5) <= 0.15
    assert hits >= 90


def test_entropy_halving_settles():
    p = zipf(500)
    result = combined_entropy_estimate(OracleSession(p, seed=2), 0.2, 0.05)
    assert result.guesses[0] == pytest.approx(math.log2(500))
    assert result.value == pytest.approx(entropy_exact(p), rel=0.2)


@pytest.mark.slow
def test_entropy_zipf_acceptance():
    n, eps = 10 ** 4, 0.1
    p = zipf(n)
    exact = entropy_exact(p)
    iterations = math.ceil(48 * math.log2(n) / (eps ** 2 * exact))
    hits = sum(abs(combined_entropy_run(OracleSession(p, seed=s), iterations) - exact) <= eps * exact
               for s in range(100))
    assert hits >= 90


def test_entropy_halving_returns_zero_for_point_mass():
    session = OracleSession(Distribution.point_mass(16, 3), seed=0, budget=10 ** 6)
    result = combined_entropy_estimate(session, 0.1, 0.05)
    assert result.value == 0.0
    assert len(result.guesses) == 1


def test_entropy_cutoff_discards_little(rng):
    eps = 0.1
    for n in (64, 512, 4096):
        cutoff = entropy_cutoff(n)
        for _ in range(20):
            w = rng.dirichlet(np.ones(n))
            dust = rng.random(n) < 0.3
            w[dust] = rng.uniform(0.0, 1.0, int(dust.sum())) * cutoff
            p = Distribution.from_weights(w)
            below = p.probs[(p.probs > 0.0) & (p.probs < cutoff)]
            assert below.sum() <= 1.0 / n ** 2
            dropped = float((below * np.log2(1.0 / below)).sum())
            assert dropped <= eps * entropy_exact(p)


def test_entropy_run_ignores_mass_below_cutoff():
    p = Distribution(np.array([0.5, 0.49, 0.009, 0.001]))
    assert entropy_cutoff(4) == pytest.approx(1.0 / 64)
    kept = 0.5 + 0.49 * math.log2(1.0 / 0.49)
    value = combined_entropy_run(OracleSession(p, seed=3), 200_000)
    assert value == pytest.approx(kept, rel=0.01)
    assert entropy_exact(p) - value <= 0.1 * entropy_exact(p)


# --- Hard instances ---

@pytest.mark.parametrize("far", [False, True])
def test_hard_instance_l1_values(far):
    instance = hard_l1_instance(3, 0.1, 0.5, far, 20_000, permute_seed=4)
    assert l1_distance(instance.p, instance.q) == pytest.approx(instance.expected_l1, rel=1e-12)
    assert instance.expected_l1 == pytest.approx(0.5 * (1.3 if far else 1.0))
    assert instance.describe()["n"] == 20_000


def test_hard_instance_validation():
    with pytest.raises(ContractViolation):
        hard_l1_instance(1, 0.1, 0.5, False, 1000)  # k/(3ε) not integral
    with pytest.raises(ContractViolation):
        hard_l1_instance(3, 0.1, 0.9, False, 1000)
    with pytest.raises(ContractViolation):
        hard_l1_instance(3, 0.1, 0.5, True, 30)


def test_distinguishing_rate_degrades_with_budget():
    budgets = [4, 16, 64, 256, 1024]
    rates = [hard_instance_distinguishing_rate(3, 0.1, 0.5, 20_000, m, trials=200, seed=1)
             for m in budgets]
    assert rates[-1] >= 0.95
    assert rates[-1] - rates[0] >= 0.2
    assert stats.spearmanr(budgets, rates).correlation >= 0.8


@pytest.mark.parametrize("far", [False, True])
def test_hard_instance_divergences_agree_off_the_overlap(far):
    instance = hard_l1_instance(3, 0.1, 0.5, far, 20_000, permute_seed=4)
    p, q = instance.p.probs, instance.q.probs
    shared = (p > 0) & (q > 0)
    np.testing.assert_array_equal(p[shared], q[shared])
    disagree = (p > 0) != (q > 0)
    restricted = float(np.abs(p - q)[disagree].sum())
    assert restricted == pytest.approx(instance.expected_l1, rel=1e-9)
    for kind in (TRIANGLE, HELLINGER, L1):
        assert divergence_exact(kind, instance.p, instance.q) == pytest.approx(restricted, rel=1e-9)
    # natural-log JS: ln 2 per unit of disjoint mass
    assert divergence_exact(JENSEN_SHANNON, instance.p, instance.q) == pytest.approx(
        math.log(2.0) * restricted, rel=1e-9)
