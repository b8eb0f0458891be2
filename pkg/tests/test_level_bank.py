import math

import numpy as np
import pytest

from conftest import zipf
from infostream.dist_core import Distribution, empirical_entropy
from infostream.errors import ContractViolation, LadderOverflow
from infostream.oracles import Target
from infostream.streaming.level_bank import (
    F0EntropyEstimator, bias_adjusted, dilation, entropy_sandwich, expected_raw_sum,
    f0_entropy_estimate, inclusion_probability, inclusion_sandwich, level_count,
)
from infostream.streaming.tokens import TokenStream, generate_stream


def test_level_count_and_dilation():
    assert level_count(1024, 0.1) == math.ceil(math.log2(10240))
    assert dilation(0.1) == pytest.approx(1.21)


def test_inclusion_probability_inside_sandwich():
    eps = 0.1
    m_tilde = 1_000_000.0
    for m in (1_000_000, 1_050_000, 1_099_999):
        for p_i in (1e-5, 1e-4, 1e-3):
            for level in range(1, 12):
                if p_i * 2 ** level > 1:
                    continue
                low, high = inclusion_sandwich(p_i, eps, level)
                value = inclusion_probability(p_i, m, m_tilde, dilation(eps), level)
                assert low - 1e-12 <= value <= high + 1e-12


def test_expected_raw_sum_inside_entropy_sandwich():
    n, m, eps = 1024, 2 ** 20, 0.1
    counts = np.full(n, m // n)
    low, high = entropy_sandwich(empirical_entropy(counts), eps)
    assert low <= expected_raw_sum(counts, m / 1.05, eps) <= high


def test_bias_adjusted_inverts_lower_edge():
    eps, h = 0.1, 9.0
    low, _ = entropy_sandwich(h, eps)
    assert bias_adjusted(low + 2.0, eps) == pytest.approx(h - 1.0)


def test_estimator_validation():
    with pytest.raises(ContractViolation):
        F0EntropyEstimator(100, 0.0, 0.05, 1000)
    with pytest.raises(ContractViolation):
        F0EntropyEstimator(100, 0.1, 0.05, 0)


def test_ladder_overflow():
    estimator = F0EntropyEstimator(16, 0.5, 0.2, max_length=10)
    with pytest.raises(LadderOverflow):
        estimator.insert_many(np.zeros(5000, dtype=np.int64))


def test_selected_guess_brackets_length():
    stream = generate_stream(Distribution.uniform(64), 20_000, seed=2)
    report = f0_entropy_estimate(stream, 0.1, 0.1, seed=2)
    assert report.m == 20_000
    assert report.m_tilde <= report.m < 1.1 * report.m_tilde
    assert report.raw > 0
    info = report.to_dict(6.0)
    assert set(info) >= {"raw", "bias_adjusted", "sandwich", "widened_sandwich", "space_words"}


def test_empty_stream_reports_zero():
    report = f0_entropy_estimate(TokenStream.from_items(8, []), 0.1, 0.1)
    assert report.raw == 0.0


def test_point_mass_stream_is_small():
    stream = TokenStream.from_items(256, np.zeros(50_000, dtype=np.int64))
    report = f0_entropy_estimate(stream, 0.1, 0.1, seed=1)
    # at most one distinct item per level
    assert report.raw <= 1.0


def test_uniform_stream_inside_widened_sandwich():
    n, m = 256, 2 ** 16
    inside = 0
    for seed in range(10):
        stream = generate_stream(Distribution.uniform(n), m, seed=seed)
        h = empirical_entropy(stream.counts(Target.P))
        report = f0_entropy_estimate(stream, 0.1, 0.05, epsilon_c=0.1, seed=seed)
        low, high = report.widened_sandwich(h)
        inside += low <= report.raw <= high
    assert inside >= 9


@pytest.mark.slow
@pytest.mark.parametrize("make_dist", [lambda n: Distribution.uniform(n), zipf])
def test_acceptance_widened_sandwich(make_dist):
    n, m = 10 ** 4, 10 ** 6
    inside = 0
    for seed in range(50):
        stream = generate_stream(make_dist(n), m, seed=seed)
        h = empirical_entropy(stream.counts(Target.P))
        report = f0_entropy_estimate(stream, 0.1, 0.05, epsilon_c=0.1, seed=seed)
        low, high = report.widened_sandwich(h)
        inside += low <= report.raw <= high
    assert inside >= 45


@pytest.mark.slow
def test_space_does_not_grow_with_length():
    n, eps, eps0 = 10 ** 4, 0.1, 0.05
    spaces = []
    for m in (10 ** 5, 10 ** 6):
        stream = generate_stream(Distribution.uniform(n), m, seed=m)
        spaces.append(f0_entropy_estimate(stream, eps, eps0, max_length=10 ** 6, seed=1).space_words)

    estimator = F0EntropyEstimator(n, eps, eps0, max_length=10 ** 6)
    per_bank = estimator.levels * len(estimator.hash_salts) * (math.ceil(4.0 / eps0 ** 2) + 1) + 2
    live_banks = math.ceil(math.log(2 * n / eps) / math.log1p(eps)) + 2
    budget = 2 * per_bank * live_banks + 1 + estimator.levels
    assert max(spaces) <= budget
