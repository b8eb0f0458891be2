import numpy as np
import pytest

from conftest import zipf
from infostream.dist_core import Distribution, empirical_entropy
from infostream.errors import ContractViolation, StreamOrderError
from infostream.oracles import Target
from infostream.streaming.random_order import grouped_entropy, random_stream_entropy
from infostream.streaming.tokens import StreamOrder, TokenStream, generate_stream


def _near_point_mass(n, m, seed):
    counts = np.zeros(n, dtype=np.int64)
    counts[0], counts[1] = m - 1, 1
    return TokenStream.from_counts(counts, seed=seed)


def test_grouped_entropy_matches_full_entropy():
    counts = np.array([5, 3, 2])
    residual = empirical_entropy(np.array([3, 2]))
    assert grouped_entropy([5], 10, residual, 5) == pytest.approx(empirical_entropy(counts))
    assert grouped_entropy([], 10, empirical_entropy(counts), 10) == pytest.approx(empirical_entropy(counts))
    assert grouped_entropy([10], 10, 0.0, 0) == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_near_point_mass_is_exact(seed):
    stream = _near_point_mass(100, 10_000, seed)
    report = random_stream_entropy(stream, 0.1, seed=seed)
    assert report.absorbed >= 1
    assert report.exact_residual
    assert report.estimate == pytest.approx(empirical_entropy(stream.counts()), rel=1e-9)


def test_dominant_item_is_absorbed_and_residual_measured_exactly():
    weights = np.full(1000, 0.1 / 999)
    weights[0] = 0.9
    stream = generate_stream(Distribution.from_weights(weights), 100_000, StreamOrder.SHUFFLED, seed=6)
    report = random_stream_entropy(stream, 0.2, seed=6)
    assert report.absorbed >= 1
    assert report.exact_residual
    assert report.estimate == pytest.approx(empirical_entropy(stream.counts()), rel=1e-9)


def test_uniform_stream_within_factor():
    eps = 0.2
    stream = generate_stream(Distribution.uniform(1000), 100_000, StreamOrder.SHUFFLED, seed=3)
    h = empirical_entropy(stream.counts(Target.P))
    report = random_stream_entropy(stream, eps, seed=3)
    assert report.absorbed == 0
    assert not report.exact_residual
    assert h / (1 + eps) <= report.estimate <= h * (1 + eps)
    assert report.to_dict()["t"] == report.t


def test_as_given_stream_rejected():
    stream = generate_stream(Distribution.uniform(10), 100, seed=1)
    with pytest.raises(StreamOrderError):
        random_stream_entropy(stream, 0.1)


def test_empty_stream_is_zero():
    stream = TokenStream.from_items(8, [], order=StreamOrder.SHUFFLED)
    report = random_stream_entropy(stream, 0.1)
    assert report.estimate == 0.0
    assert report.m == 0


def test_epsilon_validation():
    stream = TokenStream.from_counts([3, 4], seed=0)
    with pytest.raises(ContractViolation):
        random_stream_entropy(stream, 0.0)


@pytest.mark.slow
@pytest.mark.parametrize("make_dist", [
    lambda n: Distribution.uniform(n),
    zipf,
    lambda n: Distribution.from_weights(np.r_[n * 10.0, np.ones(n - 1)]),
])
def test_acceptance_within_factor(make_dist):
    n, m, eps = 10 ** 4, 10 ** 6, 0.2
    hits = 0
    for seed in range(100):
        stream = generate_stream(make_dist(n), m, StreamOrder.SHUFFLED, seed=seed)
        h = empirical_entropy(stream.counts(Target.P))
        estimate = random_stream_entropy(stream, eps, seed=seed).estimate
        hits += h / (1 + eps) <= estimate <= h * (1 + eps)
    assert hits >= 90
