import numpy as np
import pytest

from infostream.errors import ContractViolation
from infostream.streaming.sketches import (
    F0Sketch, f0_estimate, f0_insert, hash_items, repetitions_for, splitmix64, unit_interval,
)


def test_splitmix64_is_deterministic_and_spreads():
    x = np.arange(1000, dtype=np.uint64)
    h = splitmix64(x)
    np.testing.assert_array_equal(h, splitmix64(x))
    assert np.unique(h).size == 1000
    assert h.dtype == np.uint64


def test_hash_salt_changes_output():
    items = np.arange(50)
    assert not np.array_equal(hash_items(items, 1), hash_items(items, 2))


def test_unit_interval_range():
    u = unit_interval(hash_items(np.arange(100_000), 7))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_repetitions_are_odd():
    for delta in (0.5, 0.1, 0.05, 0.01, 1e-6):
        reps = repetitions_for(delta)
        assert reps % 2 == 1
        assert reps >= np.log(1 / delta)


def test_exact_below_k():
    sketch = F0Sketch(0.05, 0.05, seed=1)
    for item in [3, 5, 3, 9, 5, 5]:
        f0_insert(sketch, item)
    assert f0_estimate(sketch) == 3.0


def test_duplicates_do_not_change_estimate():
    items = np.arange(20_000)
    once = F0Sketch(0.1, 0.05, seed=2)
    once.insert_many(items)
    twice = F0Sketch(0.1, 0.05, seed=2)
    twice.insert_many(items)
    twice.insert_many(items[::-1])
    assert once.estimate() == twice.estimate()


def test_space_bounded_by_k():
    sketch = F0Sketch(0.1, 0.05, seed=3)
    sketch.insert_many(np.arange(100_000))
    assert sketch.space_words == sketch.repetitions * (sketch.k + 1)
    assert sketch.get_info()["k"] == sketch.k


def test_parameter_validation():
    with pytest.raises(ContractViolation):
        F0Sketch(0.0)
    with pytest.raises(ContractViolation):
        F0Sketch(0.1, delta=1.0)


@pytest.mark.parametrize("distinct", [100, 10_000, 100_000])
def test_relative_error_within_epsilon(distinct):
    eps0, delta = 0.05, 0.05
    rng = np.random.default_rng(distinct)
    hits = 0
    for trial in range(100):
        sketch = F0Sketch(eps0, delta, seed=trial)
        items = rng.choice(10 ** 9, size=distinct, replace=False)
        sketch.insert_many(np.concatenate([items, items[: distinct // 3]]))
        hits += abs(sketch.estimate() - distinct) <= eps0 * distinct
    assert hits >= 95
