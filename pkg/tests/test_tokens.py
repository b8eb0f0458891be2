import numpy as np
import pytest

from infostream.dist_core import Distribution
from infostream.errors import ContractViolation, IndexOutOfRange
from infostream.oracles import Target
from infostream.streaming.tokens import (
    StreamOrder, TokenStream, generate_stream, load_stream, parse_stream, save_stream,
)


def test_generate_stream_frequencies_within_four_sigma():
    m = 10 ** 5
    stream = generate_stream(Distribution.uniform(2), m, seed=11)
    counts = stream.counts(Target.P)
    sigma = np.sqrt(m * 0.25)
    assert np.all(np.abs(counts - m / 2) <= 4 * sigma)
    assert stream.order is StreamOrder.AS_GIVEN
    assert not stream.random_order


def test_generate_pair_stream():
    p = Distribution.uniform(8)
    q = Distribution.point_mass(8, 5)
    stream = generate_stream(p, 100, StreamOrder.SHUFFLED, seed=3, q=q)
    assert stream.random_order
    assert stream.targets == (Target.P, Target.Q)
    assert stream.length(Target.P) == stream.length(Target.Q) == 100
    assert np.all(stream.project(Target.Q) == 5)


def test_generation_is_seeded():
    p = Distribution.from_weights(np.arange(1, 21))
    a = generate_stream(p, 500, StreamOrder.SHUFFLED, seed=9)
    b = generate_stream(p, 500, StreamOrder.SHUFFLED, seed=9)
    np.testing.assert_array_equal(a.items, b.items)


def test_shuffle_preserves_multiset():
    stream = TokenStream.from_counts([3, 0, 5, 2])
    shuffled = stream.shuffled(4)
    np.testing.assert_array_equal(shuffled.counts(), [3, 0, 5, 2])
    assert shuffled.random_order
    assert TokenStream.from_counts([1, 1], seed=0).random_order


def test_chunks_cover_stream_in_order():
    stream = TokenStream.from_items(10, np.arange(10) % 10)
    stream.chunk_size = 3
    pieces = list(stream.chunks())
    assert [offset for offset, _, _ in pieces] == [0, 3, 6, 9]
    np.testing.assert_array_equal(np.concatenate([items for _, _, items in pieces]), stream.items)


def test_stream_validation():
    with pytest.raises(IndexOutOfRange):
        TokenStream.from_items(3, [0, 3])
    with pytest.raises(ContractViolation):
        TokenStream(3, np.array([0, 1]), np.array([0, 2]))
    with pytest.raises(ContractViolation):
        generate_stream(Distribution.uniform(2), 0)


def test_stream_file_round_trip(tmp_path):
    p = Distribution.uniform(6)
    stream = generate_stream(p, 40, StreamOrder.SHUFFLED, seed=1, q=Distribution.point_mass(6, 0))
    path = save_stream(stream, tmp_path / "s.txt")
    text = path.read_text(encoding="utf-8")
    assert text.startswith("#n=6\n#order=shuffled\n")
    loaded = load_stream(path)
    assert loaded.n == 6
    assert loaded.random_order
    np.testing.assert_array_equal(loaded.items, stream.items)
    np.testing.assert_array_equal(loaded.dist_ids, stream.dist_ids)


def test_stream_file_without_order_line_is_as_given():
    stream = parse_stream("#n=3\nP\t0\nQ\t2\n\nP\t1\n")
    assert stream.order is StreamOrder.AS_GIVEN
    assert stream.items.tolist() == [0, 2, 1]
    assert stream.targets == (Target.P, Target.Q)


@pytest.mark.parametrize("text", [
    "P\t0\n",
    "#n=3\nR\t0\n",
    "#n=3\nP\tx\n",
    "#n=3\n#order=sorted\n",
    "#n=3\nP\t7\n",
])
def test_parse_stream_rejects_malformed(text):
    with pytest.raises(ContractViolation):
        parse_stream(text)
