"""
Insert-only token streams over one or two distributions.

A stream is held as two parallel NumPy arrays (``dist_ids``, ``items``)
and consumed in fixed-size chunks; the estimators never look back at
tokens they have already passed. Random-order algorithms require the
stream to be flagged as a uniformly shuffled permutation.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from infostream.dist_core import Distribution
from infostream.errors import ContractViolation, IndexOutOfRange
from infostream.oracles import Target, as_target, make_rng

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 65536

_TARGET_CODES = {Target.P: 0, Target.Q: 1}

PathLike = Union[str, Path]


class StreamOrder(str, Enum):
    AS_GIVEN = "as-given"
    SHUFFLED = "shuffled"


def target_code(which) -> int:
    return _TARGET_CODES[as_target(which)]


@dataclass
class TokenStream:
    """Insertions ⟨dist, item, +⟩ over the base ``[0, n)``.

    ``order`` records whether the tokens are a uniformly random permutation
    of their multiset; ``replayable`` whether a second pass is allowed.
    """

    n: int
    items: np.ndarray
    dist_ids: np.ndarray = None
    order: StreamOrder = StreamOrder.AS_GIVEN
    replayable: bool = True
    chunk_size: int = field(default=DEFAULT_CHUNK_SIZE, repr=False)

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.int64)
        if self.dist_ids is None:
            self.dist_ids = np.zeros(self.items.size, dtype=np.uint8)
        self.dist_ids = np.asarray(self.dist_ids, dtype=np.uint8)
        self.order = StreamOrder(self.order)
        if self.n < 1:
            raise ContractViolation(f"n must be positive, got {self.n}")
        if self.items.shape != self.dist_ids.shape or self.items.ndim != 1:
            raise ContractViolation("items and dist_ids must be 1-D arrays of equal length")
        if self.items.size and (self.items.min() < 0 or self.items.max() >= self.n):
            raise IndexOutOfRange(f"stream item outside [0, {self.n})")
        if self.dist_ids.size and self.dist_ids.max() > 1:
            raise ContractViolation("dist ids must be 0 (P) or 1 (Q)")
        if self.chunk_size < 1:
            raise ContractViolation(f"chunk_size must be positive, got {self.chunk_size}")

    def __len__(self) -> int:
        return int(self.items.size)

    @property
    def random_order(self) -> bool:
        return self.order is StreamOrder.SHUFFLED

    @property
    def targets(self) -> Tuple[Target, ...]:
        present = set(np.unique(self.dist_ids).tolist())
        return tuple(t for t, code in _TARGET_CODES.items() if code in present)

    def length(self, which=Target.P) -> int:
        return int(np.count_nonzero(self.dist_ids == target_code(which)))

    def project(self, which=Target.P) -> np.ndarray:
        """Items of one distribution, in stream order."""
        return self.items[self.dist_ids == target_code(which)]

    def counts(self, which=Target.P) -> np.ndarray:
        """Exact frequency vector f(i) of one distribution."""
        return np.bincount(self.project(which), minlength=self.n)

    def chunks(self, size: Optional[int] = None) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
        """Yield ``(offset, dist_ids, items)`` slices in stream order."""
        size = size or self.chunk_size
        for start in range(0, len(self), size):
            yield start, self.dist_ids[start:start + size], self.items[start:start + size]

    def shuffled(self, seed: int) -> "TokenStream":
        """A uniformly random permutation of this stream, flagged random-order."""
        perm = make_rng(seed, "shuffle").permutation(len(self))
        return TokenStream(self.n, self.items[perm], self.dist_ids[perm],
                           StreamOrder.SHUFFLED, self.replayable, self.chunk_size)

    @classmethod
    def from_items(cls, n: int, items, which=Target.P,
                   order: StreamOrder = StreamOrder.AS_GIVEN) -> "TokenStream":
        items = np.asarray(items, dtype=np.int64)
        ids = np.full(items.size, target_code(which), dtype=np.uint8)
        return cls(n, items, ids, order)

    @classmethod
    def from_counts(cls, counts, seed: Optional[int] = None) -> "TokenStream":
        """Stream holding exactly ``counts[i]`` copies of each item; shuffled
        when a seed is given."""
        counts = np.asarray(counts, dtype=np.int64)
        stream = cls.from_items(counts.size, np.repeat(np.arange(counts.size), counts))
        return stream.shuffled(seed) if seed is not None else stream


def generate_stream(p: Distribution, m: int, order: StreamOrder = StreamOrder.AS_GIVEN,
                    seed: int = 0, q: Optional[Distribution] = None) -> TokenStream:
    """Draw ``m`` i.i.d. tokens from ``p`` (and ``m`` from ``q`` when given,
    appended after them), then apply a seeded Fisher–Yates shuffle when
    ``order`` is shuffled."""
    if m < 1:
        raise ContractViolation(f"m must be at least 1, got {m}")
    rng = make_rng(seed, "gen-stream")
    items = [p.alias.draw(rng, m)]
    ids = [np.zeros(m, dtype=np.uint8)]
    if q is not None:
        if q.n != p.n:
            raise ContractViolation(f"base sizes differ: {p.n} vs {q.n}")
        items.append(q.alias.draw(rng, m))
        ids.append(np.ones(m, dtype=np.uint8))
    stream = TokenStream(p.n, np.concatenate(items), np.concatenate(ids))
    if StreamOrder(order) is StreamOrder.SHUFFLED:
        stream = stream.shuffled(seed)
    logger.debug(f"generate_stream: n={p.n}, m={m}, pair={q is not None}, order={stream.order.value}")
    return stream


# --- Stream files ---

def save_stream(stream: TokenStream, path: PathLike) -> Path:
    """Write ``#n=<n>``, an ``#order=`` line, then ``P<TAB>i`` / ``Q<TAB>i``
    per token."""
    path = Path(path)
    tags = np.where(stream.dist_ids == 0, "P", "Q")
    body = "\n".join(f"{tag}\t{item}" for tag, item in zip(tags, stream.items.tolist()))
    header = f"#n={stream.n}\n#order={stream.order.value}\n"
    path.write_text(header + body + ("\n" if body else ""), encoding="utf-8")
    logger.debug(f"save_stream: wrote {len(stream)} tokens to {path}")
    return path


def parse_stream(text: str) -> TokenStream:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#n="):
        raise ContractViolation("missing '#n=<n>' header")
    try:
        n = int(lines[0][3:])
    except ValueError:
        raise ContractViolation(f"bad header {lines[0]!r}")

    order = StreamOrder.AS_GIVEN
    ids, items = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#order="):
            try:
                order = StreamOrder(line[len("#order="):])
            except ValueError:
                raise ContractViolation(f"line {lineno}: unknown order {line!r}")
            continue
        if line.startswith("#"):
            continue
        tag, _, value = line.partition("\t")
        if tag not in ("P", "Q") or not value:
            raise ContractViolation(f"line {lineno}: expected 'P<TAB>i' or 'Q<TAB>i', got {raw!r}")
        try:
            items.append(int(value))
        except ValueError:
            raise ContractViolation(f"line {lineno}: unparseable item {value!r}")
        ids.append(0 if tag == "P" else 1)
    return TokenStream(n, np.array(items, dtype=np.int64), np.array(ids, dtype=np.uint8), order)


def load_stream(path: PathLike) -> TokenStream:
    return parse_stream(Path(path).read_text(encoding="utf-8"))
