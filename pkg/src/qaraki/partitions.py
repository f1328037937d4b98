"""Pair partitions, set partitions and multi-index kernels.

Ground sets are 1-based, ``[d] = {1, ..., d}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy.cluster.hierarchy import DisjointSet

from .errors import InvalidArgument


@dataclass(frozen=True)
class PairPartition:
    d: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(sorted((min(p), max(p)) for p in self.pairs))
        seen = sorted(x for p in pairs for x in p)
        if seen != list(range(1, self.d + 1)) or any(r == t for r, t in pairs):
            raise InvalidArgument(f"{self.pairs} is not a pair partition of [{self.d}]")
        object.__setattr__(self, "pairs", pairs)

    def to_set_partition(self) -> SetPartition:
        return SetPartition(self.d, self.pairs)

    def to_json(self) -> list[list[int]]:
        return [list(p) for p in self.pairs]


@dataclass(frozen=True)
class SetPartition:
    d: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        flat = sorted(x for b in blocks for x in b)
        if any(len(b) == 0 for b in blocks) or flat != list(range(1, self.d + 1)):
            raise InvalidArgument(f"{self.blocks} is not a partition of [{self.d}]")
        object.__setattr__(self, "blocks", blocks)

    def __len__(self):
        return len(self.blocks)

    @classmethod
    def discrete(cls, d: int) -> SetPartition:
        return cls(d, tuple((i,) for i in range(1, d + 1)))

    def to_json(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


@dataclass(frozen=True)
class SplitIndex:
    """A split of [n] into complementary increasing sequences ``I1`` and ``I2``."""

    n: int
    I1: tuple[int, ...]
    I2: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.I1 + self.I2) != list(range(1, self.n + 1)):
            raise InvalidArgument("I1 and I2 must partition [n]")
        if list(self.I1) != sorted(self.I1) or list(self.I2) != sorted(self.I2):
            raise InvalidArgument("I1 and I2 must be increasing")


def enumerate_pair_partitions(d: int) -> list[PairPartition]:
    """All perfect matchings of [d]; empty for odd ``d``.

    Order: the partner of the smallest free element runs in ascending order,
    recursively.
    """
    if d < 0:
        raise InvalidArgument("d must be nonnegative")
    if d % 2:
        return []
    return [PairPartition(d, tuple(p)) for p in _matchings(list(range(1, d + 1)))]


def _matchings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


def crossings(sigma: PairPartition) -> int:
    pairs = sigma.pairs
    count = 0
    for (a, b), (c, e) in itertools.combinations(pairs, 2):
        if a < c < b < e or c < a < e < b:
            count += 1
    return count


def inversions(perm: Sequence[int]) -> int:
    return sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])


def split_inversions(s: SplitIndex) -> int:
    return sum(i - l for l, i in enumerate(s.I1, start=1))


def split_indices(n: int, k: int) -> list[SplitIndex]:
    """All splits of [n] with ``|I2| = k``, ordered lexicographically in ``I1``."""
    if not 0 <= k <= n:
        raise InvalidArgument(f"need 0 <= k <= n, got k={k}, n={n}")
    out = []
    for I1 in itertools.combinations(range(1, n + 1), n - k):
        I2 = tuple(i for i in range(1, n + 1) if i not in I1)
        out.append(SplitIndex(n, I1, I2))
    return out


def _as_set_partition(p) -> SetPartition:
    return p.to_set_partition() if isinstance(p, PairPartition) else p


def join(sigma, sigma_prime) -> SetPartition:
    """Finest partition coarser than both arguments."""
    a, b = _as_set_partition(sigma), _as_set_partition(sigma_prime)
    if a.d != b.d:
        raise InvalidArgument(f"ground sets differ: {a.d} vs {b.d}")
    ds = DisjointSet(range(1, a.d + 1))
    for block in itertools.chain(a.blocks, b.blocks):
        for x in block[1:]:
            ds.merge(block[0], x)
    return SetPartition(a.d, tuple(tuple(s) for s in ds.subsets()))


def kernel(k: Sequence[int]) -> SetPartition:
    """Partition of [d] into level sets of the multi-index ``k``."""
    if len(k) < 1:
        raise InvalidArgument("kernel needs d >= 1")
    levels: dict[int, list[int]] = {}
    for pos, value in enumerate(k, start=1):
        levels.setdefault(value, []).append(pos)
    return SetPartition(len(k), tuple(tuple(v) for v in levels.values()))


def refines(sigma, pi) -> bool:
    """True iff every block of ``sigma`` lies inside a block of ``pi``."""
    a, b = _as_set_partition(sigma), _as_set_partition(pi)
    if a.d != b.d:
        raise InvalidArgument(f"ground sets differ: {a.d} vs {b.d}")
    owner = {x: i for i, block in enumerate(b.blocks) for x in block}
    return all(len({owner[x] for x in block}) == 1 for block in a.blocks)


def weighted_pairing_sum(d: int, weight) -> complex:
    """``sum_{sigma in P_2(d)} weight(sigma)``."""
    return sum((weight(s) for s in enumerate_pair_partitions(d)), 0)


def from_json(data: Iterable[Iterable[int]], pair: bool = False):
    blocks = tuple(tuple(int(x) for x in b) for b in data)
    d = sum(len(b) for b in blocks)
    return PairPartition(d, blocks) if pair else SetPartition(d, blocks)
