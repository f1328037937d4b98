import itertools
import math

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qaraki.errors import InvalidArgument
from qaraki.partitions import (
    PairPartition,
    SetPartition,
    SplitIndex,
    crossings,
    enumerate_pair_partitions,
    from_json,
    inversions,
    join,
    kernel,
    refines,
    split_indices,
    split_inversions,
    weighted_pairing_sum,
)


def double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def test_small_enumerations():
    assert [p.pairs for p in enumerate_pair_partitions(2)] == [((1, 2),)]
    assert len(enumerate_pair_partitions(4)) == 3
    assert enumerate_pair_partitions(3) == []
    assert len(enumerate_pair_partitions(0)) == 1


def test_negative_d_rejected():
    with pytest.raises(InvalidArgument):
        enumerate_pair_partitions(-2)


@pytest.mark.parametrize("d", [2, 4, 6, 8])
def test_counts_and_uniqueness(d):
    parts = enumerate_pair_partitions(d)
    assert len(parts) == double_factorial(d - 1)
    assert len({p.pairs for p in parts}) == len(parts)


def test_enumeration_order_documented():
    firsts = [p.pairs[0] for p in enumerate_pair_partitions(4)]
    assert firsts == [(1, 2), (1, 3), (1, 4)]


def test_crossings_examples():
    assert crossings(PairPartition(4, ((1, 2), (3, 4)))) == 0
    assert crossings(PairPartition(4, ((1, 3), (2, 4)))) == 1
    assert crossings(PairPartition(6, ((1, 4), (2, 6), (3, 5)))) == 2


@pytest.mark.parametrize("d", [2, 4, 6, 8])
def test_crossings_reflection_invariant(d):
    for p in enumerate_pair_partitions(d):
        mirrored = PairPartition(d, tuple((d + 1 - t, d + 1 - r) for r, t in p.pairs))
        assert crossings(mirrored) == crossings(p)


@pytest.mark.parametrize("d", [2, 4, 6])
def test_weighted_sum_at_one(d):
    assert weighted_pairing_sum(d, lambda s: 1.0 ** crossings(s)) == double_factorial(d - 1)


def test_inversions_examples():
    assert inversions((0, 1, 2)) == 0
    assert inversions((1, 0)) == 1
    assert inversions((3, 1, 2)) == 2


def test_split_inversions_examples():
    assert split_inversions(SplitIndex(4, (1, 2), (3, 4))) == 0
    assert split_inversions(SplitIndex(4, (2, 3), (1, 4))) == 2
    assert split_inversions(SplitIndex(3, (), (1, 2, 3))) == 0


def test_split_indices_cover_all_subsets():
    for n in range(5):
        for k in range(n + 1):
            assert len(split_indices(n, k)) == math.comb(n, k)
    with pytest.raises(InvalidArgument):
        split_indices(2, 3)


def test_invalid_structures_rejected():
    with pytest.raises(InvalidArgument):
        PairPartition(4, ((1, 2), (2, 3)))
    with pytest.raises(InvalidArgument):
        SetPartition(3, ((1,), (2,)))
    with pytest.raises(InvalidArgument):
        SplitIndex(3, (2, 1), (3,))


def _components_join(a, b):
    """Connected components of the union graph, as an independent join oracle."""
    g = nx.Graph()
    g.add_nodes_from(range(1, a.d + 1))
    for blk in a.blocks + b.blocks:
        g.add_edges_from(zip(blk, blk[1:]))
    return SetPartition(a.d, tuple(tuple(c) for c in nx.connected_components(g)))


def test_join_examples():
    s = PairPartition(4, ((1, 2), (3, 4)))
    t = PairPartition(4, ((1, 3), (2, 4)))
    assert join(s, s) == s.to_set_partition()
    assert join(s, t) == SetPartition(4, ((1, 2, 3, 4),))
    assert len(join(s, t)) == 1
    assert join(s, SetPartition.discrete(4)) == s.to_set_partition()
    with pytest.raises(InvalidArgument):
        join(s, SetPartition.discrete(3))


def test_join_matches_graph_oracle_exhaustively():
    for d in (2, 4, 6):
        parts = enumerate_pair_partitions(d)
        for a, b in itertools.product(parts, repeat=2):
            assert join(a, b) == _components_join(a.to_set_partition(), b.to_set_partition())


def test_join_lattice_laws():
    parts = enumerate_pair_partitions(4)
    for a, b, c in itertools.product(parts, repeat=3):
        assert join(a, b) == join(b, a)
        assert join(join(a, b), c) == join(a, join(b, c))
        assert refines(a, join(a, b))


def test_kernel_and_refines():
    assert kernel((1, 1, 2)) == SetPartition(3, ((1, 2), (3,)))
    assert len(kernel((1, 2, 3))) == 3
    assert len(kernel((5, 5, 5))) == 1
    assert refines(SetPartition.discrete(3), kernel((1, 2, 1)))
    assert refines(PairPartition(2, ((1, 2),)), kernel((1, 1)))
    assert not refines(SetPartition(2, ((1, 2),)), SetPartition.discrete(2))
    with pytest.raises(InvalidArgument):
        refines(SetPartition.discrete(2), SetPartition.discrete(3))


@pytest.mark.parametrize("d,m", [(2, 2), (2, 4), (4, 2), (4, 4), (6, 2), (6, 3)])
def test_kernel_counting_identity(d, m):
    parts = enumerate_pair_partitions(d)
    maps = list(itertools.product(range(m), repeat=d))
    kers = [kernel(k) for k in maps]
    for a, b in itertools.product(parts, repeat=2):
        count = sum(1 for K in kers if refines(a, K) and refines(b, K))
        assert count == m ** len(join(a, b))


def test_json_round_trip():
    p = PairPartition(4, ((3, 4), (1, 2)))
    assert from_json(p.to_json(), pair=True) == p
    s = SetPartition(3, ((3,), (1, 2)))
    assert from_json(s.to_json()) == s
    assert p.to_json() == [[1, 2], [3, 4]]


@settings(max_examples=60, deadline=None)
@given(st.permutations(list(range(6))))
def test_inversions_brute_force(perm):
    brute = sum(1 for i in range(6) for j in range(i + 1, 6) if perm[i] > perm[j])
    assert inversions(perm) == brute
