import pytest
from hypothesis import given, settings, strategies as st

from rtsched.graph import (
    InterferenceGraph, brute_force_mis, collocated, complete_partite, enumerate_mis,
    from_edges, is_feasible_schedule, make_topology, star,
)

G1 = from_edges(5, [(1, 2), (2, 3), (2, 4), (4, 5)], one_indexed=True)


def as_sets(family):
    return {frozenset(s) for s in family}


@st.composite
def graphs(draw, max_links=10):
    k = draw(st.integers(1, max_links))
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
    return InterferenceGraph(k, frozenset(chosen))


def test_clique_gives_singletons():
    assert list(enumerate_mis(collocated(3))) == [(0,), (1,), (2,)]


def test_path():
    assert list(enumerate_mis(from_edges(3, [(0, 1), (1, 2)]))) == [(0, 2), (1,)]


def test_g1_family():
    # 0-indexed {{2,5},{1,3,4},{1,3,5}}
    assert as_sets(enumerate_mis(G1)) == {frozenset({1, 4}), frozenset({0, 2, 3}), frozenset({0, 2, 4})}


def test_edgeless_graph_single_set():
    assert list(enumerate_mis(InterferenceGraph(4))) == [(0, 1, 2, 3)]


def test_topologies():
    assert collocated(2).edges == {(0, 1)}
    s = star(5)
    assert s.edges == {(0, 1), (0, 2), (0, 3), (0, 4)}
    assert list(enumerate_mis(s)) == [(0,), (1, 2, 3, 4)]
    b = complete_partite([4, 4])
    assert b.num_links == 8
    assert list(enumerate_mis(b)) == [(0, 1, 2, 3), (4, 5, 6, 7)]
    assert make_topology("explicit", num_links=5, edges=[(1, 2), (2, 3), (2, 4), (4, 5)]) == G1


def test_feasibility():
    assert not is_feasible_schedule(collocated(3), {0, 1})
    assert is_feasible_schedule(from_edges(3, [(0, 1), (1, 2)]), {0, 2})
    assert is_feasible_schedule(G1, {0, 2, 3})


@pytest.mark.parametrize("bad", [
    lambda: InterferenceGraph(0),
    lambda: InterferenceGraph(3, frozenset({(1, 1)})),
    lambda: InterferenceGraph(3, frozenset({(0, 3)})),
    lambda: complete_partite([]),
    lambda: complete_partite([2, 0]),
    lambda: star(0),
    lambda: make_topology("ring", num_links=3),
])
def test_rejects_invalid(bad):
    with pytest.raises(ValueError):
        bad()


def test_edges_are_unordered():
    assert InterferenceGraph(2, frozenset({(1, 0)})) == collocated(2)


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_matches_brute_force(g):
    fam = enumerate_mis(g)
    assert list(fam) == list(brute_force_mis(g))
    assert len(set(fam)) == len(fam)
    for s in fam:
        assert is_feasible_schedule(g, s)
        assert all(v in s or any(g.adjacent(v, m) for m in s) for v in range(g.num_links))


@settings(max_examples=100, deadline=None)
@given(graphs(8), st.randoms(use_true_random=False))
def test_relabel_permutes_family(g, rnd):
    perm = list(range(g.num_links))
    rnd.shuffle(perm)
    mapped = {frozenset(perm[v] for v in s) for s in enumerate_mis(g)}
    assert as_sets(enumerate_mis(g.relabel(perm))) == mapped


def test_deterministic_and_cached():
    assert enumerate_mis(G1) == enumerate_mis(G1)
    assert G1.mis is G1.mis
