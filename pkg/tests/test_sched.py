import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from rtsched.dynamics import check_decision, earliest_deadlines
from rtsched.graph import InterferenceGraph, collocated, from_edges, is_maximal_over, star
from rtsched.rng import RandomStream
from rtsched.sched import (
    OrderedWeights, amms_decide, amms_expected_gain, amms_mixing, amms_order, amnd_decide,
    amnd_expected_gain, amnd_mixing, compute_nstar, edf_maximal_decide, find_nondominated,
    last_prob, ldf_decide, make_policy, subharmonic,
)

G1 = from_edges(5, [(1, 2), (2, 3), (2, 4), (4, 5)], one_indexed=True)


def buffer_for(pairs, depth=None):
    """One packet per link at the given earliest deadline; None means empty."""
    depth = depth or max([e for _, e in pairs if e] + [1])
    buf = []
    for _, e in pairs:
        row = [0] * depth
        if e:
            row[e - 1] = 1
        buf.append(row)
    return buf, [float(w) for w, _ in pairs]


def ordered(weights):
    n, c = compute_nstar(list(weights))
    return OrderedWeights(tuple(range(len(weights))), tuple(weights), n, c)


# --- non-dominated links ---------------------------------------------------

def test_nondominated_chain():
    buf, w = buffer_for([(10, 3), (5, 2), (4, 1)])
    assert [t[1] for t in find_nondominated(buf, w)] == [10, 5, 4]


def test_dominated_link_removed():
    buf, w = buffer_for([(10, 1), (5, 2)])
    assert find_nondominated(buf, w) == [(0, 10, 1)]


def test_single_and_empty():
    buf, w = buffer_for([(3, None), (2, 2)])
    assert find_nondominated(buf, w) == [(1, 2, 2)]
    assert find_nondominated([[0], [0]], [1, 1]) == []


def test_amnd_mixing_examples():
    nd = [(0, 10, 3), (1, 5, 2), (2, 4, 1)]
    assert amnd_mixing(nd).probs == pytest.approx((0.5, 0.2, 0.3))
    assert amnd_mixing([(0, 3, 1)]).probs == (1.0,)
    assert amnd_mixing([(0, 8, 2), (1, 4, 1)]).probs == pytest.approx((0.5, 0.5))


def test_amnd_all_zero_deficits_is_edf():
    buf, w = buffer_for([(0, 3), (0, 1)])
    assert amnd_decide(buf, w, RandomStream(0)) == {1: 1}


def test_amnd_forced_and_idle():
    assert amnd_decide([[0, 0, 0], [0, 0, 0]], [1, 1], RandomStream(0)) == {}
    assert amnd_decide([[0, 1, 0]], [0.0], RandomStream(0)) == {0: 2}


def test_amnd_frequencies():
    buf, w = buffer_for([(10, 3), (5, 2), (4, 1)])
    rng = RandomStream(5, "amnd")
    n = 10**6
    c = Counter(next(iter(amnd_decide(buf, w, rng))) for _ in range(n))
    for link, p in zip(range(3), (0.5, 0.2, 0.3)):
        assert abs(c[link] / n - p) < 0.002


def test_amnd_two_link_bound_is_tight():
    buf, w = buffer_for([(10, 2), (5, 1)])
    assert amnd_expected_gain(buf, w) == pytest.approx(7.5)


@st.composite
def collocated_states(draw, max_links=6):
    k = draw(st.integers(1, max_links))
    pairs = [(draw(st.integers(0, 20)), draw(st.one_of(st.none(), st.integers(1, 5)))) for _ in range(k)]
    return buffer_for(pairs, 5)


@settings(max_examples=500)
@given(collocated_states())
def test_nondominated_properties(state):
    buf, w = state
    es = earliest_deadlines(buf)
    nd = find_nondominated(buf, w)
    live = [l for l, e in enumerate(es) if e is not None]
    assert bool(nd) == bool(live)
    for a, b in zip(nd, nd[1:]):
        assert a[1] > b[1] and a[2] > b[2]

    def dominates(x, y):
        return w[x] >= w[y] and es[x] <= es[y] and (w[x] > w[y] or es[x] < es[y])

    chosen = {t[0] for t in nd}
    for link, _, _ in nd:
        assert not any(dominates(o, link) for o in live)
    for o in live:
        if o not in chosen:
            # removed links are dominated, or exact (w, e) twins of a chosen link
            assert any(dominates(c, o) or (w[c] == w[o] and es[c] == es[o]) for c in chosen)
    if nd:
        mix = amnd_mixing(nd)
        assert abs(sum(mix.probs) - 1) < 1e-12 and min(mix.probs) >= 0


# --- AMMS ---------------------------------------------------------------------

def test_amms_order_star():
    g = star(3)
    buf, w = buffer_for([(7, 1), (3, 1), (2, 1)])
    o = amms_order(g.mis, buf, w)
    assert [g.mis[i] for i in o.indices] == [(0,), (1, 2)]
    assert o.weights == (7, 5)


def test_amms_order_empty_and_masking():
    assert amms_order(G1.mis, [[0]] * 5, [1] * 5).indices == ()
    buf, w = buffer_for([(2, 1), (9, 1), (1, 1), (4, 1), (6, None)])
    o = amms_order(G1.mis, buf, w)
    i = list(G1.mis).index((0, 2, 3))
    assert dict(zip(o.indices, o.weights))[i] == 7


def test_nstar_examples():
    n, c = compute_nstar([10, 6, 4])
    assert n == 3 and c == pytest.approx(120 / 31)
    assert compute_nstar([10, 10, 1]) == (2, pytest.approx(5.0))
    assert compute_nstar([3.0]) == (1, 0.0)
    for bad in ([], [1, 2], [2, 0]):
        with pytest.raises(ValueError):
            compute_nstar(bad)


def test_amms_mixing_examples():
    assert amms_mixing(ordered([10, 6, 4])).probs == pytest.approx((1 - 3.8709677 / 10, 1 - 3.8709677 / 6, 1 - 3.8709677 / 4), abs=1e-6)
    assert amms_mixing(ordered([10, 10, 1])).probs == pytest.approx((0.5, 0.5, 0.0))
    assert amms_mixing(ordered([4.0])).probs == (1.0,)


def test_amms_idle_and_single():
    g = InterferenceGraph(1)
    assert amms_decide(g.mis, [[0]], [0.0], RandomStream(0)) == {}
    assert amms_decide(g.mis, [[1]], [2.0], RandomStream(0)) == {0: 1}


def test_amms_zero_weights_fall_back_to_edf():
    buf, w = buffer_for([(0, 2), (0, 1), (0, 3), (0, 1), (0, 1)])
    assert amms_decide(G1.mis, buf, w, RandomStream(0)) == edf_maximal_decide(buf, G1)


def test_amms_frequencies():
    # three disjoint cliques of sizes 1, 1, 1 glued as collocated(3) gives MIS weights = deficits
    g = collocated(3)
    buf, w = buffer_for([(10, 1), (6, 1), (4, 1)])
    rng = RandomStream(9, "amms")
    n = 10**6
    c = Counter(next(iter(amms_decide(g.mis, buf, w, rng))) for _ in range(n))
    for link, p in zip(range(3), (0.6129032, 0.3548387, 0.0322581)):
        assert abs(c[link] / n - p) < 0.002


def nstar_linear(weights):
    return max(n for n in range(1, len(weights) + 1) if last_prob(weights, n) >= 0)


weight_lists = st.lists(st.floats(0.01, 1000), min_size=1, max_size=12).map(lambda x: sorted(x, reverse=True))


@settings(max_examples=1000)
@given(weight_lists)
def test_amms_identities(ws):
    o = ordered(ws)
    n, c = o.nstar, o.c_nstar
    assert n == nstar_linear(ws)
    mix = amms_mixing(o)
    assert abs(sum(mix.probs) - 1) < 1e-12 and min(mix.probs) >= 0
    gain = amms_expected_gain(o)
    assert gain == pytest.approx(sum(ws[:n]) - n * c, rel=1e-9, abs=1e-9)
    ratio = gain / (sum(ws[:n]) - (n - 1) * c)
    assert ratio >= n / (2 * n - 1) - 1e-12
    assert ratio >= len(ws) / (2 * len(ws) - 1) - 1e-12
    # C_2 < W_2 always, so a second MIS is always mixed in
    assert n >= min(2, len(ws))
    for m in range(n, len(ws)):
        assert subharmonic(ws, m + 1) < subharmonic(ws, m)


# --- greedy baselines ---------------------------------------------------------

def test_ldf_rd_tie_is_fair():
    buf, w = buffer_for([(5, 1), (5, 1)])
    rng = RandomStream(2, "ldf")
    n = 10**5
    c = Counter(next(iter(ldf_decide(buf, w, collocated(2), "RD", rng))) for _ in range(n))
    assert abs(c[0] / n - 0.5) < 0.005


def test_ldf_ed_tie_prefers_earlier_deadline():
    buf, w = buffer_for([(5, 2), (5, 1)])
    assert ldf_decide(buf, w, collocated(2), "ED", None) == {1: 1}


def test_ldf_on_g1():
    buf, w = buffer_for([(9, 1), (2, 1), (1, 1), (4, 1), (6, 1)])
    assert set(ldf_decide(buf, w, G1, "ED", None)) == {0, 2, 4}


def test_edf_examples():
    buf, w = buffer_for([(0, 3), (0, 1), (0, 2)])
    assert edf_maximal_decide(buf, collocated(3)) == {1: 1}
    assert edf_maximal_decide([[0]] * 3, collocated(3)) == {}
    path = from_edges(3, [(0, 1), (1, 2)])
    assert edf_maximal_decide([[1]] * 3, path) == {0: 1, 2: 1}


def test_make_policy():
    assert make_policy("ldf-rd", collocated(2)).name == "ldf-rd"
    with pytest.raises(ValueError):
        make_policy("amnd", G1)
    with pytest.raises(ValueError):
        make_policy("lqf", G1)


@st.composite
def graph_states(draw):
    k = draw(st.integers(1, 7))
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    g = InterferenceGraph(k, frozenset(edges))
    buf = [[draw(st.integers(0, 2)) for _ in range(3)] for _ in range(k)]
    w = [float(draw(st.integers(0, 12))) for _ in range(k)]
    return g, buf, w


@settings(max_examples=400, deadline=None)
@given(graph_states(), st.integers(0, 2**32))
def test_every_policy_decision_is_valid(state, seed):
    g, buf, w = state
    live = [l for l, row in enumerate(buf) if any(row)]
    es = earliest_deadlines(buf)
    names = ["amms", "ldf-rd", "ldf-ed", "edf"] + (["amnd"] if g.is_complete() else [])
    for name in names:
        dec = make_policy(name, g).decide(buf, w, RandomStream(seed, name))
        check_decision(buf, dec, g)
        assert all(dec[l] == es[l] for l in dec)
        if name != "amnd":
            assert is_maximal_over(g, dec, live)
        elif live:
            assert len(dec) == 1


@pytest.mark.parametrize("k", range(2, 7))
def test_amnd_bound_random_states(k):
    rnd = random.Random(k)
    bound = 1 - (1 - 1 / k) ** k
    for _ in range(2000):
        pairs = [(rnd.choice([0, rnd.uniform(0, 50), rnd.randint(0, 5)]), rnd.choice([None, 1, 2, 3, 4]))
                 for _ in range(k)]
        buf, w = buffer_for(pairs, 4)
        live = [w[l] for l in range(k) if pairs[l][1]]
        wmax = max(live, default=0.0)
        assert amnd_expected_gain(buf, w) >= wmax * bound - 1e-9
