"""Exhaustive reference solvers for tiny instances.

Both solvers restrict each slot to maximal schedules over nonempty links
with earliest-deadline packets; every policy in :mod:`rtsched.sched` lives in
that class, so the search bounds them exactly.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .dynamics import add_arrivals, advance_buffers, earliest_deadlines, slot_gain, update_deficits
from .graph import InterferenceGraph, enumerate_mis
from .traffic import EMPTY, ArrivalBatch

SEARCH_LIMIT = 10**7


class OracleBoundError(ValueError):
    """Instance is too large for exhaustive search."""


@dataclass
class HorizonInstance:
    """Known-future instance: ``arrivals[h]`` joins the buffer at the start of
    slot ``h`` and ``admitted[h]`` is that slot's deficit increment."""

    graph: InterferenceGraph
    buffer: list
    deficits: list
    arrivals: list = field(default_factory=list)
    admitted: list = field(default_factory=list)
    horizon: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        k = self.graph.num_links
        if len(self.buffer) != k or len(self.deficits) != k:
            raise ValueError("buffer/deficits length must match the graph")
        self.arrivals = list(self.arrivals) + [EMPTY] * (self.horizon - len(self.arrivals))
        self.admitted = list(self.admitted) + [[0.0] * k] * (self.horizon - len(self.admitted))
        d_max = len(self.buffer[0])
        for b in self.arrivals:
            if b.max_deadline > d_max:
                raise ValueError(f"arrival deadline {b.max_deadline} exceeds buffer depth {d_max}")


class _Schedules:
    """Maximal schedules of the subgraph induced by a nonempty-link set, cached."""

    def __init__(self, graph):
        self.graph = graph
        self._cache = {}

    def __call__(self, live):
        key = frozenset(live)
        hit = self._cache.get(key)
        if hit is None:
            if not key:
                hit = ((),)
            else:
                nodes = sorted(key)
                pos = {v: i for i, v in enumerate(nodes)}
                sub = InterferenceGraph(
                    len(nodes),
                    frozenset((pos[a], pos[b]) for a, b in self.graph.edges if a in key and b in key),
                )
                hit = tuple(tuple(nodes[i] for i in s) for s in enumerate_mis(sub))
            self._cache[key] = hit
        return hit


def _decisions(buffer, schedules):
    es = earliest_deadlines(buffer)
    live = [l for l, e in enumerate(es) if e is not None]
    return [{l: es[l] for l in s} for s in schedules(live)]


def _freeze(buffer, deficits):
    return tuple(map(tuple, buffer)), tuple(deficits)


def max_gain(instance, limit=SEARCH_LIMIT):
    """Largest cumulative gain over the horizon and one schedule attaining it.

    Returns ``(gain, decisions)``; ties go to the first sequence in canonical
    (lexicographic schedule) order.
    """
    n_mis = len(instance.graph.mis)
    if n_mis ** instance.horizon > limit:
        raise OracleBoundError(
            f"search space {n_mis}^{instance.horizon} exceeds limit {limit}"
        )
    schedules = _Schedules(instance.graph)
    H = instance.horizon
    memo = {}

    def best(h, buffer, deficits):
        # buffer here already excludes arrivals[h]
        if h == H:
            return 0.0, ()
        key = (h,) + _freeze(buffer, deficits)
        if key in memo:
            return memo[key]
        buf = add_arrivals(buffer, instance.arrivals[h])
        top = None
        for dec in _decisions(buf, schedules):
            g = slot_gain(deficits, dec)
            nxt_buf, _ = advance_buffers(buf, dec, EMPTY)
            nxt_w = update_deficits(deficits, instance.admitted[h], dec)
            rest, seq = best(h + 1, nxt_buf, nxt_w)
            total = g + rest
            if top is None or total > top[0] + 1e-9:
                top = (total, (dec,) + seq)
        memo[key] = top
        return top

    gain, seq = best(0, [row[:] for row in instance.buffer], list(instance.deficits))
    return gain, list(seq)


def policy_gain(instance, policy, rng):
    """Cumulative gain of a causal policy replayed on the instance's arrivals."""
    buffer = [row[:] for row in instance.buffer]
    w = list(instance.deficits)
    total = 0.0
    for h in range(instance.horizon):
        buffer = add_arrivals(buffer, instance.arrivals[h])
        dec = policy.decide(buffer, w, rng)
        total += slot_gain(w, dec)
        buffer, _ = advance_buffers(buffer, dec, EMPTY)
        w = update_deficits(w, instance.admitted[h], dec)
    return total


# --- steady-state uniform delivery ratio for periodic traffic -----------------

def _pareto(vecs):
    keep = []
    for v in sorted(set(vecs), reverse=True):
        if not any(all(a >= b for a, b in zip(u, v)) for u in keep):
            keep.append(v)
    return keep


def _cycle_edges(start, cycle, schedules, limit):
    """Reachable end states of one cycle from ``start``, each with its
    Pareto-maximal per-link delivery vectors.

    Schedules are enumerated slot by slot; paths reaching the same buffer
    state are merged, keeping only undominated delivery counts.
    """
    k = len(start)
    layer = {start: [(0,) * k]}
    steps = 0
    for batch in cycle:
        nxt_layer = {}
        for state, vecs in layer.items():
            buf = add_arrivals([list(r) for r in state], batch)
            for dec in _decisions(buf, schedules):
                steps += len(vecs)
                if steps > limit:
                    raise OracleBoundError(f"per-cycle search exceeds {limit} schedule steps")
                nxt, _ = advance_buffers(buf, dec, EMPTY)
                key = tuple(map(tuple, nxt))
                bucket = nxt_layer.setdefault(key, [])
                for v in vecs:
                    bucket.append(tuple(c + (1 if l in dec else 0) for l, c in enumerate(v)))
        layer = {s: _pareto(v) for s, v in nxt_layer.items()}
    return layer


def _sccs(nodes, succ):
    index, low, on, stack, comps = {}, {}, set(), [], []
    counter = [0]

    def strong(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for u in succ[v]:
            if u not in index:
                strong(u)
                low[v] = min(low[v], low[u])
            elif u in on:
                low[v] = min(low[v], index[u])
        if low[v] == index[v]:
            comp = []
            while True:
                u = stack.pop()
                on.discard(u)
                comp.append(u)
                if u == v:
                    break
            comps.append(comp)

    for v in nodes:
        if v not in index:
            strong(v)
    return comps


def max_uniform_ratio(graph, cycle, resolution=1e-3, d_max=None, limit=10**6, max_states=5000):
    """Largest uniform delivery ratio a periodic schedule sustains, on a grid.

    Per-cycle schedules are enumerated exhaustively between cycle-boundary
    buffer states; long-run time sharing between the resulting cycles of the
    state graph is an LP over circulations, solved per strongly connected
    component. The result is floored to a multiple of ``resolution``.
    """
    cycle = [b if isinstance(b, ArrivalBatch) else ArrivalBatch(tuple(b)) for b in cycle]
    k = graph.num_links
    if d_max is None:
        d_max = max((b.max_deadline for b in cycle), default=1) or 1
    arrivals = [0] * k
    for b in cycle:
        for l, t in enumerate(b.totals(k)):
            arrivals[l] += t
    active = [l for l in range(k) if arrivals[l] > 0]
    if not active:
        return 1.0
    schedules = _Schedules(graph)
    start = tuple((0,) * d_max for _ in range(k))
    edges = {}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        if s in edges:
            continue
        if len(edges) >= max_states:
            raise OracleBoundError(f"more than {max_states} boundary states")
        edges[s] = _cycle_edges(s, cycle, schedules, limit)
        frontier.extend(e for e in edges[s] if e not in edges)
    succ = {s: list(edges[s]) for s in edges}
    best = 0.0
    for comp in _sccs(list(edges), succ):
        members = set(comp)
        arcs = [(s, e, v) for s in comp for e, vs in edges[s].items() if e in members for v in vs]
        if not arcs:
            continue
        best = max(best, _circulation_lp(comp, arcs, arrivals, active))
    steps = int(np.floor(best / resolution + 1e-9))
    return round(steps * resolution, 12)


def _circulation_lp(nodes, arcs, arrivals, active):
    # variables: one weight per arc, then p; maximise p
    n = len(arcs)
    pos = {v: i for i, v in enumerate(nodes)}
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_eq = np.zeros((len(nodes) + 1, n + 1))
    for j, (s, e, _) in enumerate(arcs):
        a_eq[pos[s], j] += 1.0
        a_eq[pos[e], j] -= 1.0
        a_eq[-1, j] = 1.0
    b_eq = np.zeros(len(nodes) + 1)
    b_eq[-1] = 1.0
    a_ub = np.zeros((len(active), n + 1))
    for r, l in enumerate(active):
        for j, (_, _, v) in enumerate(arcs):
            a_ub[r, j] = -v[l]
        a_ub[r, -1] = arrivals[l]
    b_ub = np.zeros(len(active))
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(0, 1)], method="highs")
    if not res.success:
        return 0.0
    return float(res.x[-1])
