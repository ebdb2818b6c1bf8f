"""Arrival processes and deficit admission.

Links are 0-indexed here. A slot's arrivals are an :class:`ArrivalBatch`, a
sparse tuple of ``(link, deadline, count)`` entries.
"""
import copy
from dataclasses import dataclass

import numpy as np

ROW_TOL = 1e-12


@dataclass(frozen=True)
class ArrivalBatch:
    entries: tuple = ()

    def __post_init__(self):
        merged = {}
        for link, deadline, count in self.entries:
            link, deadline, count = int(link), int(deadline), int(count)
            if deadline < 1:
                raise ValueError(f"deadline must be >= 1, got {deadline}")
            if count < 0:
                raise ValueError(f"negative arrival count {count}")
            if count:
                merged[(link, deadline)] = merged.get((link, deadline), 0) + count
        object.__setattr__(self, "entries", tuple((l, d, c) for (l, d), c in sorted(merged.items())))

    def totals(self, num_links):
        out = [0] * num_links
        for link, _, count in self.entries:
            out[link] += count
        return out

    def dense(self, num_links, d_max):
        """``tau[l][d-1]`` counts."""
        tau = [[0] * d_max for _ in range(num_links)]
        for link, deadline, count in self.entries:
            tau[link][deadline - 1] += count
        return tau

    @property
    def max_deadline(self):
        return max((d for _, d, _ in self.entries), default=0)

    def __add__(self, other):
        return ArrivalBatch(self.entries + other.entries)

    def __bool__(self):
        return bool(self.entries)


EMPTY = ArrivalBatch()


def _check_links(batch, num_links):
    for link, _, _ in batch.entries:
        if not 0 <= link < num_links:
            raise ValueError(f"arrival on link {link} outside [0, {num_links})")


def _strongly_connected(adj):
    n = len(adj)

    def reach(start, edges):
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in edges[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    rev = [[] for _ in range(n)]
    for u in range(n):
        for v in adj[u]:
            rev[v].append(u)
    return len(reach(0, adj)) == n and len(reach(0, rev)) == n


class TrafficProcess:
    """Base class. Subclasses implement :meth:`step`."""

    mode = None
    num_links = 0

    def step(self, rng):
        raise NotImplementedError

    @property
    def a_max(self):
        raise NotImplementedError

    @property
    def d_max(self):
        raise NotImplementedError

    def fresh(self):
        """Independent copy reset to the initial state."""
        c = copy.deepcopy(self)
        c.reset()
        return c

    def reset(self):
        pass

    def _identity(self):
        """What the process is, as opposed to where it currently is."""
        return ()

    def __eq__(self, other):
        return type(self) is type(other) and self.mode == other.mode and self._identity() == other._identity()

    __hash__ = None


class MarkovTraffic(TrafficProcess):
    """Finite-state chain over slot templates; state ``i`` emits ``patterns[i]``.

    The current state is the hidden traffic label. ``step`` emits the pattern
    of the current state and then moves along ``transition``.
    """

    mode = "markov"

    def __init__(self, num_links, patterns, transition, start=0):
        self.num_links = int(num_links)
        self.patterns = tuple(p if isinstance(p, ArrivalBatch) else ArrivalBatch(tuple(p)) for p in patterns)
        if not self.patterns:
            raise ValueError("markov traffic needs at least one state")
        for p in self.patterns:
            _check_links(p, self.num_links)
        P = np.asarray(transition, dtype=float)
        n = len(self.patterns)
        if P.shape != (n, n):
            raise ValueError(f"transition matrix must be {n}x{n}, got {P.shape}")
        if (P < 0).any():
            raise ValueError("transition matrix has negative entries")
        bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > ROW_TOL)
        if bad.size:
            raise ValueError(f"transition row {int(bad[0])} does not sum to 1")
        adj = [list(np.flatnonzero(P[i] > 0)) for i in range(n)]
        if not _strongly_connected(adj):
            raise ValueError("transition matrix is not irreducible")
        if not 0 <= start < n:
            raise ValueError(f"start state {start} outside [0, {n})")
        self.transition = P
        self.start = int(start)
        self.current_state = self.start
        rows = []
        for i in range(n):
            nz = np.flatnonzero(P[i] > 0)
            if nz.size == 1:
                rows.append(int(nz[0]))
            else:
                rows.append((nz.tolist(), P[i, nz].tolist()))
        self._rows = rows

    @classmethod
    def periodic(cls, num_links, patterns, start=0):
        n = len(patterns)
        P = np.zeros((n, n))
        for i in range(n):
            P[i, (i + 1) % n] = 1.0
        proc = cls(num_links, patterns, P, start)
        proc.mode = "periodic"
        return proc

    def reset(self):
        self.current_state = self.start

    def _identity(self):
        return (self.num_links, self.patterns, self.transition.tolist(), self.start)

    def step(self, rng):
        batch = self.patterns[self.current_state]
        row = self._rows[self.current_state]
        if isinstance(row, int):
            self.current_state = row
        else:
            idx, probs = row
            self.current_state = idx[rng.categorical(probs)]
        return batch

    @property
    def a_max(self):
        return max((max(p.totals(self.num_links)) for p in self.patterns), default=0)

    @property
    def d_max(self):
        return max((p.max_deadline for p in self.patterns), default=0)

    def stationary(self, iters=10000, tol=1e-14):
        """Stationary law by power iteration on the lazy chain (valid for periodic chains too)."""
        n = len(self.patterns)
        lazy = 0.5 * (np.eye(n) + self.transition)
        pi = np.full(n, 1.0 / n)
        for _ in range(iters):
            nxt = pi @ lazy
            if np.abs(nxt - pi).sum() < tol:
                return nxt
            pi = nxt
        return pi


class IIDTraffic(TrafficProcess):
    """Independent per-link arrivals, i.i.d. over slots.

    ``outcomes[l]`` is a list of ``(count, deadline, prob)``; leftover mass
    means no arrival on that link.
    """

    mode = "iid"

    def __init__(self, num_links, outcomes):
        self.num_links = int(num_links)
        if len(outcomes) != self.num_links:
            raise ValueError("need one outcome list per link")
        table = []
        for link, outs in enumerate(outcomes):
            total = 0.0
            entries = []
            for count, deadline, prob in outs:
                if prob < 0 or int(count) < 0 or int(deadline) < 1:
                    raise ValueError(f"bad i.i.d. outcome {(count, deadline, prob)} on link {link}")
                total += prob
                entries.append((int(count), int(deadline), float(prob)))
            if total > 1.0 + ROW_TOL:
                raise ValueError(f"i.i.d. outcome probabilities on link {link} sum to {total} > 1")
            table.append(entries)
        self.outcomes = table

    def _identity(self):
        return (self.num_links, self.outcomes)

    def step(self, rng):
        entries = []
        for link, outs in enumerate(self.outcomes):
            if not outs:
                continue
            u = rng.uniform()
            acc = 0.0
            for count, deadline, prob in outs:
                acc += prob
                if u < acc:
                    if count:
                        entries.append((link, deadline, count))
                    break
        return ArrivalBatch(tuple(entries)) if entries else EMPTY

    @property
    def a_max(self):
        return max((c for outs in self.outcomes for c, _, p in outs if p > 0), default=0)

    @property
    def d_max(self):
        return max((d for outs in self.outcomes for c, d, p in outs if p > 0 and c > 0), default=0)


class ProductTraffic(TrafficProcess):
    """Independent components, each stepping on its own; batches are summed."""

    mode = "product"

    def __init__(self, num_links, components):
        self.num_links = int(num_links)
        self.components = list(components)
        for c in self.components:
            if c.num_links != self.num_links:
                raise ValueError("component link count mismatch")

    def reset(self):
        for c in self.components:
            c.reset()

    def _identity(self):
        return (self.num_links, self.components)

    def step(self, rng):
        batch = EMPTY
        for c in self.components:
            b = c.step(rng)
            if b:
                batch = batch + b if batch else b
        return batch

    @property
    def a_max(self):
        # components may share links, so bound by the sum
        per_link = [0] * self.num_links
        for c in self.components:
            for l, v in enumerate(_per_link_amax(c)):
                per_link[l] += v
        return max(per_link, default=0)

    @property
    def d_max(self):
        return max((c.d_max for c in self.components), default=0)


def _per_link_amax(proc):
    if isinstance(proc, MarkovTraffic):
        out = [0] * proc.num_links
        for p in proc.patterns:
            for l, v in enumerate(p.totals(proc.num_links)):
                out[l] = max(out[l], v)
        return out
    if isinstance(proc, IIDTraffic):
        return [max((c for c, _, p in outs if p > 0), default=0) for outs in proc.outcomes]
    if isinstance(proc, ProductTraffic):
        out = [0] * proc.num_links
        for c in proc.components:
            for l, v in enumerate(_per_link_amax(c)):
                out[l] += v
        return out
    return [proc.a_max] * proc.num_links


def step_traffic(process, rng):
    return process.step(rng)


def empty_traffic(num_links):
    return MarkovTraffic.periodic(num_links, [EMPTY])


@dataclass(frozen=True)
class AdmissionScheme:
    kind: str
    p: tuple

    def __post_init__(self):
        if self.kind not in ("coin_toss", "deterministic"):
            raise ValueError(f"unknown admission kind {self.kind!r}")
        p = tuple(float(x) for x in self.p)
        for x in p:
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"delivery ratio {x} outside [0, 1]")
        object.__setattr__(self, "p", p)


def admit_deficit(totals, scheme, rng):
    """Deficit increments for one slot given per-link arrival totals."""
    if scheme.kind == "deterministic":
        return [a * p for a, p in zip(totals, scheme.p)]
    return [rng.binomial(a, p) if a else 0 for a, p in zip(totals, scheme.p)]


def empirical_rate(process, horizon, rng):
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    proc = process.fresh()
    acc = [0] * proc.num_links
    for _ in range(horizon):
        for link, _, count in proc.step(rng).entries:
            acc[link] += count
    return [a / horizon for a in acc]
