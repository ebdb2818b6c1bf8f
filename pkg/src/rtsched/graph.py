"""Interference graphs and their maximal independent sets."""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations


@dataclass(frozen=True)
class InterferenceGraph:
    """Conflict relation over ``num_links`` links (0-indexed).

    ``edges`` is stored as a frozenset of sorted pairs, so ``(1, 0)`` and
    ``(0, 1)`` are the same edge.
    """

    num_links: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not isinstance(self.num_links, int) or self.num_links < 1:
            raise ValueError(f"num_links must be a positive integer, got {self.num_links!r}")
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop on link {a}")
            for x in (a, b):
                if not 0 <= x < self.num_links:
                    raise ValueError(f"edge endpoint {x} outside [0, {self.num_links})")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @cached_property
    def neighbors(self):
        adj = [set() for _ in range(self.num_links)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(frozenset(s) for s in adj)

    def adjacent(self, a, b):
        return b in self.neighbors[a]

    def is_complete(self):
        k = self.num_links
        return len(self.edges) == k * (k - 1) // 2

    def relabel(self, perm):
        """Graph with link ``l`` renamed to ``perm[l]``."""
        return InterferenceGraph(self.num_links, frozenset((perm[a], perm[b]) for a, b in self.edges))

    @cached_property
    def mis(self):
        return enumerate_mis(self)


@dataclass(frozen=True)
class MaximalScheduleFamily:
    graph: InterferenceGraph
    sets: tuple

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __getitem__(self, i):
        return self.sets[i]


def _canonical(sets):
    return tuple(sorted((tuple(sorted(s)) for s in sets)))


def enumerate_mis(graph):
    """All maximal independent sets, via pivoting Bron-Kerbosch on the complement.

    Maximal independent sets of G are the maximal cliques of its complement.
    Output order is lexicographic on the sorted member tuples, independent of
    the order the recursion finds them in.
    """
    k = graph.num_links
    nbr = graph.neighbors
    comp = [frozenset(range(k)) - nbr[v] - {v} for v in range(k)]
    found = []

    def expand(r, p, x):
        if not p and not x:
            found.append(r)
            return
        pivot = max(p | x, key=lambda u: len(comp[u] & p))
        for v in sorted(p - comp[pivot]):
            expand(r | {v}, p & comp[v], x & comp[v])
            p = p - {v}
            x = x | {v}

    expand(frozenset(), frozenset(range(k)), frozenset())
    return MaximalScheduleFamily(graph, _canonical(found))


def brute_force_mis(graph):
    """Reference enumeration over all 2^K subsets; only for small K."""
    k = graph.num_links
    if k > 16:
        raise ValueError("brute force enumeration limited to 16 links")
    out = []
    for mask in range(1 << k):
        members = [l for l in range(k) if mask >> l & 1]
        if not is_feasible_schedule(graph, members):
            continue
        if all(v in members or any(graph.adjacent(v, m) for m in members) for v in range(k)):
            out.append(members)
    return MaximalScheduleFamily(graph, _canonical(out))


def is_feasible_schedule(graph, links):
    links = list(links)
    return not any(graph.adjacent(a, b) for a, b in combinations(links, 2))


def is_maximal_over(graph, links, candidates):
    """True if no candidate outside ``links`` can be added without conflict."""
    chosen = set(links)
    for v in candidates:
        if v in chosen:
            continue
        if not any(graph.adjacent(v, m) for m in chosen):
            return False
    return True


def collocated(k):
    return InterferenceGraph(k, frozenset(combinations(range(k), 2)))


def star(k):
    if k < 1:
        raise ValueError("star needs at least one link")
    return InterferenceGraph(k, frozenset((0, leaf) for leaf in range(1, k)))


def complete_partite(part_sizes):
    sizes = list(part_sizes)
    if not sizes or any(int(s) < 1 for s in sizes):
        raise ValueError(f"part sizes must all be >= 1, got {sizes}")
    label = []
    for i, s in enumerate(sizes):
        label.extend([i] * int(s))
    edges = frozenset((a, b) for a, b in combinations(range(len(label)), 2) if label[a] != label[b])
    return InterferenceGraph(len(label), edges)


def from_edges(num_links, edges, one_indexed=False):
    off = 1 if one_indexed else 0
    return InterferenceGraph(int(num_links), frozenset((int(a) - off, int(b) - off) for a, b in edges))


def make_topology(kind, **params):
    """Build a named topology: ``collocated``, ``star``, ``complete_partite`` or ``explicit``."""
    if kind == "collocated":
        return collocated(int(params["num_links"]))
    if kind == "star":
        return star(int(params["num_links"]))
    if kind == "complete_partite":
        return complete_partite(params["parts"])
    if kind == "explicit":
        return from_edges(params["num_links"], params.get("edges", ()), params.get("one_indexed", True))
    raise ValueError(f"unknown topology kind {kind!r}")
