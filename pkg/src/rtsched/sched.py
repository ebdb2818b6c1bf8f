"""Per-slot scheduling policies.

Every policy maps ``(buffer, deficits, rng)`` to a decision ``{link: deadline}``
in which each scheduled link sends its earliest-deadline packet. Policies
keep no state between slots.
"""
from dataclasses import dataclass

from .dynamics import earliest_deadlines


@dataclass(frozen=True)
class MixingDistribution:
    support: tuple
    probs: tuple

    def expectation(self, values):
        return sum(p * v for p, v in zip(self.probs, values))


@dataclass(frozen=True)
class OrderedWeights:
    """Positive-weight MIS sorted by weight (descending), with n* and C_{n*}."""

    indices: tuple
    weights: tuple
    nstar: int = 0
    c_nstar: float = 0.0


# --- collocated: adaptive mixing over non-dominated links ---------------------

def find_nondominated(buffer, deficits):
    """Non-dominated links as ``[(link, w, e), ...]`` in decreasing deficit.

    Repeatedly takes the largest-deficit link still in play (ties: earliest
    deadline, then lowest index) and discards it together with every link
    whose earliest deadline is not strictly earlier.
    """
    es = earliest_deadlines(buffer)
    pool = [(l, deficits[l], e) for l, e in enumerate(es) if e is not None]
    out = []
    while pool:
        h = min(pool, key=lambda t: (-t[1], t[2], t[0]))
        out.append(h)
        pool = [t for t in pool if t[2] < h[2]]
    return out


def amnd_mixing(nd):
    """Probabilities over the non-dominated chain ``nd``.

    A zero deficit on a non-final entry pushes the remaining mass onward, so
    an all-zero chain sends everything to the earliest-deadline link.
    """
    if not nd:
        raise ValueError("empty non-dominated set")
    probs = []
    r = 1.0
    for i in range(len(nd) - 1):
        w, w_next = nd[i][1], nd[i + 1][1]
        ratio = w_next / w if w > 0 else 1.0
        p = min(1.0 - ratio, r)
        if p < 0.0:
            p = 0.0
        probs.append(p)
        r -= p
    probs.append(max(r, 0.0))
    return MixingDistribution(tuple(t[0] for t in nd), tuple(probs))


def amnd_expected_gain(buffer, deficits):
    nd = find_nondominated(buffer, deficits)
    if not nd:
        return 0.0
    mix = amnd_mixing(nd)
    return mix.expectation([t[1] for t in nd])


def amnd_decide(buffer, deficits, rng):
    nd = find_nondominated(buffer, deficits)
    if not nd:
        return {}
    if len(nd) == 1:
        link, _, e = nd[0]
        return {link: e}
    mix = amnd_mixing(nd)
    i = rng.categorical(mix.probs)
    link, _, e = nd[i]
    return {link: e}


# --- general graphs: adaptive mixing over maximal schedules -------------------

def mis_weights(mis, buffer, deficits):
    nonempty = [any(row) for row in buffer]
    return [sum(deficits[l] for l in m if nonempty[l]) for m in mis]


def amms_order(mis, buffer, deficits):
    """Positive-weight MIS sorted by weight, ties by canonical MIS order."""
    w = mis_weights(mis, buffer, deficits)
    order = sorted((i for i in range(len(w)) if w[i] > 0), key=lambda i: (-w[i], i))
    weights = [w[i] for i in order]
    if not weights:
        return OrderedWeights((), ())
    n, c = compute_nstar(weights)
    return OrderedWeights(tuple(order), tuple(weights), n, c)


def subharmonic(weights, n):
    """``C_n = (n - 1) / sum_{i<=n} 1/W_i`` over the ``n`` largest weights."""
    return (n - 1) / sum(1.0 / x for x in weights[:n])


def last_prob(weights, n):
    """``p^n_n = 1 - C_n / W_n``; n* is the largest n with this >= 0."""
    return 1.0 - subharmonic(weights, n) / weights[n - 1]


def compute_nstar(weights):
    """Binary search for n* over descending positive weights."""
    if not weights:
        raise ValueError("need at least one weight")
    for a, b in zip(weights, weights[1:]):
        if b > a:
            raise ValueError("weights must be in descending order")
    if weights[-1] <= 0:
        raise ValueError("weights must be positive")
    lo, hi = 1, len(weights)
    while lo != hi:
        mid = -(-(lo + hi) // 2)
        if last_prob(weights, mid) >= 0:
            lo = mid
        else:
            hi = mid - 1
    return lo, subharmonic(weights, lo)


def amms_mixing(ordered):
    n, c = ordered.nstar, ordered.c_nstar
    probs = tuple((1.0 - c / w) if i < n else 0.0 for i, w in enumerate(ordered.weights))
    return MixingDistribution(ordered.indices, probs)


def amms_expected_gain(ordered):
    return amms_mixing(ordered).expectation(ordered.weights)


def _complete_maximal(chosen, candidates, graph):
    for l in candidates:
        if l in chosen:
            continue
        if not any(graph.adjacent(l, m) for m in chosen):
            chosen[l] = None
    return chosen


def amms_decide(mis, buffer, deficits, rng):
    es = earliest_deadlines(buffer)
    if all(e is None for e in es):
        return {}
    ordered = amms_order(mis, buffer, deficits)
    if not ordered.indices:
        return edf_maximal_decide(buffer, mis.graph, rng)
    mix = amms_mixing(ordered)
    m = mis[mix.support[rng.categorical(mix.probs)]]
    chosen = {l: None for l in m if es[l] is not None}
    # fill any nonempty link whose only blockers in M are empty
    rest = sorted((l for l, e in enumerate(es) if e is not None), key=lambda l: (-deficits[l], l))
    _complete_maximal(chosen, rest, mis.graph)
    return {l: es[l] for l in chosen}


# --- greedy baselines ---------------------------------------------------------

def _greedy(order, es, graph):
    chosen = []
    for l in order:
        if all(not graph.adjacent(l, m) for m in chosen):
            chosen.append(l)
    return {l: es[l] for l in chosen}


def ldf_decide(buffer, deficits, graph, tie_mode, rng):
    """Largest-deficit-first greedy maximal schedule.

    ``tie_mode`` ``"RD"`` breaks deficit ties uniformly at random, ``"ED"`` by
    earliest deadline then index.
    """
    es = earliest_deadlines(buffer)
    live = [l for l, e in enumerate(es) if e is not None]
    if not live:
        return {}
    if tie_mode == "ED":
        order = sorted(live, key=lambda l: (-deficits[l], es[l], l))
    elif tie_mode == "RD":
        if len({deficits[l] for l in live}) < len(live):
            keys = {l: rng.uniform() for l in live}
            order = sorted(live, key=lambda l: (-deficits[l], keys[l]))
        else:
            order = sorted(live, key=lambda l: -deficits[l])
    else:
        raise ValueError(f"unknown tie mode {tie_mode!r}")
    return _greedy(order, es, graph)


def edf_maximal_decide(buffer, graph, rng=None):
    es = earliest_deadlines(buffer)
    live = sorted((l for l, e in enumerate(es) if e is not None), key=lambda l: (es[l], l))
    return _greedy(live, es, graph)


# --- named policy objects -----------------------------------------------------

class Policy:
    name = None

    def __init__(self, graph):
        self.graph = graph

    def decide(self, buffer, deficits, rng):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class AMND(Policy):
    name = "amnd"

    def __init__(self, graph):
        if not graph.is_complete():
            raise ValueError("amnd requires a collocated (complete) interference graph")
        super().__init__(graph)

    def decide(self, buffer, deficits, rng):
        return amnd_decide(buffer, deficits, rng)


class AMMS(Policy):
    name = "amms"

    def __init__(self, graph):
        super().__init__(graph)
        self.mis = graph.mis

    def decide(self, buffer, deficits, rng):
        return amms_decide(self.mis, buffer, deficits, rng)


class LDF(Policy):
    def __init__(self, graph, tie_mode):
        super().__init__(graph)
        self.tie_mode = tie_mode
        self.name = f"ldf-{tie_mode.lower()}"

    def decide(self, buffer, deficits, rng):
        return ldf_decide(buffer, deficits, self.graph, self.tie_mode, rng)

    def __repr__(self):
        return f"LDF({self.tie_mode!r})"


class EDF(Policy):
    name = "edf"

    def decide(self, buffer, deficits, rng):
        return edf_maximal_decide(buffer, self.graph, rng)


POLICY_NAMES = ("amnd", "amms", "ldf-rd", "ldf-ed", "edf")


def make_policy(name, graph):
    if name == "amnd":
        return AMND(graph)
    if name == "amms":
        return AMMS(graph)
    if name == "ldf-rd":
        return LDF(graph, "RD")
    if name == "ldf-ed":
        return LDF(graph, "ED")
    if name == "edf":
        return EDF(graph)
    raise ValueError(f"unknown scheduler {name!r}; choose from {', '.join(POLICY_NAMES)}")
