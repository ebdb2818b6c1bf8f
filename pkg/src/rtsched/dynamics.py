"""Per-slot buffer and deficit evolution.

A buffer state is a list of per-link lists, ``psi[l][d - 1]`` being the
number of packets on link ``l`` with remaining deadline ``d``. A schedule
decision is a dict ``{link: deadline_class}`` over transmitting links.
Every function here returns new objects and leaves its inputs alone.
"""


def empty_buffers(num_links, d_max):
    return [[0] * d_max for _ in range(num_links)]


def add_arrivals(buffer, batch):
    out = [row[:] for row in buffer]
    for link, deadline, count in batch.entries:
        out[link][deadline - 1] += count
    return out


def earliest_deadline(buffer, link):
    """Smallest remaining deadline held by ``link``, or None when empty."""
    for d, c in enumerate(buffer[link]):
        if c:
            return d + 1
    return None


def earliest_deadlines(buffer):
    return [earliest_deadline(buffer, l) for l in range(len(buffer))]


def nonempty_links(buffer):
    return {l for l, row in enumerate(buffer) if any(row)}


def check_decision(buffer, decision, graph=None):
    for link, d in decision.items():
        if not 1 <= d <= len(buffer[link]) or buffer[link][d - 1] <= 0:
            raise ValueError(f"link {link} transmits from empty deadline class {d}")
    if graph is not None:
        links = sorted(decision)
        for i, a in enumerate(links):
            for b in links[i + 1:]:
                if graph.adjacent(a, b):
                    raise ValueError(f"links {a} and {b} interfere")


def advance_buffers(buffer, decision, next_arrivals):
    """Apply one slot of buffer dynamics.

    Returns ``(next_buffer, expired)`` where ``expired[l]`` counts the packets
    of remaining deadline 1 that were not transmitted this slot.
    """
    check_decision(buffer, decision)
    out = []
    expired = []
    for link, row in enumerate(buffer):
        row = row[:]
        d = decision.get(link)
        if d is not None:
            row[d - 1] -= 1
        expired.append(row[0])
        row = row[1:] + [0]
        out.append(row)
    for link, deadline, count in next_arrivals.entries:
        out[link][deadline - 1] += count
    return out, expired


def update_deficits(deficits, admitted, decision):
    """One step of the clamped deficit recursion ``[w + a - I]^+``."""
    out = []
    for l, (w, a) in enumerate(zip(deficits, admitted)):
        v = w + a - (1 if l in decision else 0)
        out.append(v if v > 0.0 else 0.0)
    return out


def slot_gain(deficits, decision):
    """Deficit-weighted service ``sum_l w_l I_l`` using pre-update deficits."""
    return sum(deficits[l] for l in decision)


def max_nonempty_deficit(buffer, deficits):
    return max((w for w, row in zip(deficits, buffer) if any(row)), default=0.0)
