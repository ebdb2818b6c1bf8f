"""Labelled, reproducible random streams.

Each simulation run splits its seed into independent streams keyed by a
purpose label (``traffic``, ``admission``, ``policy``) so that swapping the
scheduler never perturbs the arrival sample path.
"""
import hashlib

import numpy as np

_BLOCK = 4096


def _label_key(label):
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class RandomStream:
    """Buffered uniform stream derived from ``(seed, label)``.

    Draws are pulled from numpy in blocks; scalar access is what the
    slot loop needs, and per-call numpy overhead would dominate otherwise.
    """

    def __init__(self, seed, label=""):
        self.seed = int(seed)
        self.label = label
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=_label_key(label))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._buf = []
        self._pos = 0

    def uniform(self):
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def bernoulli(self, p):
        return self.uniform() < p

    def binomial(self, n, p):
        """Sum of ``n`` independent Bernoulli(p) draws, one uniform per trial."""
        if p <= 0.0:
            return 0
        if p >= 1.0:
            return n
        k = 0
        for _ in range(n):
            if self.uniform() < p:
                k += 1
        return k

    def categorical(self, probs):
        """Index drawn from ``probs`` by inverse CDF; the last index absorbs rounding."""
        u = self.uniform()
        acc = 0.0
        last = len(probs) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        # fall back to the last index carrying positive mass
        for i in range(last, -1, -1):
            if probs[i] > 0:
                return i
        return last

    def spawn(self, label):
        return RandomStream(self.seed, f"{self.label}/{label}")


def run_streams(seed, run_id=""):
    """The three per-run streams used by the engine."""
    prefix = f"{run_id}:" if run_id else ""
    return {
        purpose: RandomStream(seed, prefix + purpose)
        for purpose in ("traffic", "admission", "policy")
    }
