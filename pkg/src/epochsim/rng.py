"""Deterministic per-object random streams.

Each simulation object owns one splitmix64 stream seeded from the global
run seed and the object identifier, so the sequence of draws made while
processing that object's events does not depend on which worker runs the
batch or on the thread count.  The compiled core implements the identical
generator, bit for bit, which lets the two backends be cross-checked.
"""

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class ObjectRng:
    """splitmix64 stream; state advances by the golden-ratio increment."""

    __slots__ = ("state",)

    def __init__(self, seed, obj_id):
        self.state = (seed ^ ((obj_id + 1) * _GOLDEN)) & _MASK

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & _MASK
        return _mix(self.state)

    def uniform(self):
        """Uniform double in [0, 1) with 53 significant bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def exponential(self, mean):
        """Exponential draw with the given mean (0 mean collapses to 0)."""
        if mean <= 0.0:
            return 0.0
        return -mean * math.log(1.0 - self.uniform())

    def randrange(self, n):
        return self.next_u64() % n


def stream_for(seed, obj_id):
    return ObjectRng(seed & _MASK, obj_id)
