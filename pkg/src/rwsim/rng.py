"""Deterministic randomness for simulations.

Everything stochastic in this package draws from :class:`SplitMix64`, a
64-bit-state generator with a one-call finalizer.  It is fast, has no hidden
global state, and — unlike ``random.Random`` — supports cheap *stream
splitting*: ``stream_seed(master, i)`` derives an independent seed for trial
``i`` so that a batch of trials produces identical results no matter how the
trials are distributed over worker processes.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # golden-ratio increment


def _mix(z: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix of a 64-bit word."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_seed(master: int, index: int) -> int:
    """Seed for the ``index``-th independent stream under ``master``.

    Defined as the finalizer applied to ``master + (index+1) * gamma``; the
    ``+1`` keeps stream 0 distinct from the master sequence itself.
    """
    if index < 0:
        raise ValueError("stream index must be >= 0")
    return _mix((master + (index + 1) * _GAMMA) & _MASK)


class SplitMix64:
    """SplitMix64 pseudo-random generator (64-bit state, 2^64 period)."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix(self.state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def bernoulli(self, p: float) -> int:
        """1 with probability ``p``, else 0."""
        return 1 if self.uniform() < p else 0

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (exact, unbiased)."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        # Rejection zone keeps the distribution exactly uniform.
        limit = _MASK - (_MASK + 1) % n
        while True:
            u = self.next_u64()
            if u <= limit:
                return u % n

    def split(self, index: int) -> "SplitMix64":
        """Independent child generator for stream ``index``."""
        return SplitMix64(stream_seed(self.state, index))
