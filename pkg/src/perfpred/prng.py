"""Counter-based deterministic random numbers.

Every stochastic decision in the pipeline (fold shuffles, synthetic data)
flows through this generator so that results are reproducible across
platforms and Python versions. The generator is a keyed SplitMix64: output i
is a pure function of (seed, stream, i), so runs can be replayed or
parallelised without shared state.
"""

from __future__ import annotations

PRNG_ID = "splitmix64-counter"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int, counter: int) -> int:
    """The i-th 64-bit output of the stream keyed by ``seed``."""
    return _mix((seed * 0x9E3779B97F4A7C15 + (counter + 1) * 0xD1B54A32D192ED03) & _MASK64)


class CounterRng:
    """Stateful convenience wrapper over :func:`splitmix64`.

    ``stream`` separates independent substreams under one seed (e.g. one per
    fold or per synthetic feature) without correlated outputs.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = (seed ^ _mix(stream * _GOLDEN)) & _MASK64
        self.counter = 0

    def next_u64(self) -> int:
        v = splitmix64(self.seed, self.counter)
        self.counter += 1
        return v

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = self.next_u64() / float(1 << 64)
        return lo + (hi - lo) * u

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (unbiased)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self) -> float:
        """Standard normal via Box-Muller."""
        import math

        u1 = max(self.uniform(), 1e-300)
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
