"""Deterministic pseudo-random numbers for property batteries and restarts.

The generator is xorshift64* : 64-bit shift-register state with a final
multiplicative scramble. Per-sample streams are derived from a (seed, stream)
pair by advancing a splitmix64 chain, so sample k of a battery draws from its
own reproducible stream regardless of evaluation order. Everything is integer
arithmetic on Python ints masked to 64 bits; results are identical across
platforms and require no global state.
"""

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64_step(state):
    """One splitmix64 update; returns (new_state, output)."""
    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Xorshift64Star:
    """xorshift64* stream whose state is seeded via splitmix64 from (seed, stream)."""

    def __init__(self, seed, stream=0):
        if stream < 0:
            raise ValueError("stream index must be nonnegative")
        sm = int(seed) & _MASK64
        out = 0
        for _ in range(int(stream) + 1):
            sm, out = _splitmix64_step(sm)
        # the all-zero state is the one fixed point of the shift register
        self._state = out if out != 0 else _SPLITMIX_GAMMA

    def next_u64(self):
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self):
        """Double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform_in(self, lo, hi):
        return lo + (hi - lo) * self.uniform()

    def below(self, n):
        """Integer in [0, n) by rejection-free modular draw (n must be small)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.uniform() * n) % n
