"""Counter-based random streams (Philox4x32-10).

Every uniform is a pure function of ``(seed, stream_id, path, step, slot)``:
the key is derived from ``(seed, stream_id)`` and the 128-bit Philox counter
carries ``(step, slot, path_lo, path_hi)``.  Paths can therefore be simulated
in any order, on any number of workers, with bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

_MASK64 = (1 << 64) - 1
_TWO53 = 9007199254740992.0


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten rounds of Philox4x32 on uint32 words."""
    for _ in range(10):
        p0 = np.uint64(0xD2511F53) * np.uint64(c0)
        p1 = np.uint64(0xCD9E8D57) * np.uint64(c2)
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0 & np.uint64(0xFFFFFFFF))
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1 & np.uint64(0xFFFFFFFF))
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + np.uint32(0x9E3779B9))
        k1 = np.uint32(k1 + np.uint32(0xBB67AE85))
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _to_unit(hi, lo):
    # 53 random bits, shifted by half an ulp: the result lies strictly in (0, 1)
    m = (np.uint64(hi >> np.uint32(5)) << np.uint64(26)) + np.uint64(lo >> np.uint32(6))
    return (np.float64(m) + 0.5) / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def uniform_pair(k0, k1, path, step, slot):
    """Two independent uniforms on (0, 1) for one (path, step, slot) cell."""
    p = np.uint64(path)
    c = philox4x32(
        np.uint32(step),
        np.uint32(slot),
        np.uint32(p & np.uint64(0xFFFFFFFF)),
        np.uint32(p >> np.uint64(32)),
        k0,
        k1,
    )
    return _to_unit(c[0], c[1]), _to_unit(c[2], c[3])


@nb.njit(cache=True)
def _uniform_block(k0, k1, paths, steps, slot):
    out = np.empty((paths.shape[0], 2))
    for i in range(paths.shape[0]):
        u, v = uniform_pair(k0, k1, paths[i], steps[i], slot)
        out[i, 0] = u
        out[i, 1] = v
    return out


@dataclass
class RngStream:
    """A position in a counter-based stream.

    ``counter`` is the next unused path index.  A sampling call that needs
    ``n`` independent paths takes indices ``counter .. counter + n - 1`` and
    advances the counter; inside a path, draws are addressed by step number.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id", "counter"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 bits, got {value}")

    @property
    def key(self) -> tuple[np.uint32, np.uint32]:
        k = splitmix64(splitmix64(int(self.seed)) ^ int(self.stream_id))
        return np.uint32(k & 0xFFFFFFFF), np.uint32(k >> 32)

    def take(self, n: int) -> int:
        """Reserve ``n`` path indices; return the first one."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        start = self.counter
        if start + n > _MASK64:
            raise OverflowError("path counter exhausted")
        self.counter = start + n
        return start

    def spawn(self, stream_id: int) -> "RngStream":
        """Independent stream sharing the seed."""
        return RngStream(self.seed, stream_id, 0)

    def copy(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.counter)

    def uniforms(self, paths, steps, slot: int = 0) -> np.ndarray:
        """Array of shape (len(paths), 2) of uniforms at the given cells."""
        paths = np.ascontiguousarray(paths, dtype=np.uint64)
        steps = np.ascontiguousarray(np.broadcast_to(steps, paths.shape), dtype=np.int64)
        k0, k1 = self.key
        return _uniform_block(k0, k1, paths, steps, np.int64(slot))
