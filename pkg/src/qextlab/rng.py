"""Counter-mode PRF randomness streams.

Every party in a session draws from its own PrfStream, derived from the
session seed by labeled derivation.  A stream's position is part of its
state, so a deep copy of a party (the rewinding primitive) replays the
same randomness up to the fork point and fresh bytes after it.
"""

from __future__ import annotations

import hashlib

import numpy as np

BLOCK = 32  # sha256 output size


def _expand(seed: bytes, counter: int) -> bytes:
    return hashlib.sha256(seed + counter.to_bytes(8, "little")).digest()


def derive_seed(seed: bytes, label: str) -> bytes:
    return hashlib.sha256(b"derive/" + seed + b"/" + label.encode()).digest()


class PrfStream:
    """Deterministic byte stream keyed by (seed, label), counter-mode."""

    def __init__(self, seed: bytes, label: str = "root"):
        if not isinstance(seed, (bytes, bytearray)) or len(seed) == 0:
            raise ValueError("seed must be non-empty bytes")
        self._seed = derive_seed(bytes(seed), label)
        self.label = label
        self._counter = 0
        self._buf = b""

    def child(self, label: str) -> "PrfStream":
        """Independent stream derived by label; does not advance this one."""
        return PrfStream(self._seed, label)

    @property
    def position(self) -> tuple:
        return (self._counter, len(self._buf))

    def take(self, n: int) -> bytes:
        out = bytearray()
        while n > 0:
            if not self._buf:
                self._buf = _expand(self._seed, self._counter)
                self._counter += 1
            chunk = self._buf[:n]
            self._buf = self._buf[len(chunk):]
            out += chunk
            n -= len(chunk)
        return bytes(out)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] via rejection sampling."""
        if hi < lo:
            raise ValueError("empty range")
        span = hi - lo + 1
        nbytes = (span.bit_length() + 7) // 8
        limit = (256 ** nbytes // span) * span
        while True:
            v = int.from_bytes(self.take(nbytes), "little")
            if v < limit:
                return lo + v % span

    def bit(self) -> int:
        return self.take(1)[0] & 1

    def bits(self, n: int) -> np.ndarray:
        raw = np.frombuffer(self.take((n + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:n].astype(np.int64)

    def integers(self, high: int, size: int) -> np.ndarray:
        """Vector of uniform integers in [0, high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        if high & (high - 1) == 0:
            # power of two: mask, no rejection needed
            nbytes = max(1, (high.bit_length() + 6) // 8)
            raw = np.frombuffer(self.take(nbytes * size), dtype=np.uint8)
            vals = raw.reshape(size, nbytes).astype(np.int64)
            acc = np.zeros(size, dtype=np.int64)
            for b in range(nbytes):
                acc |= vals[:, b] << (8 * b)
            return acc % high
        # vectorized rejection sampling
        nbytes = max(1, ((high - 1).bit_length() + 7) // 8)
        limit = (256 ** nbytes // high) * high
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            need = size - filled
            raw = np.frombuffer(self.take(nbytes * (need + 4)), dtype=np.uint8)
            vals = raw.reshape(-1, nbytes).astype(np.int64)
            acc = np.zeros(len(vals), dtype=np.int64)
            for b in range(nbytes):
                acc |= vals[:, b] << (8 * b)
            good = acc[acc < limit] % high
            take_n = min(need, len(good))
            out[filled:filled + take_n] = good[:take_n]
            filled += take_n
        return out

    def shuffle(self, n: int) -> np.ndarray:
        """Uniform permutation of range(n) (Fisher-Yates)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randint(0, i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
