"""Trapdoor claw-free functions over small LWE-style parameters.

The family is exact-support: branch b maps x to A.enc(x) + b*t + e with e
uniform in [-noise_bound, noise_bound]^m and chk an exact bound test, so
the two support distributions of a matched claw coincide and device
simulation is exact.  The trapdoor secret s is a digit-wise shift of the
domain encoding restricted to full-range digits, which makes t = A.s land
exactly on the encoded lattice and the claw map a bijection on X.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ArgumentError, ConfigurationError, DecodeError,
                     DomainError, InversionError, ProtocolOrderError,
                     StateConsumedError)
from .rng import PrfStream

_GEN_RETRIES = 200


@dataclass(frozen=True)
class NtcfParams:
    n: int
    m: int
    q: int
    noise_bound: int
    x_bits: int
    w_len: int
    seed: bytes = b"\x00" * 32

    def __post_init__(self):
        if self.q < 2:
            raise ConfigurationError("q must be >= 2")
        if not (0 <= self.noise_bound < self.q / 4):
            raise ConfigurationError("noise_bound must satisfy 0 <= nb < q/4")
        if not (1 <= self.x_bits <= 20):
            raise ConfigurationError("x_bits must be in [1, 20]")
        if self.w_len < self.x_bits:
            raise ConfigurationError("w_len must be >= x_bits")
        if self.n < 1 or self.m < 1:
            raise ConfigurationError("n, m must be positive")
        if self.q ** self.n < 2 ** self.x_bits:
            raise ConfigurationError("q^n too small to encode the domain")

    @property
    def domain_size(self) -> int:
        return 1 << self.x_bits

    def full_digits(self) -> np.ndarray:
        """Indices i where base-q digit i of the domain spans all of [0,q)."""
        idx = []
        for i in range(self.n):
            if self.q ** (i + 1) <= self.domain_size:
                idx.append(i)
        return np.array(idx, dtype=np.int64)


def encode_domain(params: NtcfParams, x) -> np.ndarray:
    """Base-q digit encoding; accepts a scalar or a vector of x values."""
    xs = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if np.any((xs < 0) | (xs >= params.domain_size)):
        raise DomainError("x outside [0, 2^x_bits)")
    digits = np.empty((len(xs), params.n), dtype=np.int64)
    rem = xs.copy()
    for i in range(params.n):
        digits[:, i] = rem % params.q
        rem //= params.q
    return digits[0] if np.isscalar(x) or np.asarray(x).ndim == 0 else digits


def _decode_digits(params: NtcfParams, digits: np.ndarray) -> int:
    val = 0
    for i in range(params.n - 1, -1, -1):
        val = val * params.q + int(digits[i])
    return val


@dataclass(frozen=True)
class NtcfKey:
    params: NtcfParams
    A: np.ndarray  # m x n over Z_q
    t: np.ndarray  # m-vector over Z_q

    def to_bytes(self) -> bytes:
        """Canonical little-endian layout: all matrix entries then t."""
        width = (self.params.q - 1).bit_length()
        nbytes = (width + 7) // 8
        flat = np.concatenate([self.A.ravel(), self.t])
        return b"".join(int(v).to_bytes(nbytes, "little") for v in flat)


@dataclass(frozen=True)
class NtcfTrapdoor:
    params: NtcfParams
    s: np.ndarray  # n-vector over Z_q (digit shift)
    key: NtcfKey
    # inversion aid: centers[x] = A.enc(x) mod q for every x in X
    inversion_table: np.ndarray = field(repr=False, default=None)

    def to_bytes(self) -> bytes:
        width = (self.params.q - 1).bit_length()
        nbytes = (width + 7) // 8
        return b"".join(int(v).to_bytes(nbytes, "little") for v in self.s)


@dataclass(frozen=True)
class Claw:
    x0: int
    x1: int
    y: np.ndarray


def _centered(v: np.ndarray, q: int) -> np.ndarray:
    return (v + q // 2) % q - q // 2


def gen(params: NtcfParams, rng: PrfStream) -> tuple[NtcfKey, NtcfTrapdoor]:
    """Sample a key/trapdoor pair; resamples A until branch supports are
    pairwise disjoint (exact when |X| <= 4096, sampled above)."""
    full = params.full_digits()
    if len(full) == 0:
        raise ConfigurationError(
            "no full-range digit: claw shift would be degenerate "
            "(need q <= 2^x_bits)")
    # nonzero digit shift on the full digits; zero elsewhere
    s = np.zeros(params.n, dtype=np.int64)
    while True:
        cand = rng.integers(params.q, len(full))
        if np.any(cand != 0):
            s[full] = cand
            break

    xs = np.arange(params.domain_size, dtype=np.int64)
    enc_all = encode_domain(params, xs)  # |X| x n
    sep = 2 * params.noise_bound
    for _ in range(_GEN_RETRIES):
        A = rng.integers(params.q, params.m * params.n).reshape(
            params.m, params.n)
        centers = (enc_all @ A.T) % params.q  # |X| x m
        if _separated(centers, params.q, sep):
            t = (A @ s) % params.q
            key = NtcfKey(params=params, A=A, t=t)
            td = NtcfTrapdoor(params=params, s=s, key=key,
                              inversion_table=centers)
            return key, td
    raise ConfigurationError(
        "could not find a support-separating matrix A; parameters too tight")


def _separated(centers: np.ndarray, q: int, sep: int) -> bool:
    n_pts = len(centers)
    if n_pts <= 4096:
        c32 = centers.astype(np.int32)
        chunk = max(1, (1 << 23) // (n_pts * centers.shape[1]))
        for start in range(0, n_pts, chunk):
            block = c32[start:start + chunk]
            diff = (block[:, None, :] - c32[None, :, :]) % q
            np.minimum(diff, q - diff, out=diff)  # centered magnitude
            dist = diff.max(axis=2)
            rows = np.arange(start, start + len(block))
            dist[np.arange(len(block)), rows] = q  # ignore self-distance
            if dist.min() <= sep:
                return False
        return True
    # sampled check for large domains
    rs = np.random.RandomState(0)
    a = rs.randint(0, n_pts, 200000)
    b = rs.randint(0, n_pts, 200000)
    mask = a != b
    diff = _centered(centers[a[mask]] - centers[b[mask]], q)
    return bool(np.abs(diff).max(axis=1).min() > sep)


def eval_prime(key: NtcfKey, b: int, x: int, rng: PrfStream) -> np.ndarray:
    p = key.params
    if b not in (0, 1):
        raise ArgumentError("branch bit must be 0 or 1")
    if not (0 <= x < p.domain_size):
        raise DomainError("x outside [0, 2^x_bits)")
    e = rng.integers(2 * p.noise_bound + 1, p.m) - p.noise_bound
    return (key.A @ encode_domain(p, int(x)) + b * key.t + e) % p.q


def chk(key: NtcfKey, b: int, x: int, y: np.ndarray) -> bool:
    p = key.params
    if b not in (0, 1) or not (0 <= x < p.domain_size):
        return False
    resid = _centered((np.asarray(y) - key.A @ encode_domain(p, int(x))
                       - b * key.t) % p.q, p.q)
    return bool(np.abs(resid).max() <= p.noise_bound)


def inv(td: NtcfTrapdoor, b: int, y: np.ndarray) -> int:
    p = td.params
    y0 = (np.asarray(y, dtype=np.int64) - b * td.key.t) % p.q
    resid = np.abs(_centered(td.inversion_table - y0, p.q)).max(axis=1)
    hits = np.nonzero(resid <= p.noise_bound)[0]
    if len(hits) == 0:
        raise InversionError(f"no branch-{b} preimage")
    # separation at gen time guarantees uniqueness
    return int(hits[0])


def claw_of(td: NtcfTrapdoor, y: np.ndarray) -> Claw:
    x0 = inv(td, 0, y)
    x1 = inv(td, 1, y)
    return Claw(x0=x0, x1=x1, y=np.asarray(y, dtype=np.int64))


def claw_partner(td: NtcfTrapdoor, x0: int) -> int:
    """x1 such that f_1(x1) has the same support as f_0(x0)."""
    p = td.params
    digits = (encode_domain(p, int(x0)) - td.s) % p.q
    return _decode_digits(p, digits)


def j_encode(params: NtcfParams, x: int) -> np.ndarray:
    """Injection J: x as w_len little-endian bits."""
    if not (0 <= x < params.domain_size):
        raise DomainError("x outside [0, 2^x_bits)")
    return ((x >> np.arange(params.w_len)) & 1).astype(np.int64)


def j_decode(params: NtcfParams, bits: np.ndarray) -> int:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (params.w_len,) or np.any((bits != 0) & (bits != 1)):
        raise DecodeError("malformed J image")
    val = int((bits << np.arange(params.w_len)).sum())
    if val >= params.domain_size:
        raise DecodeError("bitstring outside the range of J")
    return val


class SimulatedDevice:
    """Trapdoor-backed stand-in for one claw-state repetition.

    Constructed by the harness from (key, trapdoor); protocol code only
    ever calls gen_y / measure.  Single-shot: one y, one measurement.
    """

    def __init__(self, key: NtcfKey, td: NtcfTrapdoor, rng: PrfStream):
        self._key = key
        self._td = td
        self._rng = rng
        self._claw: Claw | None = None
        self._consumed = False

    def gen_y(self) -> np.ndarray:
        if self._claw is not None:
            raise ProtocolOrderError("gen_y already called on this device")
        p = self._key.params
        b = self._rng.bit()
        x = self._rng.randint(0, p.domain_size - 1)
        y = eval_prime(self._key, b, x, self._rng)
        self._claw = claw_of(self._td, y)
        return y

    def measure(self, challenge: int):
        if self._claw is None:
            raise ProtocolOrderError("measure before gen_y")
        if self._consumed:
            raise StateConsumedError("device state already measured")
        self._consumed = True
        p = self._key.params
        if challenge == 0:
            b = self._rng.bit()
            x = self._claw.x0 if b == 0 else self._claw.x1
            return DeviceResponse(kind="preimage", b=b, x=x)
        if challenge == 1:
            delta = j_encode(p, self._claw.x0) ^ j_encode(p, self._claw.x1)
            while True:
                d = self._rng.bits(p.w_len)
                if good_set_contains(p, self._claw, d):
                    break
            u = int((d & delta).sum() % 2)
            return DeviceResponse(kind="equation", d=d, u=u)
        raise ArgumentError("challenge must be 0 or 1")


def good_set_contains(params: NtcfParams, claw: Claw, d: np.ndarray) -> bool:
    """G_{k,0,x0} ∩ G_{k,1,x1}: every nonzero d (the digit-shift claw keeps
    J(x0) xor J(x1) nonzero, so no further exclusions arise)."""
    return bool(np.any(np.asarray(d) != 0))


@dataclass(frozen=True)
class DeviceResponse:
    kind: str  # "preimage" | "equation"
    b: int | None = None
    x: int | None = None
    d: np.ndarray | None = None
    u: int | None = None
