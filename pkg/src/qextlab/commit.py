"""Binding commitments, XOR sharing, and the extractable grid pattern.

Two recomputable schemes:

* CommitScheme (flagship): c = A.r + floor(q/2).enc(m) + e(r) over a prime
  modulus.  Noise is derived deterministically from r, so commit is a pure
  function of (m, r).  Zero-noise mode makes the scheme linear in (r, m),
  which the QZK trapdoor clause relies on.
* BinaryCommitScheme: c = A.r xor enc(m) over GF(2) with an explicit
  full-rank pad block, perfectly binding and XOR-only to recompute -- the
  variant used inside garbled circuits.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, CapabilityError
from .rng import PrfStream


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8),
                       bitorder="little").tobytes()


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")
    if len(bits) < n:
        raise ArgumentError("byte string too short")
    return bits[:n].astype(np.int64)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ArgumentError("length mismatch")
    return (np.frombuffer(a, dtype=np.uint8)
            ^ np.frombuffer(b, dtype=np.uint8)).tobytes()


def xor_share(secret: bytes, rng: PrfStream) -> tuple[bytes, bytes]:
    sh0 = rng.take(len(secret))
    return sh0, xor_bytes(secret, sh0)


@dataclass(frozen=True)
class Commitment:
    data: bytes


@dataclass(frozen=True)
class Opening:
    message: bytes
    randomness: bytes


@dataclass(frozen=True)
class CommitParams:
    msg_bits: int
    q: int = 257
    n_r: int = 8
    noise_bound: int = 1
    pad_rows: int = 8  # extra output rows so tiny instances stay binding
    tag: bytes = b"commit-v1"

    def __post_init__(self):
        if self.msg_bits < 1 or self.n_r < 1 or self.q < 3:
            raise ArgumentError("degenerate commitment parameters")
        if self.pad_rows < 0:
            raise ArgumentError("pad_rows must be >= 0")


class CommitScheme:
    def __init__(self, params: CommitParams):
        self.params = params
        p = params
        self.h = p.q // 2
        self.rows = p.msg_bits + p.pad_rows
        self.msg_len = (p.msg_bits + 7) // 8
        self.rand_len = 2 * p.n_r
        self.coord_len = 2  # u16 per Z_q coordinate (q < 2^16 assumed)
        stream = PrfStream(p.tag + p.q.to_bytes(4, "little"), "commit-A")
        self.A = stream.integers(p.q, self.rows * p.n_r).reshape(
            self.rows, p.n_r)

    # -- byte codecs ------------------------------------------------------
    def rand_to_vec(self, r: bytes) -> np.ndarray:
        if len(r) != self.rand_len:
            raise ArgumentError(
                f"randomness must be {self.rand_len} bytes, got {len(r)}")
        vec = np.frombuffer(r, dtype="<u2").astype(np.int64)
        if np.any(vec >= self.params.q):
            raise ArgumentError("randomness coordinate out of range")
        return vec

    def vec_to_rand(self, vec: np.ndarray) -> bytes:
        return (np.asarray(vec, dtype=np.int64) % self.params.q).astype(
            "<u2").tobytes()

    def vec_to_commit(self, vec: np.ndarray) -> bytes:
        return (np.asarray(vec, dtype=np.int64) % self.params.q).astype(
            "<u2").tobytes()

    def commit_to_vec(self, data: bytes) -> np.ndarray:
        return np.frombuffer(data, dtype="<u2").astype(np.int64)

    def msg_to_bits(self, m: bytes) -> np.ndarray:
        if len(m) != self.msg_len:
            raise ArgumentError(
                f"message must be {self.msg_len} bytes, got {len(m)}")
        return unpack_bits(m, self.params.msg_bits)

    # -- core ops ---------------------------------------------------------
    def _noise(self, r: bytes) -> np.ndarray:
        """Deterministic noise from r: one hash expansion, rejection off a
        multiple of the range so coordinates stay exactly uniform."""
        nb = self.params.noise_bound
        if nb == 0:
            return np.zeros(self.rows, dtype=np.int64)
        span = 2 * nb + 1
        limit = 256 - 256 % span
        out = np.empty(self.rows, dtype=np.int64)
        filled = 0
        ctr = 0
        while filled < self.rows:
            digest = hashlib.sha256(self.params.tag + r + b"noise"
                                    + ctr.to_bytes(4, "little")).digest()
            cand = np.frombuffer(digest, dtype=np.uint8)
            cand = cand[cand < limit]
            n = min(len(cand), self.rows - filled)
            out[filled:filled + n] = cand[:n] % span
            filled += n
            ctr += 1
        return out - nb

    def sample_randomness(self, rng: PrfStream) -> bytes:
        return self.vec_to_rand(rng.integers(self.params.q, self.params.n_r))

    def commit(self, message: bytes, randomness: bytes) -> Commitment:
        r = self.rand_to_vec(randomness)
        m = self.msg_to_bits(message)
        enc = np.concatenate(
            [m, np.zeros(self.params.pad_rows, dtype=np.int64)])
        c = (self.A @ r + self.h * enc
             + self._noise(randomness)) % self.params.q
        return Commitment(self.vec_to_commit(c))

    def verify_open(self, c: Commitment, message: bytes,
                    randomness: bytes) -> bool:
        try:
            return self.commit(message, randomness).data == c.data
        except ArgumentError:
            return False

    def decode(self, c: Commitment, randomness: bytes) -> bytes:
        """Recover the message from (c, r): strip A.r and the r-derived
        noise; what remains must be exactly h per message bit."""
        r = self.rand_to_vec(randomness)
        resid = (self.commit_to_vec(c.data) - self.A @ r
                 - self._noise(randomness)) % self.params.q
        if np.any((resid != 0) & (resid != self.h)):
            raise ArgumentError("randomness does not open this commitment")
        if np.any(resid[self.params.msg_bits:] != 0):
            raise ArgumentError("nonzero pad rows: wrong randomness")
        bits = (resid[: self.params.msg_bits] == self.h).astype(np.int64)
        return pack_bits(bits).ljust(self.msg_len, b"\x00")[: self.msg_len]

    # -- batched single-bit path (matrix-of-commitments workloads) ---------
    def commit_bits(self, bits: np.ndarray, rng: PrfStream):
        """Commit n single-bit messages at once; msg_bits must be 1."""
        if self.params.msg_bits != 1:
            raise ArgumentError("batched path is for 1-bit schemes")
        bits = np.asarray(bits, dtype=np.int64).ravel()
        n = len(bits)
        R = rng.integers(self.params.q, n * self.params.n_r).reshape(
            n, self.params.n_r)
        rands = [self.vec_to_rand(R[i]) for i in range(n)]
        noise = np.stack([self._noise(rb) for rb in rands])
        enc = np.zeros((n, self.rows), dtype=np.int64)
        enc[:, 0] = bits
        C = (R @ self.A.T + self.h * enc + noise) % self.params.q
        comms = [Commitment(self.vec_to_commit(C[i])) for i in range(n)]
        opens = [Opening(message=bytes([int(b)]), randomness=rb)
                 for b, rb in zip(bits, rands)]
        return comms, opens

    def verify_bits(self, comms: list, bits: np.ndarray,
                    rands: list) -> bool:
        if self.params.msg_bits != 1:
            raise ArgumentError("batched path is for 1-bit schemes")
        bits = np.asarray(bits, dtype=np.int64).ravel()
        n = len(bits)
        if len(comms) != n or len(rands) != n:
            return False
        try:
            R = np.stack([self.rand_to_vec(rb) for rb in rands])
            noise = np.stack([self._noise(rb) for rb in rands])
        except ArgumentError:
            return False
        enc = np.zeros((n, self.rows), dtype=np.int64)
        enc[:, 0] = bits
        C = (R @ self.A.T + self.h * enc + noise) % self.params.q
        return all(c.data == self.vec_to_commit(C[i])
                   for i, c in enumerate(comms))


class BinaryCommitScheme:
    """GF(2)-linear perfectly binding commitment for in-circuit recompute."""

    def __init__(self, msg_bits: int, n_r: int, tag: bytes = b"bincommit-v1"):
        if msg_bits < 1 or n_r < 1:
            raise ArgumentError("degenerate commitment parameters")
        self.msg_bits = msg_bits
        self.n_r = n_r
        self.rows = msg_bits + n_r
        self.msg_len = (msg_bits + 7) // 8
        self.rand_len = (n_r + 7) // 8
        self.commit_len = (self.rows + 7) // 8
        stream = PrfStream(tag + bytes([msg_bits % 256, n_r % 256]), "bin-A")
        while True:
            self.A = stream.integers(2, self.rows * n_r).reshape(
                self.rows, n_r)
            # pad block full column rank over GF(2) => unique decoding,
            # hence perfect binding
            if _gf2_rank(self.A[msg_bits:, :]) == n_r:
                break

    def sample_randomness(self, rng: PrfStream) -> bytes:
        return pack_bits(rng.bits(self.n_r))

    def commit(self, message: bytes, randomness: bytes) -> Commitment:
        if len(message) != self.msg_len:
            raise ArgumentError("bad message length")
        if len(randomness) != self.rand_len:
            raise ArgumentError("bad randomness length")
        r = unpack_bits(randomness, self.n_r)
        m = unpack_bits(message, self.msg_bits)
        enc = np.concatenate([m, np.zeros(self.n_r, dtype=np.int64)])
        c = (self.A @ r + enc) % 2
        return Commitment(pack_bits(c))

    def verify_open(self, c: Commitment, message: bytes,
                    randomness: bytes) -> bool:
        try:
            return self.commit(message, randomness).data == c.data
        except ArgumentError:
            return False

    # GF(2)-linearity helpers (used by the QZK trapdoor-branch clause):
    # commit(m0,r0) xor commit(m1,r1) = A.(r0^r1) xor enc(m0^m1)
    def commit_to_bits(self, c: Commitment) -> np.ndarray:
        return unpack_bits(c.data, self.rows)

    def enc_bits(self, message: bytes) -> np.ndarray:
        m = unpack_bits(message, self.msg_bits)
        return np.concatenate([m, np.zeros(self.n_r, dtype=np.int64)])

    def matvec(self, r_bits: np.ndarray) -> np.ndarray:
        return (self.A @ np.asarray(r_bits, dtype=np.int64)) % 2


def _gf2_rank(mat: np.ndarray) -> int:
    m = (np.asarray(mat) % 2).astype(np.int64).copy()
    rank = 0
    rows, cols = m.shape
    for col in range(cols):
        pivots = np.nonzero(m[rank:, col])[0]
        if len(pivots) == 0:
            continue
        piv = rank + pivots[0]
        m[[rank, piv]] = m[[piv, rank]]
        mask = m[:, col] == 1
        mask[rank] = False
        m[mask] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


# -- extractable grid pattern ---------------------------------------------

@dataclass
class ShareGrid:
    k: int
    commitments: list  # [i][j][side] -> Commitment
    openings: list     # [i][j][side] -> Opening (committer-private)


def grid_commit(scheme: CommitScheme, payloads: list[bytes],
                rng: PrfStream) -> ShareGrid:
    k = len(payloads)
    if k == 0:
        raise ArgumentError("k must be >= 1")
    comms, opens = [], []
    for i in range(k):
        if len(payloads[i]) != scheme.msg_len:
            raise ArgumentError("payload length mismatch")
        row_c, row_o = [], []
        for _ in range(k):
            sh0, sh1 = xor_share(payloads[i], rng)
            pair_c, pair_o = [], []
            for sh in (sh0, sh1):
                r = scheme.sample_randomness(rng)
                pair_c.append(scheme.commit(sh, r))
                pair_o.append(Opening(message=sh, randomness=r))
            row_c.append(pair_c)
            row_o.append(pair_o)
        comms.append(row_c)
        opens.append(row_o)
    return ShareGrid(k=k, commitments=comms, openings=opens)


class Snapshotable:
    """Deep-copy snapshot mixin: the rewinding substrate for adversaries."""

    def snapshot(self):
        return copy.deepcopy(self.__dict__)

    def restore(self, token):
        self.__dict__ = copy.deepcopy(token)


class HonestGridCommitter(Snapshotable):
    """Reference committer for the rewinding extractor tests."""

    def __init__(self, scheme: CommitScheme, payloads: list[bytes],
                 rng: PrfStream):
        self.scheme = scheme
        self.payloads = list(payloads)
        self.rng = rng
        self.grid: ShareGrid | None = None

    def commit_message(self) -> list:
        self.grid = grid_commit(self.scheme, self.payloads, self.rng)
        return self.grid.commitments

    def open_message(self, w: np.ndarray):
        k = self.grid.k
        return [[self.grid.openings[i][j][int(w[i][j])] for j in range(k)]
                for i in range(k)]


def grid_extract_by_rewind(adversary, scheme: CommitScheme,
                           challenge_rng: PrfStream, max_rounds: int = 256):
    """Rewinding extractor for the k x k x 2 grid.

    Returns (payloads or None, inner_rewind_count, first_transcript).
    None means: adversary never completed, challenge vectors coincided for
    some i ("abort"), or the budget ran out.
    """
    for cap in ("snapshot", "restore", "commit_message", "open_message"):
        if not hasattr(adversary, cap):
            raise CapabilityError(f"adversary lacks {cap}()")
    comms = adversary.commit_message()
    k = len(comms)
    snap = adversary.snapshot()
    w0 = challenge_rng.bits(k * k).reshape(k, k)
    op0 = adversary.open_message(w0)
    first = (w0, op0, comms)
    if not _openings_valid(scheme, comms, w0, op0):
        return None, 0, first
    rewinds = 0
    while rewinds < max_rounds:
        adversary.restore(snap)
        rewinds += 1
        w1 = challenge_rng.bits(k * k).reshape(k, k)
        op1 = adversary.open_message(w1)
        if op1 is None or not _openings_valid(scheme, comms, w1, op1):
            continue
        if any(np.all(w0[i] == w1[i]) for i in range(k)):
            return None, rewinds, first  # per-i coincidence abort
        payloads = []
        for i in range(k):
            j = int(np.nonzero(w0[i] != w1[i])[0][0])
            payloads.append(xor_bytes(op0[i][j].message, op1[i][j].message))
        return payloads, rewinds, first
    return None, rewinds, first


def _openings_valid(scheme, comms, w, ops) -> bool:
    if ops is None:
        return False
    k = len(comms)
    for i in range(k):
        for j in range(k):
            side = int(w[i][j])
            o = ops[i][j]
            if not scheme.verify_open(comms[i][j][side], o.message,
                                      o.randomness):
                return False
    return True
