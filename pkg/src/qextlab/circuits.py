"""Two-party functionality descriptions.

A Functionality is always native-evaluable; the simpler ones also carry a
BoolCircuit refinement for the garbled SFE backend.  Outputs are fixed
width with an in-band bottom: tag byte 0x00 (reject) vs 0x01 || payload.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ntcf as ntcf_mod
from .commit import (BinaryCommitScheme, Commitment, CommitScheme, Opening,
                     pack_bits, unpack_bits, xor_bytes)
from .errors import ArgumentError, ConfigurationError
from .rng import PrfStream

BOT_TAG = 0x00
OK_TAG = 0x01


def bot_output(output_len: int) -> bytes:
    return bytes(output_len)


def ok_output(payload: bytes, output_len: int) -> bytes:
    if 1 + len(payload) > output_len:
        raise ArgumentError("payload exceeds declared output width")
    return bytes([OK_TAG]) + payload + bytes(output_len - 1 - len(payload))


def parse_output(out: bytes) -> bytes | None:
    """Returns the padded payload for OK outputs, None for bottom."""
    if out[0] == BOT_TAG:
        return None
    return out[1:]


# -- boolean circuits -------------------------------------------------------

@dataclass
class BoolCircuit:
    n_sender: int       # sender input bit count (wires 0..n_sender-1)
    n_receiver: int     # receiver input bits (next wires)
    gates: list         # (op, a, b, out); NOT has b = None
    output_wires: list
    n_wires: int

    def eval(self, sender_bits: np.ndarray,
             receiver_bits: np.ndarray) -> np.ndarray:
        if len(sender_bits) != self.n_sender:
            raise ArgumentError("sender bit count mismatch")
        if len(receiver_bits) != self.n_receiver:
            raise ArgumentError("receiver bit count mismatch")
        w = np.zeros(self.n_wires, dtype=np.int64)
        w[: self.n_sender] = sender_bits
        w[self.n_sender: self.n_sender + self.n_receiver] = receiver_bits
        for op, a, b, out in self.gates:
            if op == "AND":
                w[out] = w[a] & w[b]
            elif op == "XOR":
                w[out] = w[a] ^ w[b]
            else:  # NOT
                w[out] = 1 - w[a]
        return w[self.output_wires]

    def to_text(self) -> str:
        lines = [f"INPUTS sender={self.n_sender} receiver={self.n_receiver}"]
        for op, a, b, out in self.gates:
            if op == "NOT":
                lines.append(f"NOT {a} -> {out}")
            else:
                lines.append(f"{op} {a} {b} -> {out}")
        lines.append("OUTPUTS " + " ".join(str(w) for w in self.output_wires))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "BoolCircuit":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[0] != "INPUTS":
            raise ArgumentError("missing INPUTS header")
        n_s = int(head[1].split("=")[1])
        n_r = int(head[2].split("=")[1])
        gates = []
        outputs = []
        n_wires = n_s + n_r
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "OUTPUTS":
                outputs = [int(p) for p in parts[1:]]
                continue
            if parts[0] == "NOT":
                a, out = int(parts[1]), int(parts[3])
                gates.append(("NOT", a, None, out))
            else:
                a, b, out = int(parts[1]), int(parts[2]), int(parts[4])
                gates.append((parts[0], a, b, out))
            n_wires = max(n_wires, gates[-1][3] + 1)
        circ = BoolCircuit(n_sender=n_s, n_receiver=n_r, gates=gates,
                           output_wires=outputs, n_wires=n_wires)
        circ.validate()
        return circ

    def validate(self):
        defined = set(range(self.n_sender + self.n_receiver))
        for op, a, b, out in self.gates:
            if a not in defined or (b is not None and b not in defined):
                raise ArgumentError("wire used before definition")
            if out in defined:
                raise ArgumentError("wire redefined")
            defined.add(out)
        for w in self.output_wires:
            if w not in defined:
                raise ArgumentError("undefined output wire")


class CircuitBuilder:
    def __init__(self, n_sender: int, n_receiver: int):
        self.n_sender = n_sender
        self.n_receiver = n_receiver
        self.next = n_sender + n_receiver
        self.gates = []

    def sender_wire(self, i: int) -> int:
        return i

    def receiver_wire(self, i: int) -> int:
        return self.n_sender + i

    def _emit(self, op, a, b) -> int:
        out = self.next
        self.next += 1
        self.gates.append((op, a, b, out))
        return out

    def xor(self, a, b):
        return self._emit("XOR", a, b)

    def and_(self, a, b):
        return self._emit("AND", a, b)

    def not_(self, a):
        return self._emit("NOT", a, None)

    def xnor(self, a, b):
        return self.not_(self.xor(a, b))

    def xor_many(self, wires):
        acc = wires[0]
        for w in wires[1:]:
            acc = self.xor(acc, w)
        return acc

    def and_many(self, wires):
        acc = wires[0]
        for w in wires[1:]:
            acc = self.and_(acc, w)
        return acc

    def zero(self):
        # x xor x
        return self.xor(0, 0) if self.n_sender + self.n_receiver > 0 \
            else self._emit("XOR", 0, 0)

    def build(self, output_wires) -> BoolCircuit:
        circ = BoolCircuit(n_sender=self.n_sender, n_receiver=self.n_receiver,
                           gates=self.gates, output_wires=list(output_wires),
                           n_wires=self.next)
        circ.validate()
        return circ


# -- functionality wrapper --------------------------------------------------

@dataclass
class Functionality:
    name: str
    native: callable
    output_len: int                 # bytes, incl. the tag byte
    receiver_encode: callable       # receiver_input -> fixed-length bytes
    receiver_len: int               # length of receiver_encode output
    circuit: BoolCircuit | None = None
    sender_encode: callable = None  # sender_input -> bytes (circuit path)
    sender_len: int = 0


def eval_native(fn: Functionality, sender_input, receiver_input) -> bytes:
    out = fn.native(sender_input, receiver_input)
    if len(out) != fn.output_len:
        raise ArgumentError("native output width violated")
    return out


def eval_circuit(fn: Functionality, sender_input, receiver_input) -> bytes:
    s = unpack_bits(fn.sender_encode(sender_input), fn.circuit.n_sender)
    r = unpack_bits(fn.receiver_encode(receiver_input), fn.circuit.n_receiver)
    return pack_bits(fn.circuit.eval(s, r))


# -- answer payload codec (test-of-quantumness responses) -------------------

def answer_len(w_len: int) -> int:
    return 1 + (w_len + 7) // 8


def encode_answer(w_len: int, head_bit: int, bits: np.ndarray) -> bytes:
    """head_bit is b (preimage) or u (equation); bits is J(x_b) or d."""
    return bytes([head_bit]) + pack_bits(
        np.asarray(bits, dtype=np.int64))[: (w_len + 7) // 8].ljust(
            (w_len + 7) // 8, b"\x00")


def decode_answer(w_len: int, payload: bytes):
    """Returns (head_bit, bits) or None if the tag byte is malformed."""
    if len(payload) != answer_len(w_len):
        return None
    if payload[0] not in (0, 1):
        return None
    return payload[0], unpack_bits(payload[1:], w_len)


# -- F: the cQEXT functionality --------------------------------------------

@dataclass
class FSenderInput:
    keys: list
    trapdoors: list
    ys: list
    v: np.ndarray           # k challenge bits
    w: np.ndarray           # k x k grid challenge bits
    grid_commitments: list  # [i][j][side] -> Commitment
    opened: list            # [i][j] -> Opening of side w[i][j]
    witness: bytes


@dataclass
class FReceiverInput:
    unopened: list          # [i][j] -> Opening of side 1 - w[i][j]


def build_F_cqext(params: ntcf_mod.NtcfParams, scheme: CommitScheme, k: int,
                  witness_len: int) -> Functionality:
    output_len = 1 + witness_len
    plen = answer_len(params.w_len)

    def native(s: FSenderInput | None, r: FReceiverInput) -> bytes:
        if s is None:  # simulator enters SFE with bottom input
            return bot_output(output_len)
        if not isinstance(s, FSenderInput) or not isinstance(r,
                                                             FReceiverInput):
            raise ArgumentError("F schema mismatch")
        if len(s.keys) != k or len(r.unopened) != k:
            raise ArgumentError("F schema mismatch: wrong k")
        for i in range(k):
            payload = None
            for j in range(k):
                side = int(s.w[i][j])
                op_s = s.opened[i][j]
                op_r = r.unopened[i][j]
                if not scheme.verify_open(s.grid_commitments[i][j][side],
                                          op_s.message, op_s.randomness):
                    return bot_output(output_len)
                if not scheme.verify_open(s.grid_commitments[i][j][1 - side],
                                          op_r.message, op_r.randomness):
                    return bot_output(output_len)
                p = xor_bytes(op_s.message, op_r.message)
                if payload is None:
                    payload = p
                elif p != payload:  # cross-j share consistency
                    return bot_output(output_len)
            dec = decode_answer(params.w_len, payload)
            if dec is None:
                return bot_output(output_len)
            head, bits = dec
            td, y = s.trapdoors[i], s.ys[i]
            try:
                x0 = ntcf_mod.inv(td, 0, y)
                x1 = ntcf_mod.inv(td, 1, y)
            except Exception:
                return bot_output(output_len)
            if int(s.v[i]) == 0:
                try:
                    x_claim = ntcf_mod.j_decode(params, bits)
                except Exception:
                    return bot_output(output_len)
                x_inv = x0 if head == 0 else x1
                if x_claim != x_inv:
                    return bot_output(output_len)
            else:
                claw = ntcf_mod.Claw(x0=x0, x1=x1, y=y)
                if not ntcf_mod.good_set_contains(params, claw, bits):
                    return bot_output(output_len)
                delta = (ntcf_mod.j_encode(params, x0)
                         ^ ntcf_mod.j_encode(params, x1))
                if int((bits & delta).sum() % 2) != head:
                    return bot_output(output_len)
        return ok_output(s.witness, output_len)

    def receiver_encode(r: FReceiverInput) -> bytes:
        chunks = []
        for i in range(k):
            for j in range(k):
                o = r.unopened[i][j]
                if len(o.message) != plen or \
                        len(o.randomness) != scheme.rand_len:
                    raise ArgumentError("F receiver schema mismatch")
                chunks.append(o.message + o.randomness)
        return b"".join(chunks)

    return Functionality(
        name="F-cqext", native=native, output_len=output_len,
        receiver_encode=receiver_encode,
        receiver_len=k * k * (plen + scheme.rand_len))


# -- f: the qQEXT functionality (native + circuit refinement) ---------------

@dataclass
class QSenderInput:
    td_bits: np.ndarray      # ell bits
    c: Commitment            # commitment to (r_1..r_ell)
    cstars: list             # ell Commitments
    sk2: bytes


@dataclass
class QReceiverInput:
    d: bytes                 # randomness opening c
    rs: list                 # ell randomness strings, one per c*_i


def build_f_qqext(outer: BinaryCommitScheme, star: BinaryCommitScheme,
                  ell: int, sk_len: int) -> Functionality:
    """f: output SK2 iff c opens to (r_1..r_ell) under d and every c*_i
    recommits td_i under r_i."""
    if outer.msg_bits != ell * star.rand_len * 8:
        raise ConfigurationError("outer commitment width != ell * |r_i|")
    if star.msg_bits != 1:
        raise ConfigurationError("c* commits a single bit")
    output_len = 1 + sk_len

    def native(s: QSenderInput | None, r: QReceiverInput) -> bytes:
        if s is None:
            return bot_output(output_len)
        if len(s.cstars) != ell or len(r.rs) != ell:
            raise ArgumentError("f schema mismatch")
        msg = b"".join(r.rs)
        if not outer.verify_open(s.c, msg, r.d):
            return bot_output(output_len)
        for i in range(ell):
            mb = bytes([int(s.td_bits[i]) & 1])
            if not star.verify_open(s.cstars[i], mb, r.rs[i]):
                return bot_output(output_len)
        return ok_output(s.sk2, output_len)

    # circuit refinement: commitment recomputation is GF(2)-linear, so the
    # whole check is XOR chains plus equality AND-trees and an output mask
    n_sender = ell + outer.rows + ell * star.rows + 8 * sk_len
    n_receiver = outer.n_r + ell * star.n_r
    cb = CircuitBuilder(n_sender, n_receiver)
    s_td = [cb.sender_wire(i) for i in range(ell)]
    off = ell
    s_c = [cb.sender_wire(off + i) for i in range(outer.rows)]
    off += outer.rows
    s_stars = [[cb.sender_wire(off + i * star.rows + j)
                for j in range(star.rows)] for i in range(ell)]
    off += ell * star.rows
    s_sk = [cb.sender_wire(off + i) for i in range(8 * sk_len)]
    r_d = [cb.receiver_wire(i) for i in range(outer.n_r)]
    r_rs = [[cb.receiver_wire(outer.n_r + i * star.n_r + j)
             for j in range(star.n_r)] for i in range(ell)]

    eq_bits = []
    # recompute c = A_outer . d xor enc(concat r_i bits)
    msg_wires = [w for grp in r_rs for w in grp]  # message bits of c
    for row in range(outer.rows):
        taps = [r_d[j] for j in np.nonzero(outer.A[row])[0]]
        if row < outer.msg_bits:
            taps = taps + [msg_wires[row]]
        rec = cb.xor_many(taps) if taps else cb.zero()
        eq_bits.append(cb.xnor(rec, s_c[row]))
    # recompute each c*_i = A_star . r_i xor enc(td_i)
    for i in range(ell):
        for row in range(star.rows):
            taps = [r_rs[i][j] for j in np.nonzero(star.A[row])[0]]
            if row < star.msg_bits:
                taps = taps + [s_td[i]]
            rec = cb.xor_many(taps) if taps else cb.zero()
            eq_bits.append(cb.xnor(rec, s_stars[i][row]))
    ok = cb.and_many(eq_bits)
    out_bits = [ok] + [cb.zero() for _ in range(7)]  # tag byte 0x01/0x00
    for w in s_sk:
        out_bits.append(cb.and_(ok, w))
    circuit = cb.build(out_bits)

    def sender_encode(s: QSenderInput) -> bytes:
        td = pack_bits(np.asarray(s.td_bits, dtype=np.int64)).ljust(
            (ell + 7) // 8, b"\x00")[: (ell + 7) // 8]
        # bit-level concat (fields are not byte aligned in general)
        bits = np.concatenate([
            unpack_bits(td, ell),
            unpack_bits(s.c.data, outer.rows),
            np.concatenate([unpack_bits(cs.data, star.rows)
                            for cs in s.cstars]),
            unpack_bits(s.sk2, 8 * sk_len)])
        return pack_bits(bits).ljust((n_sender + 7) // 8, b"\x00")

    def receiver_encode(r: QReceiverInput) -> bytes:
        if len(r.d) != outer.rand_len or any(
                len(x) != star.rand_len for x in r.rs):
            raise ArgumentError("f receiver schema mismatch")
        bits = np.concatenate(
            [unpack_bits(r.d, outer.n_r)]
            + [unpack_bits(x, star.n_r) for x in r.rs])
        return pack_bits(bits).ljust((n_receiver + 7) // 8, b"\x00")

    return Functionality(
        name="f-qqext", native=native, output_len=output_len,
        receiver_encode=receiver_encode,
        receiver_len=(n_receiver + 7) // 8,
        circuit=circuit, sender_encode=sender_encode,
        sender_len=(n_sender + 7) // 8)


# -- compute-and-compare descriptions ---------------------------------------

@dataclass
class ComputeAndCompare:
    inner: callable          # host procedure: input bytes -> bytes or None
    lock: bytes = field(repr=False)
    payload: bytes = field(repr=False)

    def eval(self, data: bytes):
        try:
            r = self.inner(data)
        except Exception:
            return None
        if r is not None and r == self.lock:
            return self.payload
        return None


def build_cc_circuit(inner, lock: bytes, payload: bytes) -> ComputeAndCompare:
    if len(lock) == 0:
        raise ConfigurationError("zero-length lock is security-vacuous")
    return ComputeAndCompare(inner=inner, lock=lock, payload=payload)
