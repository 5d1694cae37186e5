"""Two-message secure function evaluation.

Two backends behind one interface:

* "ideal": an in-process mediator owned by the session computes the
  functionality natively and seals the output for the receiver.  The
  mediator's input log doubles as the inefficient extractor of the
  malicious-receiver security definition for tests.
* "garbled": Yao garbling with point-and-permute, free-XOR, 128-bit
  PRF-derived wire labels, and a pluggable OT (ideal-OT mediator default).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .circuits import Functionality, eval_native
from .commit import pack_bits, unpack_bits
from .errors import ArgumentError, ProtocolError, StateConsumedError
from .rng import PrfStream
from .seal import seal, unseal

LABEL = 16  # wire label bytes


def _canon(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass
class SfeMsg1:
    backend: str
    payload: dict

    def to_bytes(self) -> bytes:
        return _canon({"backend": self.backend, "payload": self.payload})


@dataclass
class SfeMsg2:
    backend: str
    payload: dict

    def to_bytes(self) -> bytes:
        return _canon({"backend": self.backend, "payload": self.payload})


@dataclass
class ReceiverState:
    backend: str
    handle: str
    material: dict = field(repr=False)
    consumed: bool = False


# -- ideal backend ----------------------------------------------------------

class IdealMediator:
    """Trusted in-process party: holds receiver inputs, computes natives.

    input_log records every (handle, sender_input) pair -- the test-facing
    realization of the definition's inefficient extractor Ext.
    """

    def __init__(self):
        self._slots = {}
        self.input_log = []

    def register(self, handle: str, fn: Functionality, receiver_input,
                 key: bytes):
        self._slots[handle] = (fn, receiver_input, key)

    def compute(self, handle: str, fn: Functionality, sender_input,
                nonce: bytes) -> bytes:
        if handle not in self._slots:
            raise ProtocolError("unknown or tampered SFE handle")
        reg_fn, receiver_input, key = self._slots[handle]
        if reg_fn.name != fn.name:
            raise ProtocolError("functionality mismatch")
        self.input_log.append((handle, sender_input))
        out = eval_native(fn, sender_input, receiver_input)
        return seal(key, nonce, out)


class IdealSfe:
    backend = "ideal"

    def __init__(self, mediator: IdealMediator):
        self.mediator = mediator

    def receiver_msg1(self, fn: Functionality, receiver_input,
                      rng: PrfStream) -> tuple[SfeMsg1, ReceiverState]:
        enc = fn.receiver_encode(receiver_input)  # validates schema
        if len(enc) != fn.receiver_len:
            raise ArgumentError("receiver input encoding width mismatch")
        handle = rng.take(16).hex()
        salt = rng.take(16)
        key = rng.take(32)
        self.mediator.register(handle, fn, receiver_input, key)
        input_commit = hashlib.sha256(salt + enc).hexdigest()
        msg1 = SfeMsg1(backend=self.backend,
                       payload={"handle": handle,
                                "input_commit": input_commit})
        state = ReceiverState(backend=self.backend, handle=handle,
                              material={"key": key, "salt": salt})
        return msg1, state

    def sender_msg2(self, fn: Functionality, sender_input, msg1: SfeMsg1,
                    rng: PrfStream) -> SfeMsg2:
        if msg1.backend != self.backend:
            raise ProtocolError("backend mismatch")
        nonce = rng.take(16)
        envelope = self.mediator.compute(msg1.payload["handle"], fn,
                                         sender_input, nonce)
        return SfeMsg2(backend=self.backend,
                       payload={"envelope": envelope.hex()})

    def receiver_output(self, state: ReceiverState, msg2: SfeMsg2) -> bytes:
        if msg2.backend != self.backend or state.backend != self.backend:
            raise ProtocolError("backend mismatch")
        if state.consumed:
            raise StateConsumedError("receiver state already used")
        state.consumed = True
        return unseal(state.material["key"],
                      bytes.fromhex(msg2.payload["envelope"]))

    def recompute_msg2(self, fn: Functionality, sender_input, receiver_input,
                       key: bytes, nonce: bytes) -> SfeMsg2:
        """Deterministic reconstruction of msg2 by a party knowing both
        inputs and the receiver key (the QZK consistency check)."""
        out = eval_native(fn, sender_input, receiver_input)
        return SfeMsg2(backend=self.backend,
                       payload={"envelope": seal(key, nonce, out).hex()})


# -- oblivious transfer (pluggable; ideal mediator default) -----------------

class IdealOt:
    """1-of-2 OT realized by an in-process mediator."""

    def __init__(self):
        self._choices = {}

    def request(self, choices: np.ndarray, rng: PrfStream):
        handle = rng.take(16).hex()
        self._choices[handle] = np.asarray(choices, dtype=np.int64).copy()
        msgs = [{"ot": handle, "i": i} for i in range(len(choices))]
        return {"handle": handle, "msgs": msgs}, {"handle": handle}

    def respond(self, request_payload: dict, pairs: list) -> dict:
        handle = request_payload["handle"]
        if handle not in self._choices:
            raise ProtocolError("unknown OT handle")
        choices = self._choices[handle]
        if len(pairs) != len(choices):
            raise ProtocolError("OT arity mismatch")
        chosen = [pairs[i][int(choices[i])].hex() for i in range(len(pairs))]
        return {"handle": handle, "chosen": chosen}

    def finish(self, state: dict, response: dict) -> list[bytes]:
        if response["handle"] != state["handle"]:
            raise ProtocolError("cross-session OT response")
        return [bytes.fromhex(h) for h in response["chosen"]]


# -- garbled backend --------------------------------------------------------

def _prf(la: bytes, lb: bytes, gid: int) -> bytes:
    return hashlib.sha256(la + lb + gid.to_bytes(4, "little")).digest()[:LABEL]


def _xorb(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


class GarbledSfe:
    backend = "garbled"

    def __init__(self, ot=None):
        self.ot = ot or IdealOt()

    def receiver_msg1(self, fn: Functionality, receiver_input,
                      rng: PrfStream) -> tuple[SfeMsg1, ReceiverState]:
        if fn.circuit is None:
            raise ArgumentError("functionality lacks a circuit refinement")
        enc = fn.receiver_encode(receiver_input)
        bits = unpack_bits(enc, fn.circuit.n_receiver)
        ot_payload, ot_state = self.ot.request(bits, rng)
        msg1 = SfeMsg1(backend=self.backend,
                       payload={"fn": fn.name, "ot": ot_payload["msgs"],
                                "handle": ot_payload["handle"]})
        state = ReceiverState(backend=self.backend,
                              handle=ot_payload["handle"],
                              material={"ot_state": ot_state})
        return msg1, state

    def sender_msg2(self, fn: Functionality, sender_input, msg1: SfeMsg1,
                    rng: PrfStream) -> SfeMsg2:
        if msg1.backend != self.backend:
            raise ProtocolError("backend mismatch")
        circ = fn.circuit
        delta = bytearray(rng.take(LABEL))
        delta[0] |= 1  # permute bit of the pair always differs
        delta = bytes(delta)
        n_in = circ.n_sender + circ.n_receiver
        label0 = [None] * circ.n_wires
        for w in range(n_in):
            label0[w] = rng.take(LABEL)
        tables = []
        for gid, (op, a, b, out) in enumerate(circ.gates):
            if op == "XOR":
                label0[out] = _xorb(label0[a], label0[b])
            elif op == "NOT":
                label0[out] = _xorb(label0[a], delta)
            else:  # AND
                l0 = rng.take(LABEL)
                label0[out] = l0
                rows = [None] * 4
                for va in (0, 1):
                    for vb in (0, 1):
                        la = label0[a] if va == 0 else _xorb(label0[a], delta)
                        lb = label0[b] if vb == 0 else _xorb(label0[b], delta)
                        lo = l0 if (va & vb) == 0 else _xorb(l0, delta)
                        idx = (la[0] & 1) << 1 | (lb[0] & 1)
                        rows[idx] = _xorb(_prf(la, lb, gid), lo)
                tables.append([r.hex() for r in rows])
        sender_bits = unpack_bits(fn.sender_encode(sender_input),
                                  circ.n_sender)
        sender_labels = [
            (label0[w] if sender_bits[w] == 0
             else _xorb(label0[w], delta)).hex()
            for w in range(circ.n_sender)]
        recv_pairs = [
            (label0[circ.n_sender + i], _xorb(label0[circ.n_sender + i],
                                              delta))
            for i in range(circ.n_receiver)]
        ot_resp = self.ot.respond({"handle": msg1.payload["handle"]},
                                  recv_pairs)
        decode = [label0[w][0] & 1 for w in circ.output_wires]
        return SfeMsg2(backend=self.backend, payload={
            "fn": fn.name, "tables": tables, "sender_labels": sender_labels,
            "ot": ot_resp, "decode": decode})

    def receiver_output(self, state: ReceiverState, msg2: SfeMsg2,
                        fn: Functionality) -> bytes:
        if msg2.backend != self.backend or state.backend != self.backend:
            raise ProtocolError("backend mismatch")
        if state.consumed:
            raise StateConsumedError("receiver state already used")
        state.consumed = True
        circ = fn.circuit
        recv_labels = self.ot.finish(state.material["ot_state"],
                                     msg2.payload["ot"])
        label = [None] * circ.n_wires
        for w in range(circ.n_sender):
            label[w] = bytes.fromhex(msg2.payload["sender_labels"][w])
        for i in range(circ.n_receiver):
            label[circ.n_sender + i] = recv_labels[i]
        tables = msg2.payload["tables"]
        ti = 0
        for gid, (op, a, b, out) in enumerate(circ.gates):
            if op == "XOR":
                label[out] = _xorb(label[a], label[b])
            elif op == "NOT":
                label[out] = label[a]  # same pair, flipped semantics
            else:
                idx = (label[a][0] & 1) << 1 | (label[b][0] & 1)
                row = bytes.fromhex(tables[ti][idx])
                label[out] = _xorb(_prf(label[a], label[b], gid), row)
                ti += 1
        bits = np.array(
            [(label[w][0] & 1) ^ d
             for w, d in zip(circ.output_wires, msg2.payload["decode"])],
            dtype=np.int64)
        return pack_bits(bits).ljust(fn.output_len, b"\x00")[:fn.output_len]
