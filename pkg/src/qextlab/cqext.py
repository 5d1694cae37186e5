"""The classical-channel extraction protocol (test of quantumness core).

Seven rounds: keys, images, challenge bits v, share-grid commitments,
grid challenge bits w, openings of the queried side, then a two-message
SFE for the functionality F whose output is the sender's witness iff all
per-repetition checks pass.

A classical receiver can only ever answer the preimage challenge, so its
honest output is bottom (the protocol has no completeness requirement); a
receiver holding one simulated claw-state device per repetition answers
both challenge kinds and extracts the witness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import ntcf as ntcf_mod
from .circuits import (FReceiverInput, FSenderInput, answer_len,
                       build_F_cqext, decode_answer, encode_answer,
                       parse_output)
from .commit import Opening, Snapshotable, grid_commit, xor_bytes
from .config import WITNESS_PAD, Config
from .errors import CapabilityError, ConfigurationError
from .ntcf import SimulatedDevice
from .rng import PrfStream
from .session import Session, register_protocol
from .sfe import IdealMediator, IdealSfe


class HashPreimageRelation:
    """Demo NP relation: instance = sha256(witness), |witness| = 32."""

    witness_len = WITNESS_PAD

    @staticmethod
    def verify(instance: bytes, witness: bytes) -> bool:
        return len(witness) == WITNESS_PAD and \
            hashlib.sha256(witness).digest() == instance

    @staticmethod
    def sample(rng: PrfStream) -> tuple[bytes, bytes]:
        w = rng.take(WITNESS_PAD)
        return hashlib.sha256(w).digest(), w


class OpeningRelation:
    """Relation used by QZK's trapdoor extraction: instance is a commitment
    to td, witness is (randomness || td) padded to the witness width."""

    witness_len = WITNESS_PAD

    def __init__(self, scheme):
        self.scheme = scheme

    def verify(self, instance: bytes, witness: bytes) -> bool:
        if len(witness) != WITNESS_PAD:
            return False
        d = witness[: self.scheme.rand_len]
        td = witness[self.scheme.rand_len:
                     self.scheme.rand_len + self.scheme.msg_len]
        from .commit import Commitment
        return self.scheme.verify_open(Commitment(instance), td, d)

    def pack_witness(self, d: bytes, td: bytes) -> bytes:
        w = d + td
        if len(w) > WITNESS_PAD:
            raise ConfigurationError("opening witness exceeds pad width")
        return w.ljust(WITNESS_PAD, b"\x00")

    def unpack_witness(self, w: bytes) -> tuple[bytes, bytes]:
        return (w[: self.scheme.rand_len],
                w[self.scheme.rand_len:
                  self.scheme.rand_len + self.scheme.msg_len])


@dataclass
class CqextSenderInput:
    instance: bytes
    witness: bytes
    seed: bytes  # declared randomness (semi-malicious contract)


_KEY_MEMO: dict = {}
_KEY_MEMO_CAP = 128


def sender_keypairs(config: Config, seed: bytes):
    """Key derivation shared by the honest sender machine and the harness
    (which must provision device oracles from a declared seed).

    Memoized: the same (params, seed) recurs within one protocol run (the
    consistency-check replay regenerates the sender) and key material is
    immutable, so sharing is safe."""
    memo_key = (config.ntcf, config.k, seed)
    hit = _KEY_MEMO.get(memo_key)
    if hit is not None:
        return hit
    rng = PrfStream(seed, "cqext-sender-keys")
    pairs = [ntcf_mod.gen(config.ntcf, rng.child(f"key{i}"))
             for i in range(config.k)]
    if len(_KEY_MEMO) >= _KEY_MEMO_CAP:
        _KEY_MEMO.pop(next(iter(_KEY_MEMO)))
    _KEY_MEMO[memo_key] = pairs
    return pairs


def make_devices(config: Config, declared_seed: bytes,
                 device_rng: PrfStream) -> list[SimulatedDevice]:
    pairs = sender_keypairs(config, declared_seed)
    return [SimulatedDevice(key, td, device_rng.child(f"dev{i}"))
            for i, (key, td) in enumerate(pairs)]


class CqextSender(Snapshotable):
    """Honest-code sender; randomness comes from the declared seed."""

    role = "sender"

    def __init__(self, config: Config, sender_input: CqextSenderInput,
                 relation=HashPreimageRelation, sfe_bottom: bool = False):
        self.config = config
        self.input = sender_input
        self.relation = relation
        self.sfe_bottom = sfe_bottom  # ZK simulator mode: bottom into SFE
        self.rng = PrfStream(sender_input.seed, "cqext-sender")
        self.phase = 0
        self.pairs = None
        self.ys = None
        self.v = None
        self.w = None
        self.grid_comms = None
        self.opened = None
        self.sfe = None       # bound by the runner
        self.fn = None

    def declared_seed(self) -> bytes:
        return self.input.seed

    def bind(self, sfe, fn):
        self.sfe = sfe
        self.fn = fn

    def next_message(self, incoming):
        k = self.config.k
        if self.phase == 0:
            self.pairs = sender_keypairs(self.config, self.input.seed)
            self.phase = 1
            return "keys", [key for key, _ in self.pairs]
        if self.phase == 1:
            self.ys = [np.asarray(y, dtype=np.int64) for y in incoming]
            if len(self.ys) != k:
                return "abort", "bad y count"
            self.v = self.rng.bits(k)
            self.phase = 2
            return "v", self.v
        if self.phase == 2:
            self.grid_comms = incoming
            if len(incoming) != k or any(len(row) != k for row in incoming):
                return "abort", "bad grid shape"
            self.w = self.rng.bits(k * k).reshape(k, k)
            self.phase = 3
            return "w", self.w
        if self.phase == 3:
            self.opened = incoming
            plen = answer_len(self.config.ntcf.w_len)
            scheme = self.config.grid_scheme()
            for i in range(k):
                for j in range(k):
                    o = incoming[i][j]
                    if len(o.message) != plen or \
                            len(o.randomness) != scheme.rand_len:
                        return "abort", "malformed opening"
            self.phase = 4
            return None, None  # waits for SFE msg1
        if self.phase == 4:
            self.phase = 5
            if self.sfe_bottom:
                sfe_in = None
            else:
                sfe_in = FSenderInput(
                    keys=[key for key, _ in self.pairs],
                    trapdoors=[td for _, td in self.pairs],
                    ys=self.ys, v=self.v, w=self.w,
                    grid_commitments=self.grid_comms, opened=self.opened,
                    witness=self.input.witness)
            msg2 = self.sfe.sender_msg2(self.fn, sfe_in, incoming,
                                        self.rng.child("sfe"))
            return "sfe2", msg2
        return "abort", "sender out of phase"


class HonestClassicalReceiver(Snapshotable):
    """Follows the protocol with no quantum capability: commits random
    shares (it cannot answer equation challenges), so F outputs bottom."""

    role = "receiver"
    needs_devices = False

    def __init__(self, config: Config, rng: PrfStream):
        self.config = config
        self.rng = rng
        self.phase = 0
        self.keys = None
        self.grid = None
        self.w = None
        self.sfe_state = None
        self.output = None
        self.sfe = None
        self.fn = None

    def bind(self, sfe, fn):
        self.sfe = sfe
        self.fn = fn

    def next_message(self, incoming):
        cfg = self.config
        k = cfg.k
        if self.phase == 0:
            self.keys = incoming
            ys = []
            for i in range(k):
                b = self.rng.bit()
                x = self.rng.randint(0, cfg.ntcf.domain_size - 1)
                ys.append(ntcf_mod.eval_prime(self.keys[i], b, x,
                                              self.rng.child(f"y{i}")))
            self.phase = 1
            return "ys", ys
        if self.phase == 1:
            # v received; shares are fresh random payloads either way
            plen = answer_len(cfg.ntcf.w_len)
            payloads = [self.rng.take(plen) for _ in range(k)]
            self.grid = grid_commit(cfg.grid_scheme(), payloads,
                                    self.rng.child("grid"))
            self.phase = 2
            return "grid", self.grid.commitments
        if self.phase == 2:
            self.w = incoming
            opened = [[self.grid.openings[i][j][int(self.w[i][j])]
                       for j in range(k)] for i in range(k)]
            self.phase = 3
            return "openings", opened
        if self.phase == 3:
            unopened = [[self.grid.openings[i][j][1 - int(self.w[i][j])]
                         for j in range(k)] for i in range(k)]
            msg1, self.sfe_state = self.sfe.receiver_msg1(
                self.fn, FReceiverInput(unopened=unopened),
                self.rng.child("sfe"))
            self.phase = 4
            return "sfe1", msg1
        return "abort", "receiver out of phase"

    def finish(self, msg2) -> bytes | None:
        out = self.sfe.receiver_output(self.sfe_state, msg2)
        self.output = parse_output(out)
        return self.output


class DeviceReceiver(Snapshotable):
    """Extractor core: one simulated claw-state device per repetition."""

    role = "receiver"
    needs_devices = True

    def __init__(self, config: Config, rng: PrfStream):
        self.config = config
        self.rng = rng
        self.devices = None  # provisioned by the harness
        self.phase = 0
        self.grid = None
        self.w = None
        self.sfe_state = None
        self.output = None
        self.answers = None
        self.sfe = None
        self.fn = None

    def bind(self, sfe, fn):
        self.sfe = sfe
        self.fn = fn

    def provision(self, devices):
        self.devices = devices

    def next_message(self, incoming):
        cfg = self.config
        k = cfg.k
        if self.phase == 0:
            if self.devices is None or len(self.devices) != k:
                return "abort", "no devices provisioned"
            self.phase = 1
            return "ys", [dev.gen_y() for dev in self.devices]
        if self.phase == 1:
            v = incoming
            payloads = []
            self.answers = []
            for i in range(k):
                resp = self.devices[i].measure(int(v[i]))
                if resp.kind == "preimage":
                    payloads.append(encode_answer(
                        cfg.ntcf.w_len, resp.b,
                        ntcf_mod.j_encode(cfg.ntcf, resp.x)))
                else:
                    payloads.append(encode_answer(cfg.ntcf.w_len, resp.u,
                                                  resp.d))
                self.answers.append(resp)
            self.grid = grid_commit(cfg.grid_scheme(), payloads,
                                    self.rng.child("grid"))
            self.phase = 2
            return "grid", self.grid.commitments
        if self.phase == 2:
            self.w = incoming
            opened = [[self.grid.openings[i][j][int(self.w[i][j])]
                       for j in range(k)] for i in range(k)]
            self.phase = 3
            return "openings", opened
        if self.phase == 3:
            unopened = [[self.grid.openings[i][j][1 - int(self.w[i][j])]
                         for j in range(k)] for i in range(k)]
            msg1, self.sfe_state = self.sfe.receiver_msg1(
                self.fn, FReceiverInput(unopened=unopened),
                self.rng.child("sfe"))
            self.phase = 4
            return "sfe1", msg1
        return "abort", "receiver out of phase"

    def finish(self, msg2) -> bytes | None:
        out = self.sfe.receiver_output(self.sfe_state, msg2)
        self.output = parse_output(out)
        return self.output


# the sender's "ack" turn only ingests the openings (no outgoing message)
_SCHEDULE = [("sender", "keys"), ("receiver", "ys"), ("sender", "v"),
             ("receiver", "grid"), ("sender", "w"),
             ("receiver", "openings"), ("sender", "ack"),
             ("receiver", "sfe1"), ("sender", "sfe2")]


def run_cqext(config: Config, sender, receiver, session: Session,
              relation=HashPreimageRelation):
    """Drives the seven protocol steps; returns outputs dict."""
    mediator = IdealMediator()
    sfe = IdealSfe(mediator)
    fn = build_F_cqext(config.ntcf, config.grid_scheme(), config.k,
                       WITNESS_PAD)
    sender.bind(sfe, fn)
    receiver.bind(sfe, fn)
    last = None
    for who, mtype in _SCHEDULE:
        party = sender if who == "sender" else receiver
        other = "receiver" if who == "sender" else "sender"
        out = party.next_message(last)
        if out is None or out[0] == "abort":
            reason = out[1] if out else "party returned nothing"
            session.abort(who, reason)
            return {"aborted": True, "abort_party": who,
                    "abort_reason": reason, "receiver_output": None}
        got_type, payload = out
        if got_type is None:
            # sender waits during the receiver's back-to-back turn
            continue
        if got_type != mtype:
            session.abort(who, f"schedule violation: sent {got_type}, "
                               f"expected {mtype}")
            return {"aborted": True, "abort_party": who,
                    "abort_reason": "schedule violation",
                    "receiver_output": None}
        session.send(who, other, mtype, payload)
        last = payload
        if mtype == "keys" and getattr(receiver, "needs_devices", False):
            # device randomness forks off the receiver's own stream so a
            # deep-copied receiver replays the identical message sequence
            receiver.provision(make_devices(
                config, sender.declared_seed(),
                receiver.rng.child("devices")))
    output = receiver.finish(last)
    return {"aborted": False, "receiver_output": output,
            "mediator_log_len": len(mediator.input_log)}


@register_protocol("cqext")
def _cqext_protocol(config: Config, parties: dict, session: Session):
    return run_cqext(config, parties["sender"], parties["receiver"], session)


_cqext_protocol.roles = ["sender", "receiver"]


def run_honest(config: Config, sender_input: CqextSenderInput,
               receiver_kind: str, session: Session,
               relation=HashPreimageRelation):
    if config.k < 1:
        raise ConfigurationError("k must be >= 1")
    sender = CqextSender(config, sender_input, relation)
    if receiver_kind == "classical":
        receiver = HonestClassicalReceiver(config,
                                           session.rng("receiver"))
    elif receiver_kind in ("device", "quantum-device"):
        receiver = DeviceReceiver(config, session.rng("receiver"))
    else:
        raise ConfigurationError(f"unknown receiver kind {receiver_kind!r}")
    outputs = run_cqext(config, sender, receiver, session, relation)
    return session.transcript, outputs


def extract(config: Config, sender, session: Session,
            relation=HashPreimageRelation):
    """Extraction against a semi-malicious sender (honest code, self-chosen
    randomness): run the device receiver; the harness provisions devices
    from the sender's declared seed."""
    receiver = DeviceReceiver(config, session.rng("receiver"))
    outputs = run_cqext(config, sender, receiver, session, relation)
    return session.transcript, outputs.get("receiver_output"), outputs


def zk_simulate(config: Config, receiver, session: Session,
                sender_input: CqextSenderInput):
    """Sim: honest sender behaviour through round 6, bottom into the SFE."""
    for cap in ("snapshot", "restore"):
        if not hasattr(receiver, cap):
            raise CapabilityError("receiver must be snapshotable")
    sender = CqextSender(config, sender_input, sfe_bottom=True)
    outputs = run_cqext(config, sender, receiver, session)
    return session.transcript, outputs


# -- hybrid H2: the double-rewinding extraction procedure -------------------

@dataclass
class HybridStats:
    inner_rewinds: int = 0
    outer_rewinds: int = 0
    aborted: str | None = None


def divergence_threshold(k: int) -> int:
    """Desk-scale stand-in for the asymptotic omega(log k) condition."""
    return int(np.ceil(np.log2(k))) + 2


def hybrid_h2_extract(config: Config, receiver, session: Session,
                      seed: bytes = None, max_inner: int = None,
                      max_outer: int = None):
    """Inner rewinding over w-challenges, outer rewinding over
    v-challenges; returns (T or None, HybridStats).

    T = {(i, b_i, x_i, d_i, u_i)} over the diverging coordinate set S,
    |S| >= divergence threshold; every tuple passes both NTCF checks.
    """
    for cap in ("snapshot", "restore"):
        if not hasattr(receiver, cap):
            raise CapabilityError("receiver must be snapshotable")
    k = config.k
    if max_inner is None:
        max_inner = 4 * k * k
    if max_outer is None:
        max_outer = 8 * k
    seed = seed or session.seed
    stats = HybridStats()
    scheme = config.grid_scheme()
    rng = session.rng("hybrid")
    pairs = sender_keypairs(config, seed)
    keys = [key for key, _ in pairs]
    tds = [td for _, td in pairs]

    # rounds 1-2
    if getattr(receiver, "needs_devices", False):
        receiver.provision(make_devices(config, seed,
                                        session.rng("harness", "devices")))
    receiver.bind(_NullSfe(), None)
    out = receiver.next_message(keys)
    if out[0] != "ys":
        stats.aborted = "receiver aborted at images"
        return None, stats
    ys = [np.asarray(y, dtype=np.int64) for y in out[1]]
    outer_snap = receiver.snapshot()

    def inner_phase(v):
        """One accepting-pair attempt for fixed v.  Returns
        (payload list, per-i answers) or None."""
        out = receiver.next_message(v)
        if out[0] != "grid":
            return None
        comms = out[1]
        inner_snap = receiver.snapshot()
        w0 = rng.bits(k * k).reshape(k, k)
        out0 = receiver.next_message(w0)
        if out0[0] != "openings" or not _open_ok(scheme, comms, w0, out0[1]):
            return None
        while stats.inner_rewinds < max_inner:
            receiver.restore(inner_snap)
            stats.inner_rewinds += 1
            w1 = rng.bits(k * k).reshape(k, k)
            out1 = receiver.next_message(w1)
            if out1[0] != "openings" or \
                    not _open_ok(scheme, comms, w1, out1[1]):
                continue
            if any(np.all(w0[i] == w1[i]) for i in range(k)):
                return "coincide"  # the hybrid's inner abort condition
            payloads = []
            for i in range(k):
                j = int(np.nonzero(w0[i] != w1[i])[0][0])
                payloads.append(xor_bytes(out0[1][i][j].message,
                                          out1[1][i][j].message))
            return payloads
        return None

    def ntcf_check(v, payloads):
        """Validate every repetition's decoded answer for challenge v."""
        answers = []
        for i in range(k):
            dec = decode_answer(config.ntcf.w_len, payloads[i])
            if dec is None:
                return None
            head, bits = dec
            try:
                x0 = ntcf_mod.inv(tds[i], 0, ys[i])
                x1 = ntcf_mod.inv(tds[i], 1, ys[i])
            except Exception:
                return None
            if int(v[i]) == 0:
                try:
                    x_claim = ntcf_mod.j_decode(config.ntcf, bits)
                except Exception:
                    return None
                if x_claim != (x0 if head == 0 else x1):
                    return None
                answers.append(("preimage", head, x_claim))
            else:
                claw = ntcf_mod.Claw(x0=x0, x1=x1, y=ys[i])
                if not ntcf_mod.good_set_contains(config.ntcf, claw, bits):
                    return None
                delta = (ntcf_mod.j_encode(config.ntcf, x0)
                         ^ ntcf_mod.j_encode(config.ntcf, x1))
                if int((bits & delta).sum() % 2) != head:
                    return None
                answers.append(("equation", head, bits))
        return answers

    def passing_transcript():
        while stats.outer_rewinds < max_outer:
            stats.outer_rewinds += 1
            v = rng.bits(k)
            res = inner_phase(v)
            if res == "coincide":
                return None, None, "inner challenge coincidence"
            if res is not None:
                ans = ntcf_check(v, res)
                if ans is not None:
                    return v, ans, None
            receiver.restore(outer_snap)
        return None, None, "budget exhausted"

    v_a, ans_a, err = passing_transcript()
    if err:
        stats.aborted = err
        return None, stats
    threshold = divergence_threshold(k)
    while stats.outer_rewinds < max_outer:
        receiver.restore(outer_snap)
        v_b, ans_b, err = passing_transcript()
        if err:
            stats.aborted = err
            return None, stats
        diff = np.nonzero(v_a != v_b)[0]
        if len(diff) < threshold:
            continue  # low divergence: retry within budget (see ledger)
        tuples = []
        for i in diff:
            pre = ans_a[i] if int(v_a[i]) == 0 else ans_b[i]
            eqn = ans_b[i] if int(v_a[i]) == 0 else ans_a[i]
            tuples.append({"i": int(i), "b": pre[1], "x": pre[2],
                           "u": eqn[1], "d": eqn[2],
                           "key": keys[i], "td": tds[i], "y": ys[i]})
        return tuples, stats
    stats.aborted = "budget exhausted"
    return None, stats


def verify_hybrid_tuple(config: Config, t: dict) -> bool:
    """Both NTCF checks: the preimage test and the correlation equation."""
    if not ntcf_mod.chk(t["key"], int(t["b"]), int(t["x"]), t["y"]):
        return False
    x0 = ntcf_mod.inv(t["td"], 0, t["y"])
    x1 = ntcf_mod.inv(t["td"], 1, t["y"])
    delta = (ntcf_mod.j_encode(config.ntcf, x0)
             ^ ntcf_mod.j_encode(config.ntcf, x1))
    if not np.any(t["d"] != 0):
        return False
    return int((t["d"] & delta).sum() % 2) == int(t["u"])


class _NullSfe:
    """Placeholder backend for hybrid runs that stop before the SFE."""

    def receiver_msg1(self, fn, receiver_input, rng):
        raise RuntimeError("hybrid never reaches the SFE phase")


def _open_ok(scheme, comms, w, ops) -> bool:
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
