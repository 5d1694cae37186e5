"""The encrypted-channel extraction protocol and its non-black-box extractor.

Backends: a mock classical-message FHE (ciphertext = authenticated sealed
box keyed by a per-session master secret indexed by key id; evaluation
applies a declared classical function to the sealed plaintext and reseals)
and an ideal lockable-obfuscation oracle (the hidden triple lives in the
program object; simulated handles share the serialized shape but hold no
payload).

Protocol, four rounds: the receiver commits to its c*-randomness strings
first (this ordering is what blocks mauling of msg1 back into the c*_i),
the sender answers with (CT1, locked program, otp), the receiver sends
c*_i commitments to zero, and a two-message SFE for f closes the session.
An honest receiver always ends with bottom; the extractor reruns the
sender under encryption to commit the real trapdoor bits instead.
"""

from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass, field

import numpy as np

from .circuits import (ComputeAndCompare, QReceiverInput, QSenderInput,
                       build_cc_circuit, build_f_qqext, parse_output)
from .commit import pack_bits, unpack_bits, xor_bytes
from .config import WITNESS_PAD, Config
from .errors import (ArgumentError, ConfigurationError, ExtractionError,
                     ProtocolError)
from .rng import PrfStream
from .seal import seal, unseal
from .session import Session
from .sfe import IdealMediator, IdealSfe

SK_LEN = 32  # secret-key handle bytes: key id (16) || access token (16)


# -- mock classical-message FHE ----------------------------------------------

@dataclass(frozen=True)
class QfhePublicKey:
    kid: bytes

    def to_bytes(self) -> bytes:
        return self.kid


@dataclass(frozen=True)
class QfheCiphertext:
    kid: bytes
    blob: bytes

    def to_bytes(self) -> bytes:
        return self.kid + self.blob

    @staticmethod
    def from_bytes(raw: bytes) -> "QfheCiphertext":
        if len(raw) < 16:
            raise ProtocolError("ciphertext too short")
        return QfheCiphertext(kid=raw[:16], blob=raw[16:])


class QfheScheme:
    """Per-session oracle holding the master secret; all ciphertexts are
    classical byte strings and evaluation is exact on classical messages."""

    def __init__(self, rng: PrfStream):
        self._master = rng.take(32)

    def _data_key(self, kid: bytes) -> bytes:
        return hashlib.sha256(b"qfhe-data" + self._master + kid).digest()

    def _token(self, kid: bytes) -> bytes:
        return hashlib.sha256(b"qfhe-tok" + self._master + kid).digest()[:16]

    def gen(self, rng: PrfStream) -> tuple[QfhePublicKey, bytes]:
        kid = rng.take(16)
        return QfhePublicKey(kid), kid + self._token(kid)

    def encrypt(self, pk: QfhePublicKey, plaintext: bytes,
                rng: PrfStream) -> QfheCiphertext:
        blob = seal(self._data_key(pk.kid), rng.take(16), plaintext)
        return QfheCiphertext(kid=pk.kid, blob=blob)

    def decrypt(self, sk: bytes, ct: QfheCiphertext) -> bytes:
        if len(sk) != SK_LEN:
            raise ProtocolError("bad secret key handle")
        kid, token = sk[:16], sk[16:]
        if token != self._token(kid):
            raise ProtocolError("secret key token rejected")
        if ct.kid != kid:
            raise ProtocolError("ciphertext under a different key")
        return unseal(self._data_key(kid), ct.blob)

    def evaluate(self, fn, cts: list[QfheCiphertext],
                 label: bytes = b"eval") -> QfheCiphertext:
        """Public homomorphic evaluation: no secret key handle involved."""
        if not cts:
            raise ArgumentError("evaluate needs at least one ciphertext")
        kid = cts[0].kid
        if any(ct.kid != kid for ct in cts):
            raise ProtocolError("mixed-key evaluation unsupported")
        key = self._data_key(kid)
        pts = [unseal(key, ct.blob) for ct in cts]
        out = fn(pts)
        nonce = hashlib.sha256(b"qfhe-nonce" + label
                               + b"".join(ct.blob for ct in cts)).digest()[:16]
        return QfheCiphertext(kid=kid, blob=seal(key, nonce, out))


# -- ideal lockable obfuscation ----------------------------------------------

@dataclass
class LockedProgram:
    handle: str
    cc: ComputeAndCompare | None = field(default=None, repr=False)

    def to_bytes(self) -> bytes:
        # the handle is the whole public surface; real and simulated
        # programs serialize identically
        return bytes.fromhex(self.handle)


def obfuscate(cc: ComputeAndCompare, rng: PrfStream) -> LockedProgram:
    return LockedProgram(handle=rng.take(16).hex(), cc=cc)


def sim_locked_program(rng: PrfStream) -> LockedProgram:
    return LockedProgram(handle=rng.take(16).hex(), cc=None)


def locked_eval(prog: LockedProgram, data: bytes):
    """payload iff the hidden inner procedure maps data to the lock."""
    if prog.cc is None:
        return None
    return prog.cc.eval(data)


# -- protocol parties ---------------------------------------------------------

@dataclass
class QqextSenderInput:
    instance: bytes
    witness: bytes
    seed: bytes
    td_override: bytes | None = None  # tests only (degenerate zero-td case)


@dataclass
class Qmsg1:
    ct1: QfheCiphertext
    obf: LockedProgram
    otp: bytes

    def external(self) -> dict:
        return {"ct1_hex": self.ct1.to_bytes().hex(),
                "obf_handle_id": self.obf.handle,
                "otp_hex": self.otp.hex()}


def _td_bytes(td_bits: np.ndarray, ell: int) -> bytes:
    return pack_bits(np.asarray(td_bits, dtype=np.int64)).ljust(
        (ell + 7) // 8, b"\x00")[: (ell + 7) // 8]


class QqextSender:
    """Honest-code sender; all randomness from the declared seed.

    Keeps only picklable state (no closures, no functionality objects), so
    the extractor can reseat the whole machine inside an FHE evaluation.
    """

    role = "sender"

    def __init__(self, config: Config, sender_input: QqextSenderInput,
                 qfhe: QfheScheme):
        self.config = config
        self.input = sender_input
        self.qfhe = qfhe
        self.rng = PrfStream(sender_input.seed, "qqext-sender")
        self.phase = 0
        ell = config.ell
        if sender_input.td_override is not None:
            self.td_bits = unpack_bits(sender_input.td_override, ell)
        else:
            while True:
                self.td_bits = self.rng.bits(ell)
                if np.any(self.td_bits != 0):
                    break
        self.c = None
        self.cstars = None
        self.sk1 = None
        self.sk2 = None
        self.pk1 = None
        self.pk2 = None
        self.sfe = None
        self.fn = None

    def declared_seed(self) -> bytes:
        return self.input.seed

    def bind(self, sfe, fn):
        self.sfe = sfe
        self.fn = fn

    def next_message(self, incoming):
        cfg = self.config
        if self.phase == 0:
            self.c = incoming  # receiver's commitment, before any sender data
            self.pk1, self.sk1 = self.qfhe.gen(self.rng.child("pk1"))
            self.pk2, self.sk2 = self.qfhe.gen(self.rng.child("pk2"))
            r_lock = self.rng.take(32)
            lock_key = self.rng.take(SK_LEN)
            ct_star = self.qfhe.encrypt(self.pk2, r_lock,
                                        self.rng.child("ctstar"))
            qfhe, sk1 = self.qfhe, self.sk1

            def inner(data: bytes) -> bytes:
                sk2_cand = qfhe.decrypt(sk1, QfheCiphertext.from_bytes(data))
                return qfhe.decrypt(sk2_cand, ct_star)

            obf = obfuscate(build_cc_circuit(inner, r_lock, lock_key),
                            self.rng.child("obf"))
            td = _td_bytes(self.td_bits, cfg.ell)
            ct1 = self.qfhe.encrypt(self.pk1, td + self.input.witness,
                                    self.rng.child("ct1"))
            self.phase = 1
            return "msg1", Qmsg1(ct1=ct1, obf=obf,
                                 otp=xor_bytes(lock_key, self.sk1))
        if self.phase == 1:
            if len(incoming) != cfg.ell:
                return "abort", "bad c* count"
            self.cstars = incoming
            self.phase = 2
            return None, None
        if self.phase == 2:
            self.phase = 3
            sender_in = QSenderInput(td_bits=self.td_bits, c=self.c,
                                     cstars=self.cstars, sk2=self.sk2)
            msg2 = self.sfe.sender_msg2(self.fn, sender_in, incoming,
                                        self.rng.child("sfe"))
            return "sfe2", msg2
        return "abort", "sender out of phase"


class QqextReceiver:
    """Honest receiver: commits its randomness strings, then commits zero
    bits as the c*_i, and ends the SFE with bottom."""

    role = "receiver"

    def __init__(self, config: Config, rng: PrfStream):
        self.config = config
        self.rng = rng
        self.star = config.qqext_star_scheme()
        self.outer = config.qqext_outer_scheme()
        self.phase = 0
        self.rs = None
        self.d = None
        self.msg1 = None
        self.sfe_state = None
        self.output = None
        self.sfe = None
        self.fn = None

    def bind(self, sfe, fn):
        self.sfe = sfe
        self.fn = fn

    def next_message(self, incoming):
        cfg = self.config
        if self.phase == 0:
            self.rs = [self.star.sample_randomness(self.rng)
                       for _ in range(cfg.ell)]
            self.d = self.outer.sample_randomness(self.rng)
            c = self.outer.commit(b"".join(self.rs), self.d)
            self.phase = 1
            return "c", c
        if self.phase == 1:
            m: Qmsg1 = incoming
            if len(m.otp) != SK_LEN:
                return "abort", "otp length mismatch"
            self.msg1 = m
            cstars = [self.star.commit(b"\x00", self.rs[i])
                      for i in range(cfg.ell)]
            self.phase = 2
            return "cstars", cstars
        if self.phase == 2:
            msg1, self.sfe_state = self.sfe.receiver_msg1(
                self.fn, QReceiverInput(d=self.d, rs=self.rs),
                self.rng.child("sfe"))
            self.phase = 3
            return "sfe1", msg1
        return "abort", "receiver out of phase"

    def finish(self, msg2):
        out = self.sfe.receiver_output(self.sfe_state, msg2)
        self.output = parse_output(out)
        return self.output


_SCHEDULE = [("receiver", "c"), ("sender", "msg1"), ("receiver", "cstars"),
             ("sender", "ack"), ("receiver", "sfe1"), ("sender", "sfe2")]


def build_fn(config: Config):
    return build_f_qqext(config.qqext_outer_scheme(),
                         config.qqext_star_scheme(), config.ell, SK_LEN)


def run_qqext(config: Config, sender, receiver, session: Session):
    mediator = IdealMediator()
    sfe = IdealSfe(mediator)
    fn = build_fn(config)
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
            continue
        if got_type != mtype:
            session.abort(who, "schedule violation")
            return {"aborted": True, "abort_party": who,
                    "abort_reason": "schedule violation",
                    "receiver_output": None}
        logged = payload.external() if mtype == "msg1" else payload
        session.send(who, other, mtype, logged)
        last = payload
    output = receiver.finish(last)
    return {"aborted": False, "receiver_output": output}


def run_honest(config: Config, sender_input: QqextSenderInput,
               session: Session, qfhe: QfheScheme = None):
    if sender_input.td_override is not None and \
            not any(sender_input.td_override):
        raise ConfigurationError(
            "honest mode rejects the all-zero trapdoor (degenerate)")
    qfhe = qfhe or QfheScheme(session.rng("harness", "qfhe"))
    sender = QqextSender(config, sender_input, qfhe)
    receiver = QqextReceiver(config, session.rng("receiver"))
    outputs = run_qqext(config, sender, receiver, session)
    return session.transcript, outputs


def nbb_extract(config: Config, sender: QqextSender, session: Session):
    """Non-black-box extraction from a semi-malicious sender.

    Round 1 runs in the clear; the sender's whole machine state is then
    sealed under PK1 and the remaining rounds (trapdoor-bit commitments
    plus the SFE exchange) run inside a single homomorphic evaluation,
    yielding Enc(PK1, SK2).  The locked program converts that ciphertext
    into the lock key, the otp turns the key into SK1, and CT1 decrypts
    to (td || w).
    """
    cfg = config
    qfhe = sender.qfhe
    star = cfg.qqext_star_scheme()
    outer = cfg.qqext_outer_scheme()
    fn = build_fn(cfg)
    rng = session.rng("extractor")

    # R1 in the clear
    rs = [star.sample_randomness(rng) for _ in range(cfg.ell)]
    d = outer.sample_randomness(rng)
    c = outer.commit(b"".join(rs), d)
    session.send("extractor", "sender", "c", c)
    out = sender.next_message(c)
    if out[0] != "msg1":
        session.abort("sender", "no msg1")
        raise ExtractionError("sender refused round 1",
                              diagnostics={"stage": "msg1"})
    msg1: Qmsg1 = out[1]
    session.send("sender", "extractor", "msg1", msg1.external())

    # seal the sender machine under PK1 (CT1's key id names PK1)
    pk1 = QfhePublicKey(msg1.ct1.kid)
    sender.sfe = None
    sender.fn = None
    ct_state = qfhe.encrypt(pk1, pickle.dumps(sender), rng.child("state"))

    def continuation(pts: list[bytes]) -> bytes:
        machine: QqextSender = pickle.loads(pts[0])
        mediator = IdealMediator()
        machine.bind(IdealSfe(mediator), fn)
        # commit the real trapdoor bits under the receiver's randomness
        cstars = [star.commit(bytes([int(machine.td_bits[i]) & 1]), rs[i])
                  for i in range(cfg.ell)]
        resp = machine.next_message(cstars)
        if resp[0] == "abort":
            return bytes(SK_LEN)
        inner_rng = PrfStream(b"\x00" * 32, "under-encryption-sfe")
        sfe = IdealSfe(mediator)
        sfe1, state = sfe.receiver_msg1(fn, QReceiverInput(d=d, rs=rs),
                                        inner_rng)
        resp = machine.next_message(sfe1)
        if resp[0] != "sfe2":
            return bytes(SK_LEN)
        payload = parse_output(sfe.receiver_output(state, resp[1]))
        if payload is None:
            return bytes(SK_LEN)
        return payload[:SK_LEN]

    ct_out = qfhe.evaluate(continuation, [ct_state], label=b"nbb-cont")
    lock_key = locked_eval(msg1.obf, ct_out.to_bytes())
    if lock_key is None:
        session.abort("extractor", "locked program rejected")
        raise ExtractionError(
            "locked program yielded bottom (sender deviated)",
            diagnostics={"stage": "locked_eval",
                         "obf_handle": msg1.obf.handle})
    sk1 = xor_bytes(lock_key, msg1.otp)
    td_w = qfhe.decrypt(sk1, msg1.ct1)
    td_len = (cfg.ell + 7) // 8
    td, witness = td_w[:td_len], td_w[td_len:]
    summary = {"ct_state_len": len(ct_state.to_bytes()),
               "ct_out_len": len(ct_out.to_bytes()),
               "obf_handle": msg1.obf.handle}
    return {"witness": witness, "td": td, "summary": summary}


def zk_simulate(config: Config, receiver, session: Session,
                plaintext_len: int = None, qfhe: QfheScheme = None):
    """Sim: CT1 encrypts a zero pattern of the honest plaintext width, the
    locked-program handle is payload-free, the otp is uniform, and the SFE
    runs with sender input bottom."""
    qfhe = qfhe or QfheScheme(session.rng("harness", "qfhe"))
    if plaintext_len is None:
        plaintext_len = (config.ell + 7) // 8 + WITNESS_PAD
    rng = session.rng("simulator")

    class _SimSender:
        role = "sender"

        def __init__(self):
            self.phase = 0
            self.sfe = None
            self.fn = None

        def bind(self, sfe, fn):
            self.sfe = sfe
            self.fn = fn

        def next_message(self, incoming):
            if self.phase == 0:
                pk1, _ = qfhe.gen(rng.child("pk1"))
                ct1 = qfhe.encrypt(pk1, bytes(plaintext_len),
                                   rng.child("ct1"))
                self.phase = 1
                return "msg1", Qmsg1(ct1=ct1,
                                     obf=sim_locked_program(rng.child("obf")),
                                     otp=rng.take(SK_LEN))
            if self.phase == 1:
                self.phase = 2
                return None, None
            if self.phase == 2:
                self.phase = 3
                msg2 = self.sfe.sender_msg2(self.fn, None, incoming,
                                            rng.child("sfe"))
                return "sfe2", msg2
            return "abort", "sim sender out of phase"

    outputs = run_qqext(config, _SimSender(), receiver, session)
    return session.transcript, outputs
