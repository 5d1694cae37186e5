"""Constant-round zero-knowledge argument with a trapdoor escape hatch.

Phases: the verifier commits to a random trapdoor; a trapdoor-extraction
subprotocol (the classical-channel extraction protocol with the verifier
as sender, on the statement "I can open c") hands bottom to the honest
prover but the trapdoor to the simulator; the prover fixes a grid of k
share pairs before the verifier reveals anything; the verifier opens one
share per pair, then reveals its entire extraction-phase randomness and
the trapdoor opening; the prover replays every verifier message from the
revealed randomness and aborts on the first byte of disagreement; finally
a WI argument for "I know a cycle OR my shares recombine to the trapdoor"
decides the session.

Soundness intuition realized in the attack suite: a prover without the
cycle must make its pre-committed shares hit the trapdoor, which it sees
only after the grid is fixed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .commit import grid_commit, xor_bytes
from .config import Config
from .cqext import (CqextSender, CqextSenderInput, DeviceReceiver,
                    HonestClassicalReceiver, OpeningRelation, run_cqext)
from .errors import CapabilityError, ConfigurationError
from .rng import PrfStream
from .session import Session
from .wi import (HamGraph, RwiInstance, RwiWitness, wi_commit, wi_respond,
                 wi_verify)


@dataclass
class QzkReveal:
    r_qext: bytes
    d: bytes
    td: bytes


class QzkVerifier:
    """Honest-code verifier; all randomness from the declared seed, which
    is what lets the prover's consistency check recompute its messages."""

    def __init__(self, config: Config, seed: bytes,
                 classical_mode: bool = False):
        self.config = config
        self.seed = seed
        self.classical_mode = classical_mode
        self.rng = PrfStream(seed, "qzk-verifier")
        self.scheme = config.trapdoor_scheme()
        self.td = self.rng.take(self.scheme.msg_len)
        self.d = self.scheme.sample_randomness(self.rng)
        self.c = self.scheme.commit(self.td, self.d)
        self.r_qext = self.rng.take(32)
        self.openings_ok = None
        self.wi_ok = None
        self._ext_grid = None

    def snapshot(self):
        return copy.deepcopy(self.__dict__)

    def restore(self, token):
        self.__dict__ = copy.deepcopy(token)

    def msg_init(self):
        return self.c

    # sequential extractable commitment of the trapdoor opening randomness
    # (classical-verifier variant; the rewinding simulator's target)
    def ext_scheme(self):
        from .commit import CommitParams, CommitScheme
        return CommitScheme(CommitParams(
            msg_bits=8 * self.scheme.rand_len, q=257, n_r=8, noise_bound=1,
            pad_rows=8, tag=b"qzk-ext"))

    def ext_commit(self):
        if not self.classical_mode:
            raise ConfigurationError("extractable commitment only exists "
                                     "in classical mode")
        self._ext_grid = grid_commit(self.ext_scheme(),
                                     [self.d] * self.config.k,
                                     self.rng.child("ext-grid"))
        return self._ext_grid.commitments

    def ext_open(self, w: np.ndarray):
        k = self.config.k
        return [[self._ext_grid.openings[i][j][int(w[i][j])]
                 for j in range(k)] for i in range(k)]

    def make_cqext_sender(self) -> CqextSender:
        relation = OpeningRelation(self.scheme)
        witness = relation.pack_witness(self.d, self.td)
        return CqextSender(
            self.config,
            CqextSenderInput(instance=self.c.data, witness=witness,
                             seed=self.r_qext),
            relation=relation)

    def msg_challenge(self, grid_comms) -> np.ndarray:
        return self.rng.bits(self.config.k)

    def msg_reveal(self, grid_comms, b_bits, openings) -> QzkReveal:
        scheme = self.config.qzk_grid_scheme()
        ok = True
        for j in range(self.config.k):
            o = openings[j]
            side = int(b_bits[j])
            if not scheme.verify_open(grid_comms[j][side], o.message,
                                      o.randomness):
                ok = False
        self.openings_ok = ok
        return QzkReveal(r_qext=self.r_qext, d=self.d, td=self.td)

    def wi_challenge(self, wi_msg) -> np.ndarray:
        return self.rng.bits(self.config.k_wi)

    def decision(self, instance, wi_msg, ch_bits, wi_resp) -> bool:
        self.wi_ok = wi_verify(instance, wi_msg, ch_bits, wi_resp,
                               self.config.blum_scheme(),
                               self.config.qzk_grid_scheme())
        return bool(self.openings_ok and self.wi_ok)


@dataclass
class QzkProverInput:
    graph: HamGraph
    cycle: np.ndarray | None  # None for attack provers


def _replay_matches(config: Config, reveal: QzkReveal, c,
                    receiver_copy, real_records: list) -> bool:
    """Recompute every extraction-phase sender message from the revealed
    randomness by rerunning the honest sender against a copy of our own
    receiver, then compare the sub-transcripts byte for byte."""
    scheme = config.trapdoor_scheme()
    if not scheme.verify_open(c, reveal.td, reveal.d):
        return False
    relation = OpeningRelation(scheme)
    sender = CqextSender(
        config,
        CqextSenderInput(instance=c.data,
                         witness=relation.pack_witness(reveal.d, reveal.td),
                         seed=reveal.r_qext),
        relation=relation)
    scratch = Session("qzk-replay", bytes(32))
    run_cqext(config, sender, receiver_copy, scratch, relation)
    rep = [(r["type"], r["payload_hex"])
           for r in scratch.transcript.records]
    real = [(r["type"], r["payload_hex"]) for r in real_records]
    return rep == real


def _prover_grid(config: Config, target: bytes | None, rng: PrfStream):
    """k pairs of share commitments.  Honest mode (target None): both
    shares random.  Simulator mode: shares recombine to the target."""
    scheme = config.qzk_grid_scheme()
    pairs, opens = [], []
    for _ in range(config.k):
        sh0 = rng.take(scheme.msg_len)
        sh1 = rng.take(scheme.msg_len) if target is None \
            else xor_bytes(sh0, target)
        d0 = scheme.sample_randomness(rng)
        d1 = scheme.sample_randomness(rng)
        pairs.append((scheme.commit(sh0, d0), scheme.commit(sh1, d1)))
        opens.append((sh0, d0, sh1, d1))
    return pairs, opens


def run_qzk(config: Config, prover_input: QzkProverInput,
            verifier: QzkVerifier, session: Session,
            prover_strategy=None):
    """Full protocol against an honest-code verifier.  prover_strategy
    customizes the prover for the attack suite; see soundness_attack."""
    strategy = prover_strategy or _honest_strategy
    prover_rng = session.rng("prover")

    c = verifier.msg_init()
    session.send("verifier", "prover", "td-commit", c)

    if getattr(verifier, "classical_mode", False):
        ok = _ext_phase_honest(config, verifier, session, prover_rng)
        if not ok:
            session.abort("prover", "extractable-commitment opening "
                                    "rejected")
            return session.transcript, {"accepted": False, "aborted": True,
                                        "abort_reason": "ext-commit"}

    # trapdoor extraction phase: verifier is the extraction-sender
    cq_sender = verifier.make_cqext_sender()
    cq_receiver = HonestClassicalReceiver(config, prover_rng.child("cqext"))
    receiver_copy = copy.deepcopy(cq_receiver)
    mark = len(session.transcript.records)
    cq_out = run_cqext(config, cq_sender, cq_receiver, session,
                       cq_sender.relation)
    if cq_out["aborted"]:
        return session.transcript, {"accepted": False, "aborted": True,
                                    "abort_reason": cq_out["abort_reason"]}
    sub_records = list(session.transcript.records[mark:])

    # prover share grid, fixed before any reveal
    grid_comms, grid_opens = strategy.grid(config, prover_rng)
    session.send("prover", "verifier", "share-grid", grid_comms)

    b_bits = verifier.msg_challenge(grid_comms)
    session.send("verifier", "prover", "share-challenge", b_bits)

    openings = strategy.open_shares(grid_opens, b_bits)
    session.send("prover", "verifier", "share-openings", openings)

    reveal = verifier.msg_reveal(grid_comms, b_bits, openings)
    session.send("verifier", "prover", "reveal",
                 {"r_qext": reveal.r_qext, "d": reveal.d, "td": reveal.td})

    if not _replay_matches(config, reveal, c, receiver_copy, sub_records):
        session.abort("prover", "verifier reveal inconsistent with "
                                "extraction-phase transcript")
        return session.transcript, {"accepted": False, "aborted": True,
                                    "abort_reason": "consistency check"}

    instance = RwiInstance(graph=prover_input.graph, td=reveal.td,
                           grids=grid_comms)
    wi = strategy.wi(config, instance, prover_input, grid_opens, reveal,
                     prover_rng.child("wi"))
    if wi is None:
        session.abort("prover", "no provable witness branch")
        return session.transcript, {"accepted": False, "aborted": True,
                                    "abort_reason": "prover gave up"}
    wi_state, wi_msg = wi
    session.send("prover", "verifier", "wi-commit", _wi_msg_payload(wi_msg))
    ch_bits = verifier.wi_challenge(wi_msg)
    session.send("verifier", "prover", "wi-challenge", ch_bits)
    try:
        wi_resp = wi_respond(wi_state, ch_bits)
    except Exception:
        session.abort("prover", "cannot answer WI challenge")
        return session.transcript, {"accepted": False, "aborted": True,
                                    "abort_reason": "wi response"}
    session.send("prover", "verifier", "wi-response", "opaque")
    accepted = verifier.decision(instance, wi_msg, ch_bits, wi_resp)
    return session.transcript, {"accepted": bool(accepted),
                                "aborted": False}


def _ext_phase_honest(config: Config, verifier, session: Session,
                      prover_rng: PrfStream) -> bool:
    """Honest prover's side of the sequential extractable commitment: one
    challenge, verify the opened side."""
    from .commit import _openings_valid
    scheme = verifier.ext_scheme()
    comms = verifier.ext_commit()
    session.send("verifier", "prover", "ext-commit", comms)
    w = prover_rng.child("ext").bits(config.k * config.k).reshape(
        config.k, config.k)
    session.send("prover", "verifier", "ext-challenge", w)
    ops = verifier.ext_open(w)
    session.send("verifier", "prover", "ext-openings", ops)
    return _openings_valid(scheme, comms, w, ops)


def _wi_msg_payload(wi_msg):
    # commitments only; clause states stay prover-side
    return [{"blum": m["blum"], "ts": [t for t in m["ts"]]} for m in wi_msg]


class _honest_strategy:
    @staticmethod
    def grid(config, rng):
        return _prover_grid(config, None, rng.child("grid"))

    @staticmethod
    def open_shares(grid_opens, b_bits):
        from .commit import Opening
        out = []
        for (sh0, d0, sh1, d1), b in zip(grid_opens, b_bits):
            out.append(Opening(message=sh0 if int(b) == 0 else sh1,
                               randomness=d0 if int(b) == 0 else d1))
        return out

    @staticmethod
    def wi(config, instance, prover_input, grid_opens, reveal, rng):
        if prover_input.cycle is None:
            return None
        witness = RwiWitness(branch="language", cycle=prover_input.cycle)
        return wi_commit(instance, witness, config.k_wi,
                         config.blum_scheme(), config.qzk_grid_scheme(),
                         rng)


# -- soundness attack suite ---------------------------------------------------

class _td_guesser_strategy(_honest_strategy):
    """Commits shares recombining to a guessed trapdoor, then tries the
    trapdoor branch; the guess is wrong except with probability 2^-|td|."""

    def __init__(self):
        self.guess = None
        self.opens = None

    def grid(self, config, rng):
        g = rng.child("guess")
        self.guess = g.take(config.trapdoor_scheme().msg_len)
        pairs, opens = _prover_grid(config, self.guess, rng.child("grid"))
        self.opens = opens
        return pairs, opens

    def wi(self, config, instance, prover_input, grid_opens, reveal, rng):
        if self.guess != reveal.td:
            return None  # witness check would fail; prover gives up
        witness = RwiWitness(branch="trapdoor", shares=self.opens)
        return wi_commit(instance, witness, config.k_wi,
                         config.blum_scheme(), config.qzk_grid_scheme(),
                         rng)


class _replayer_strategy(_honest_strategy):
    """Replays the WI messages of a recorded honest session verbatim."""

    def __init__(self, recorded_wi):
        self.recorded = recorded_wi  # (state, msg) from another session

    def wi(self, config, instance, prover_input, grid_opens, reveal, rng):
        return self.recorded


def soundness_attack(config: Config, attack: str, seed: bytes,
                     trials: int, graph: HamGraph,
                     cycle: np.ndarray | None = None):
    """Runs an attack prover (or the completeness control) and counts
    verifier accepts."""
    accepts = 0
    rng = PrfStream(seed, f"attack-{attack}")
    recorded = None
    if attack == "replayer":
        # record one honest session's WI material to replay
        s0 = Session("qzk-record", rng.take(32))
        v0 = QzkVerifier(config, rng.take(32))
        pi = QzkProverInput(graph=graph, cycle=cycle)
        pr = s0.rng("prover")
        c0 = v0.msg_init()
        grid_comms, grid_opens = _prover_grid(config, None,
                                              pr.child("grid"))
        instance = RwiInstance(graph=graph, td=v0.td, grids=grid_comms)
        if cycle is None:
            raise ConfigurationError("replayer needs a recorded session; "
                                     "pass the control cycle")
        recorded = wi_commit(instance,
                             RwiWitness(branch="language", cycle=cycle),
                             config.k_wi, config.blum_scheme(),
                             config.qzk_grid_scheme(), pr.child("wi"))
    for t in range(trials):
        session = Session(f"qzk-{attack}-{t}", rng.take(32))
        verifier = QzkVerifier(config, rng.take(32))
        if attack == "no-witness":
            pin = QzkProverInput(graph=graph, cycle=None)
            strat = _honest_strategy
        elif attack == "td-guesser":
            pin = QzkProverInput(graph=graph, cycle=None)
            strat = _td_guesser_strategy()
        elif attack == "replayer":
            pin = QzkProverInput(graph=graph, cycle=None)
            strat = _replayer_strategy(recorded)
        elif attack == "control":
            pin = QzkProverInput(graph=graph, cycle=cycle)
            strat = _honest_strategy
        else:
            raise ConfigurationError(f"unknown attack {attack!r}")
        _, out = run_qzk(config, pin, verifier, session,
                         prover_strategy=strat)
        if out["accepted"]:
            accepts += 1
    return accepts


# -- the simulator -------------------------------------------------------------

def zk_simulate(config: Config, verifier: QzkVerifier, session: Session,
                graph: HamGraph, mode: str = "device"):
    """Simulates the prover without a cycle witness.

    mode "device": extracts the trapdoor through the extraction phase with
    per-repetition device oracles (provisioned from the verifier's
    declared extraction-phase seed, the semi-malicious contract).
    mode "rewind": grid-rewinds the verifier's extractable commitment of
    its trapdoor opening (the sequential classical-verifier variant).
    """
    prover_rng = session.rng("prover")
    c = verifier.msg_init()
    session.send("verifier", "prover", "td-commit", c)

    cq_sender = verifier.make_cqext_sender()
    relation = cq_sender.relation
    if mode == "device":
        cq_receiver = DeviceReceiver(config, prover_rng.child("cqext"))
    elif mode == "rewind":
        cq_receiver = HonestClassicalReceiver(config,
                                              prover_rng.child("cqext"))
    else:
        raise ConfigurationError(f"unknown simulator mode {mode!r}")
    receiver_copy = copy.deepcopy(cq_receiver)
    mark = len(session.transcript.records)

    if mode == "rewind":
        td_star, d_star = _rewind_extract_td(config, verifier, session, c)
        mark = len(session.transcript.records)
        cq_out = run_cqext(config, cq_sender, cq_receiver, session,
                           relation)
        if cq_out["aborted"]:
            return session.transcript, {"accepted": False, "aborted": True,
                                        "abort_reason":
                                            cq_out["abort_reason"]}
    else:
        cq_out = run_cqext(config, cq_sender, cq_receiver, session,
                           relation)
        if cq_out["aborted"]:
            return session.transcript, {"accepted": False, "aborted": True,
                                        "abort_reason":
                                            cq_out["abort_reason"]}
        witness = cq_out["receiver_output"]
        if witness is None:
            session.abort("prover", "trapdoor extraction failed")
            return session.transcript, {"accepted": False, "aborted": True,
                                        "abort_reason": "extraction"}
        d_star, td_star = relation.unpack_witness(witness)
    sub_records = list(session.transcript.records[mark:])

    grid_comms, grid_opens = _prover_grid(config, td_star,
                                          prover_rng.child("grid"))
    session.send("prover", "verifier", "share-grid", grid_comms)
    b_bits = verifier.msg_challenge(grid_comms)
    session.send("verifier", "prover", "share-challenge", b_bits)
    openings = _honest_strategy.open_shares(grid_opens, b_bits)
    session.send("prover", "verifier", "share-openings", openings)
    reveal = verifier.msg_reveal(grid_comms, b_bits, openings)
    session.send("verifier", "prover", "reveal",
                 {"r_qext": reveal.r_qext, "d": reveal.d, "td": reveal.td})

    if not _replay_matches(config, reveal, c, receiver_copy, sub_records):
        session.abort("prover", "verifier reveal inconsistent")
        return session.transcript, {"accepted": False, "aborted": True,
                                    "abort_reason": "consistency check"}
    if reveal.td != td_star:
        session.abort("prover", "extracted trapdoor mismatch")
        return session.transcript, {"accepted": False, "aborted": True,
                                    "abort_reason": "td mismatch"}

    instance = RwiInstance(graph=graph, td=reveal.td, grids=grid_comms)
    witness = RwiWitness(branch="trapdoor", shares=grid_opens)
    wi_state, wi_msg = wi_commit(instance, witness, config.k_wi,
                                 config.blum_scheme(),
                                 config.qzk_grid_scheme(),
                                 prover_rng.child("wi"))
    session.send("prover", "verifier", "wi-commit", _wi_msg_payload(wi_msg))
    ch_bits = verifier.wi_challenge(wi_msg)
    session.send("verifier", "prover", "wi-challenge", ch_bits)
    wi_resp = wi_respond(wi_state, ch_bits)
    session.send("prover", "verifier", "wi-response", "opaque")
    accepted = verifier.decision(instance, wi_msg, ch_bits, wi_resp)
    return session.transcript, {"accepted": bool(accepted),
                                "aborted": False, "td_star": td_star}


def _rewind_extract_td(config: Config, verifier: QzkVerifier,
                       session: Session, c):
    """Sim_c: the classical-verifier variant's sequential extractable
    commitment.  The verifier grid-commits shares of its trapdoor opening
    randomness d; rewinding over the challenge bits recombines them, and
    d decodes the trapdoor out of c."""
    for cap in ("snapshot", "restore"):
        if not hasattr(verifier, cap):
            raise CapabilityError("rewind mode needs a snapshotable "
                                  "verifier")
    from .commit import grid_extract_by_rewind

    scheme = verifier.ext_scheme()
    adapter = _ExtCommitAdapter(verifier)
    rng = session.rng("prover", "ext-rewind")
    payloads, rewinds, first = grid_extract_by_rewind(adapter, scheme, rng)
    w0, op0, comms = first
    session.send("verifier", "prover", "ext-commit", comms)
    session.send("prover", "verifier", "ext-challenge", w0)
    session.send("verifier", "prover", "ext-openings", op0)
    if payloads is None:
        session.abort("prover", "rewinding extraction failed")
        raise CapabilityError("rewinding extraction failed")
    d = payloads[0]
    td = config.trapdoor_scheme().decode(c, d)
    return td, d


class _ExtCommitAdapter:
    """Adapts the verifier's extractable-commitment turns to the grid
    rewinding extractor's committer interface."""

    def __init__(self, verifier):
        self.verifier = verifier

    def snapshot(self):
        return self.verifier.snapshot()

    def restore(self, token):
        self.verifier.restore(token)

    def commit_message(self):
        return self.verifier.ext_commit()

    def open_message(self, challenge_bits):
        return self.verifier.ext_open(challenge_bits)
