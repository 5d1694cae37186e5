"""Experiment registry and reproducible statistics reports.

Reports are pure functions of (config, seed, trials): every field is a
deterministic protocol-cost or acceptance statistic, so re-running with
the same seed reproduces the report byte for byte.  Wall-clock time never
enters a report (it goes to stderr in the CLI); "timing" percentiles are
over deterministic cost counters (rewinds, messages, commitment counts).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import cqext as cqext_mod
from . import qqext as qqext_mod
from . import qzk as qzk_mod
from .commit import xor_bytes
from .config import Config
from .errors import ConfigurationError
from .rng import PrfStream
from .session import Session
from .wi import RwiInstance, RwiWitness, planted_ham_graph, wi_prove

EXPERIMENTS = {}


def register_experiment(name):
    def deco(fn):
        EXPERIMENTS[name] = fn
        return fn
    return deco


@dataclass
class StatsReport:
    experiment: str
    preset: str
    trials: int
    seed_hex: str
    fields: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)  # name -> list of numbers

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "preset": self.preset,
                "trials": self.trials, "seed": self.seed_hex,
                "fields": self.fields, "figures": self.figures}

    def canonical_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode() + b"\n"

    def csv_text(self) -> str:
        lines = ["key,value"]
        for k in sorted(self.fields):
            v = self.fields[k]
            if isinstance(v, list):
                v = ";".join(str(x) for x in v)
            lines.append(f"{k},{v}")
        return "\n".join(lines) + "\n"


def _pct(values, q) -> float:
    return float(np.percentile(np.asarray(values, dtype=np.float64), q))


def run_stats(experiment: str, config: Config, trials: int) -> StatsReport:
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; "
                                 f"known: {sorted(EXPERIMENTS)}")
    report = StatsReport(experiment=experiment, preset=config.preset,
                         trials=trials, seed_hex=config.seed.hex())
    if trials > 0:
        fields, figures = EXPERIMENTS[experiment](config, trials)
        report.fields = fields
        report.figures = figures
    return report


def _trial_seed(config: Config, t: int) -> bytes:
    return PrfStream(config.seed, f"trial{t}").take(32)


def _demo_sender_input(config: Config, t: int) -> cqext_mod.CqextSenderInput:
    rng = PrfStream(config.seed, f"sender-input{t}")
    inst, wit = cqext_mod.HashPreimageRelation.sample(rng)
    return cqext_mod.CqextSenderInput(instance=inst, witness=wit,
                                      seed=rng.take(32))


@register_experiment("cqext-honest")
def _cqext_honest(config: Config, trials: int):
    bots = 0
    lengths = None
    lengths_stable = True
    for t in range(trials):
        session = Session(f"cqext-honest-{t}", _trial_seed(config, t))
        _, out = cqext_mod.run_honest(config, _demo_sender_input(config, t),
                                      "classical", session)
        if out["receiver_output"] is None and not out["aborted"]:
            bots += 1
        lv = session.transcript.message_lengths()
        if lengths is None:
            lengths = lv
        elif lv != lengths:
            lengths_stable = False
    return ({"bot_rate": bots / trials,
             "length_vector_stable": lengths_stable,
             "message_count": len(lengths)}, {})


@register_experiment("cqext-extract")
def _cqext_extract(config: Config, trials: int):
    wins = 0
    for t in range(trials):
        session = Session(f"cqext-extract-{t}", _trial_seed(config, t))
        si = _demo_sender_input(config, t)
        sender = cqext_mod.CqextSender(config, si)
        _, witness, _ = cqext_mod.extract(config, sender, session)
        if witness is not None and \
                cqext_mod.HashPreimageRelation.verify(si.instance, witness):
            wins += 1
    return ({"success_rate": wins / trials, "successes": wins}, {})


@register_experiment("cqext-zk")
def _cqext_zk(config: Config, trials: int):
    identical = 0
    for t in range(trials):
        si = _demo_sender_input(config, t)
        seed = _trial_seed(config, t)

        def one(sim: bool) -> str:
            session = Session("cqext-zk", seed)
            recv = cqext_mod.HonestClassicalReceiver(
                config, session.rng("receiver"))
            if sim:
                cqext_mod.zk_simulate(config, recv, session, si)
            else:
                sender = cqext_mod.CqextSender(config, si)
                cqext_mod.run_cqext(config, sender, recv, session)
            return session.transcript.to_jsonl()

        if one(False) == one(True):
            identical += 1
    return ({"byte_identical_rate": identical / trials}, {})


@register_experiment("cqext-hybrid")
def _cqext_hybrid(config: Config, trials: int):
    inner, outer, sizes = [], [], []
    wins = 0
    for t in range(trials):
        session = Session(f"hybrid-{t}", _trial_seed(config, t))
        recv = cqext_mod.DeviceReceiver(config, session.rng("receiver"))
        si = _demo_sender_input(config, t)
        T, st = cqext_mod.hybrid_h2_extract(config, recv, session,
                                            seed=si.seed)
        inner.append(st.inner_rewinds)
        outer.append(st.outer_rewinds)
        if T is not None:
            wins += 1
            sizes.append(len(T))
    fields = {"success_rate": wins / trials,
              "inner_p50": _pct(inner, 50), "inner_p99": _pct(inner, 99),
              "outer_p50": _pct(outer, 50), "outer_p99": _pct(outer, 99),
              "min_tuple_set": min(sizes) if sizes else 0}
    return fields, {"inner_rewinds": inner, "outer_rewinds": outer}


@register_experiment("qqext-extract")
def _qqext_extract(config: Config, trials: int):
    wins = td_ok = 0
    for t in range(trials):
        session = Session(f"qqext-extract-{t}", _trial_seed(config, t))
        rng = PrfStream(config.seed, f"qq-input{t}")
        inst, wit = cqext_mod.HashPreimageRelation.sample(rng)
        si = qqext_mod.QqextSenderInput(instance=inst, witness=wit,
                                        seed=rng.take(32))
        qfhe = qqext_mod.QfheScheme(session.rng("harness", "qfhe"))
        sender = qqext_mod.QqextSender(config, si, qfhe)
        expected_td = qqext_mod._td_bytes(sender.td_bits, config.ell)
        res = qqext_mod.nbb_extract(config, sender, session)
        if res["witness"] == wit:
            wins += 1
        if res["td"] == expected_td:
            td_ok += 1
    return ({"success_rate": wins / trials,
             "td_match_rate": td_ok / trials}, {})


@register_experiment("qqext-honest")
def _qqext_honest(config: Config, trials: int):
    bots = 0
    otp_ones = 0
    otp_bits = 0
    for t in range(trials):
        session = Session(f"qqext-honest-{t}", _trial_seed(config, t))
        rng = PrfStream(config.seed, f"qq-input{t}")
        inst, wit = cqext_mod.HashPreimageRelation.sample(rng)
        si = qqext_mod.QqextSenderInput(instance=inst, witness=wit,
                                        seed=rng.take(32))
        qfhe = qqext_mod.QfheScheme(session.rng("harness", "qfhe"))
        sender = qqext_mod.QqextSender(config, si, qfhe)
        receiver = qqext_mod.QqextReceiver(config, session.rng("receiver"))
        out = qqext_mod.run_qqext(config, sender, receiver, session)
        if out["receiver_output"] is None and not out["aborted"]:
            bots += 1
        otp = receiver.msg1.otp
        otp_ones += sum(bin(b).count("1") for b in otp)
        otp_bits += 8 * len(otp)
    return ({"bot_rate": bots / trials,
             "otp_one_frequency": otp_ones / otp_bits}, {})


@register_experiment("qzk-honest")
def _qzk_honest(config: Config, trials: int):
    accepts = 0
    rng = PrfStream(config.seed, "qzk-honest")
    graph, cycle = planted_ham_graph(6, rng.child("graph"))
    for t in range(trials):
        session = Session(f"qzk-honest-{t}", _trial_seed(config, t))
        verifier = qzk_mod.QzkVerifier(config, rng.take(32))
        _, out = qzk_mod.run_qzk(
            config, qzk_mod.QzkProverInput(graph=graph, cycle=cycle),
            verifier, session)
        accepts += bool(out["accepted"])
    return ({"accept_rate": accepts / trials}, {})


@register_experiment("qzk-attacks")
def _qzk_attacks(config: Config, trials: int):
    rng = PrfStream(config.seed, "qzk-attacks")
    graph, cycle = planted_ham_graph(6, rng.child("graph"))
    fields = {}
    for attack in ("no-witness", "td-guesser", "replayer"):
        fields[f"accepts_{attack}"] = qzk_mod.soundness_attack(
            config, attack, rng.take(32), trials, graph, cycle=cycle)
    return fields, {}


@register_experiment("wi-branches")
def _wi_branches(config: Config, trials: int):
    rng = PrfStream(config.seed, "wi-branches")
    blum = config.blum_scheme()
    grid = config.qzk_grid_scheme()
    graph, cycle = planted_ham_graph(6, rng.child("graph"))
    td = rng.take(grid.msg_len)
    shares, grids = [], []
    for _ in range(config.k):
        sh0 = rng.take(grid.msg_len)
        sh1 = xor_bytes(sh0, td)
        d0 = grid.sample_randomness(rng)
        d1 = grid.sample_randomness(rng)
        grids.append((grid.commit(sh0, d0), grid.commit(sh1, d1)))
        shares.append((sh0, d0, sh1, d1))
    inst = RwiInstance(graph=graph, td=td, grids=grids)
    wits = {"L": RwiWitness(branch="language", cycle=cycle),
            "T": RwiWitness(branch="trapdoor", shares=shares)}
    accepts = {"L": 0, "T": 0}
    mismatch = 0
    for t in range(trials):
        per = {}
        for name, wit in wits.items():
            ok, _ = wi_prove(inst, wit, config.k_wi, blum, grid,
                             rng.child(f"p{name}{t}"),
                             rng.child(f"v{t}"))  # shared verifier coins
            per[name] = ok
            accepts[name] += bool(ok)
        if per["L"] != per["T"]:
            mismatch += 1
    return ({"accepts_language": accepts["L"],
             "accepts_trapdoor": accepts["T"],
             "acceptance_mismatches": mismatch}, {})


@register_experiment("lock-sweep")
def _lock_sweep(config: Config, trials: int):
    rng = PrfStream(config.seed, "lock-sweep")
    session = Session("lock-sweep", config.seed)
    inst, wit = cqext_mod.HashPreimageRelation.sample(rng)
    si = qqext_mod.QqextSenderInput(instance=inst, witness=wit,
                                    seed=rng.take(32))
    qfhe = qqext_mod.QfheScheme(session.rng("harness", "qfhe"))
    sender = qqext_mod.QqextSender(config, si, qfhe)
    star = config.qqext_star_scheme()
    outer = config.qqext_outer_scheme()
    rs = [star.sample_randomness(rng) for _ in range(config.ell)]
    d = outer.sample_randomness(rng)
    c = outer.commit(b"".join(rs), d)
    _, msg1 = sender.next_message(c)
    ct_right = qfhe.encrypt(sender.pk1, sender.sk2, rng.child("enc"))
    correct = int(qqext_mod.locked_eval(msg1.obf,
                                        ct_right.to_bytes()) is not None)
    false_releases = 0
    blob_len = len(ct_right.to_bytes())
    for _ in range(trials):
        if qqext_mod.locked_eval(msg1.obf, rng.take(blob_len)) is not None:
            false_releases += 1
    return ({"correct_release": correct,
             "false_releases": false_releases}, {})
