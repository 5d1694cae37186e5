"""Command-line surface.

Verbs: run, extract, simulate-zk, attack, stats, selftest, replay.
All outputs are JSON on stdout unless --out is given.  QEXT_SEED in the
environment overrides the configured seed.  Exit codes: 0 success,
2 protocol abort or failed replay verification, 3 self-test failure,
4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import cqext as cqext_mod
from . import qqext as qqext_mod
from . import qzk as qzk_mod
from .commit import Commitment, Opening
from .config import (Config, config_with_env_seed, load_config, make_config)
from .errors import ConfigurationError, ExtractionError
from .rng import PrfStream
from .session import Session, Transcript, decode_payload
from .stats import EXPERIMENTS, run_stats
from .wi import planted_ham_graph

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_SELFTEST = 3
EXIT_CONFIG = 4


def build_config(args) -> Config:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        overrides = {}
        for name, key in (("k", "k"), ("kwi", "k_wi"), ("ell", "ell"),
                          ("seed", "seed")):
            v = getattr(args, name, None)
            if v is not None:
                overrides[key] = v
        cfg = make_config(getattr(args, "preset", None) or "toy8",
                          **overrides)
    return config_with_env_seed(cfg)


def emit(obj, args) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _maybe_write_transcript(session: Session, args) -> None:
    path = getattr(args, "transcript", None)
    if path:
        with open(path, "w") as fh:
            fh.write(session.transcript.to_jsonl())


def _cqext_input(cfg: Config) -> cqext_mod.CqextSenderInput:
    rng = PrfStream(cfg.seed, "cli-input")
    inst, wit = cqext_mod.HashPreimageRelation.sample(rng)
    return cqext_mod.CqextSenderInput(instance=inst, witness=wit,
                                      seed=rng.take(32))


def _qqext_input(cfg: Config) -> qqext_mod.QqextSenderInput:
    rng = PrfStream(cfg.seed, "cli-input")
    inst, wit = cqext_mod.HashPreimageRelation.sample(rng)
    return qqext_mod.QqextSenderInput(instance=inst, witness=wit,
                                      seed=rng.take(32))


def _qzk_setting(cfg: Config, classical_mode: bool = False):
    rng = PrfStream(cfg.seed, "cli-qzk")
    graph, cycle = planted_ham_graph(6, rng.child("graph"))
    verifier = qzk_mod.QzkVerifier(cfg, rng.take(32),
                                   classical_mode=classical_mode)
    return graph, cycle, verifier


def cmd_run(args) -> int:
    cfg = build_config(args)
    session = Session(f"run-{args.protocol}", cfg.seed)
    if args.protocol == "cqext":
        _, out = cqext_mod.run_honest(cfg, _cqext_input(cfg), args.receiver,
                                      session)
        result = {"protocol": "cqext", "receiver": args.receiver,
                  "aborted": out["aborted"],
                  "receiver_output":
                      out["receiver_output"].hex()
                      if out["receiver_output"] else None}
    elif args.protocol == "qqext":
        _, out = qqext_mod.run_honest(cfg, _qqext_input(cfg), session)
        result = {"protocol": "qqext", "aborted": out["aborted"],
                  "receiver_output":
                      out["receiver_output"].hex()
                      if out["receiver_output"] else None}
    else:  # qzk
        graph, cycle, verifier = _qzk_setting(cfg)
        _, out = qzk_mod.run_qzk(
            cfg, qzk_mod.QzkProverInput(graph=graph, cycle=cycle),
            verifier, session)
        result = {"protocol": "qzk", "accepted": out["accepted"],
                  "aborted": out["aborted"]}
    if out.get("aborted"):
        result["abort_reason"] = out.get("abort_reason")
    _maybe_write_transcript(session, args)
    emit(result, args)
    return EXIT_ABORT if out.get("aborted") else EXIT_OK


def cmd_extract(args) -> int:
    cfg = build_config(args)
    session = Session(f"extract-{args.protocol}", cfg.seed)
    if args.protocol == "cqext":
        si = _cqext_input(cfg)
        sender = cqext_mod.CqextSender(cfg, si)
        _, witness, out = cqext_mod.extract(cfg, sender, session)
        ok = witness is not None and \
            cqext_mod.HashPreimageRelation.verify(si.instance, witness)
        result = {"protocol": "cqext", "extracted": ok,
                  "witness": witness.hex() if witness else None}
        _maybe_write_transcript(session, args)
        emit(result, args)
        return EXIT_OK if ok else EXIT_ABORT
    # qqext
    si = _qqext_input(cfg)
    qfhe = qqext_mod.QfheScheme(session.rng("harness", "qfhe"))
    sender = qqext_mod.QqextSender(cfg, si, qfhe)
    try:
        res = qqext_mod.nbb_extract(cfg, sender, session)
    except ExtractionError as e:
        emit({"protocol": "qqext", "extracted": False,
              "error": str(e)}, args)
        return EXIT_ABORT
    ok = res["witness"] == si.witness
    result = {"protocol": "qqext", "extracted": ok,
              "witness": res["witness"].hex(), "td": res["td"].hex(),
              "summary": res["summary"]}
    _maybe_write_transcript(session, args)
    emit(result, args)
    return EXIT_OK if ok else EXIT_ABORT


def cmd_simulate_zk(args) -> int:
    cfg = build_config(args)
    session = Session(f"simzk-{args.protocol}", cfg.seed)
    if args.protocol == "cqext":
        receiver = cqext_mod.HonestClassicalReceiver(
            cfg, session.rng("receiver"))
        _, out = cqext_mod.zk_simulate(cfg, receiver, session,
                                       _cqext_input(cfg))
        result = {"protocol": "cqext", "aborted": out["aborted"]}
    elif args.protocol == "qqext":
        receiver = qqext_mod.QqextReceiver(cfg, session.rng("receiver"))
        _, out = qqext_mod.zk_simulate(cfg, receiver, session)
        result = {"protocol": "qqext", "aborted": out["aborted"]}
    else:  # qzk
        classical = args.verifier == "classical"
        graph, _, verifier = _qzk_setting(cfg, classical_mode=classical)
        mode = "rewind" if classical else "device"
        _, out = qzk_mod.zk_simulate(cfg, verifier, session, graph,
                                     mode=mode)
        result = {"protocol": "qzk", "verifier": args.verifier,
                  "accepted": out["accepted"], "aborted": out["aborted"]}
    if out.get("aborted"):
        result["abort_reason"] = out.get("abort_reason")
    _maybe_write_transcript(session, args)
    emit(result, args)
    return EXIT_ABORT if out.get("aborted") else EXIT_OK


def cmd_attack(args) -> int:
    cfg = build_config(args)
    trials = args.trials or 10
    if args.target == "cqext-hybrid":
        session = Session("attack-hybrid", cfg.seed)
        receiver = cqext_mod.DeviceReceiver(cfg, session.rng("receiver"))
        T, st = cqext_mod.hybrid_h2_extract(cfg, receiver, session,
                                            seed=_cqext_input(cfg).seed)
        result = {"target": "cqext-hybrid",
                  "extracted": T is not None,
                  "tuples": len(T) if T else 0,
                  "inner_rewinds": st.inner_rewinds,
                  "outer_rewinds": st.outer_rewinds,
                  "all_verified": bool(T) and all(
                      cqext_mod.verify_hybrid_tuple(cfg, t) for t in T)}
        emit(result, args)
        return EXIT_OK if T is not None else EXIT_ABORT
    # qzk-soundness
    rng = PrfStream(cfg.seed, "cli-attack")
    graph, cycle = planted_ham_graph(6, rng.child("graph"))
    result = {"target": "qzk-soundness", "trials": trials}
    for attack in ("no-witness", "td-guesser", "replayer", "control"):
        result[f"accepts_{attack}"] = qzk_mod.soundness_attack(
            cfg, attack, rng.take(32), trials, graph, cycle=cycle)
    emit(result, args)
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = build_config(args)
    trials = args.trials if args.trials is not None else 20
    t0 = time.time()
    report = run_stats(args.experiment, cfg, trials)
    print(f"[{args.experiment}] {trials} trials in {time.time()-t0:.1f}s",
          file=sys.stderr)
    if args.out:
        from .report import write_report
        paths = write_report(report, args.out)
        sys.stdout.write(json.dumps({"written": paths}, sort_keys=True,
                                    indent=2) + "\n")
    else:
        sys.stdout.write(report.canonical_json().decode())
    return EXIT_OK


def cmd_selftest(args) -> int:
    cfg = build_config(args)
    checks = []

    def check(name, fn):
        try:
            ok = bool(fn())
        except Exception as e:  # noqa: BLE001 - report, don't crash
            checks.append({"name": name, "ok": False, "error": repr(e)})
            return
        checks.append({"name": name, "ok": ok})

    from . import ntcf as ntcf_mod

    def ntcf_roundtrip():
        rng = PrfStream(cfg.seed, "selftest-ntcf")
        key, td = ntcf_mod.gen(cfg.ntcf, rng)
        for _ in range(20):
            b, x = rng.bit(), rng.randint(0, cfg.ntcf.domain_size - 1)
            y = ntcf_mod.eval_prime(key, b, x, rng)
            if not ntcf_mod.chk(key, b, x, y) or \
                    ntcf_mod.inv(td, b, y) != x:
                return False
        return True

    def cqext_roundtrip():
        session = Session("selftest-cqext", cfg.seed)
        si = _cqext_input(cfg)
        sender = cqext_mod.CqextSender(cfg, si)
        _, w, _ = cqext_mod.extract(cfg, sender, session)
        return w == si.witness

    def qqext_roundtrip():
        session = Session("selftest-qqext", cfg.seed)
        si = _qqext_input(cfg)
        qfhe = qqext_mod.QfheScheme(session.rng("harness", "qfhe"))
        sender = qqext_mod.QqextSender(cfg, si, qfhe)
        return qqext_mod.nbb_extract(cfg, sender, session)["witness"] \
            == si.witness

    def qzk_honest():
        session = Session("selftest-qzk", cfg.seed)
        graph, cycle, verifier = _qzk_setting(cfg)
        _, out = qzk_mod.run_qzk(
            cfg, qzk_mod.QzkProverInput(graph=graph, cycle=cycle),
            verifier, session)
        return out["accepted"]

    check("ntcf-roundtrip", ntcf_roundtrip)
    check("cqext-extract", cqext_roundtrip)
    check("qqext-extract", qqext_roundtrip)
    check("qzk-honest", qzk_honest)
    ok = all(c["ok"] for c in checks)
    emit({"selftest": "pass" if ok else "fail", "checks": checks}, args)
    return EXIT_OK if ok else EXIT_SELFTEST


# -- transcript replay --------------------------------------------------------

_REGISTRY = {"Commitment": Commitment, "Opening": Opening}


def _canon_ok(rec) -> bool:
    doc = json.loads(bytes.fromhex(rec["payload_hex"]))
    redone = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return redone.hex() == rec["payload_hex"]


def _sealed_blob_ok(blob: bytes) -> bool:
    if len(blob) < 36:
        return False
    n = int.from_bytes(blob[16:20], "little")
    return len(blob) == 20 + n + 16


def replay_transcript(config: Config, text: str) -> dict:
    """Losslessly round-trips a transcript and re-verifies every
    commitment opening and SFE envelope that appears in it."""
    t = Transcript.from_jsonl(text)
    result = {"session": t.session_id, "records": len(t.records),
              "roundtrip_ok": t.to_jsonl() == text,
              "canonical_ok": True, "openings_checked": 0,
              "openings_ok": True, "envelopes_checked": 0,
              "envelopes_ok": True}
    decoded = {}
    for rec in t.records:
        if rec.get("type") == "abort":
            continue
        if not _canon_ok(rec):
            result["canonical_ok"] = False
        payload = decode_payload(
            json.loads(bytes.fromhex(rec["payload_hex"])), _REGISTRY)
        decoded[rec["type"]] = payload
        mt = rec["type"]
        if mt in ("sfe1", "sfe2"):
            # SFE messages serialize via to_bytes: canonical JSON inside
            result["envelopes_checked"] += 1
            ok = False
            if isinstance(payload, dict) and "hex" in payload:
                try:
                    body = json.loads(bytes.fromhex(payload["hex"]))
                    inner = body.get("payload", {})
                    if mt == "sfe1":
                        ok = len(inner.get("handle", "")) == 32 and \
                            len(inner.get("input_commit", "")) == 64
                    else:
                        ok = _sealed_blob_ok(
                            bytes.fromhex(inner.get("envelope", "")))
                except (ValueError, json.JSONDecodeError):
                    ok = False
            if not ok:
                result["envelopes_ok"] = False
        if mt == "openings" and "grid" in decoded and "w" in decoded:
            scheme = config.grid_scheme()
            comms, w = decoded["grid"], decoded["w"]
            for i in range(len(payload)):
                for j in range(len(payload[i])):
                    o = payload[i][j]
                    result["openings_checked"] += 1
                    if not scheme.verify_open(comms[i][j][int(w[i][j])],
                                              o.message, o.randomness):
                        result["openings_ok"] = False
        if mt == "share-openings" and "share-grid" in decoded \
                and "share-challenge" in decoded:
            scheme = config.qzk_grid_scheme()
            pairs = decoded["share-grid"]
            bits = decoded["share-challenge"]
            for j, o in enumerate(payload):
                result["openings_checked"] += 1
                if not scheme.verify_open(pairs[j][int(bits[j])],
                                          o.message, o.randomness):
                    result["openings_ok"] = False
        if mt == "ext-openings" and "ext-commit" in decoded \
                and "ext-challenge" in decoded:
            td = config.trapdoor_scheme()
            from .commit import CommitParams, CommitScheme
            scheme = CommitScheme(CommitParams(
                msg_bits=8 * td.rand_len, q=257, n_r=8, noise_bound=1,
                pad_rows=8, tag=b"qzk-ext"))
            comms = decoded["ext-commit"]
            w = decoded["ext-challenge"]
            for i in range(len(payload)):
                for j in range(len(payload[i])):
                    o = payload[i][j]
                    result["openings_checked"] += 1
                    if not scheme.verify_open(comms[i][j][int(w[i][j])],
                                              o.message, o.randomness):
                        result["openings_ok"] = False
    result["ok"] = bool(result["roundtrip_ok"] and result["canonical_ok"]
                        and result["openings_ok"]
                        and result["envelopes_ok"])
    return result


def cmd_replay(args) -> int:
    cfg = build_config(args)
    try:
        with open(args.transcript_file) as fh:
            text = fh.read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = replay_transcript(cfg, text)
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        print(f"error: malformed transcript: {e!r}", file=sys.stderr)
        return EXIT_CONFIG
    emit(result, args)
    return EXIT_OK if result["ok"] else EXIT_ABORT


# -- argument parsing ----------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--preset", help="parameter preset (toy8, toy12)")
    p.add_argument("--k", type=int)
    p.add_argument("--kwi", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--seed", help="32-byte seed as 64 hex chars")
    p.add_argument("--out", help="write JSON result here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qext",
        description="extraction-protocol laboratory harness")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run a protocol honestly")
    p.add_argument("protocol", choices=["cqext", "qqext", "qzk"])
    p.add_argument("--receiver", choices=["classical", "device"],
                   default="classical")
    p.add_argument("--transcript", help="write the transcript JSONL here")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("extract", help="run an extractor against a sender")
    p.add_argument("protocol", choices=["cqext", "qqext"])
    p.add_argument("--transcript", help="write the transcript JSONL here")
    _add_common(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("simulate-zk", help="run a zero-knowledge simulator")
    p.add_argument("protocol", choices=["cqext", "qqext", "qzk"])
    p.add_argument("--verifier", choices=["classical", "device"],
                   default="device")
    p.add_argument("--transcript", help="write the transcript JSONL here")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate_zk)

    p = sub.add_parser("attack", help="run an attack suite")
    p.add_argument("target", choices=["cqext-hybrid", "qzk-soundness"])
    p.add_argument("--trials", type=int)
    _add_common(p)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("stats", help="run a registered experiment")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--trials", type=int)
    _add_common(p)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("selftest", help="quick end-to-end sanity battery")
    _add_common(p)
    p.set_defaults(fn=cmd_selftest)

    p = sub.add_parser("replay",
                       help="re-verify a recorded transcript file")
    p.add_argument("transcript_file")
    _add_common(p)
    p.set_defaults(fn=cmd_replay)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse usage errors are configuration errors in our contract
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.fn(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
