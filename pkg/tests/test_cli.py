import json
import os

import pytest

from qextlab.cli import main, replay_transcript
from qextlab.config import make_config
from qextlab.report import write_report
from qextlab.stats import EXPERIMENTS, run_stats


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_run_cqext_classical(capsys):
    code, doc = run_cli(capsys, "run", "cqext", "--preset", "toy8",
                        "--k", "4")
    assert code == 0
    assert doc["receiver_output"] is None and not doc["aborted"]


def test_run_cqext_device_extracts(capsys):
    code, doc = run_cli(capsys, "run", "cqext", "--k", "4",
                        "--receiver", "device")
    assert code == 0
    assert doc["receiver_output"] is not None


def test_extract_qqext(capsys):
    code, doc = run_cli(capsys, "extract", "qqext", "--ell", "4")
    assert code == 0 and doc["extracted"]


def test_unknown_preset_is_config_error(capsys):
    assert main(["run", "cqext", "--preset", "nope"]) == 4


def test_bad_usage_is_config_error(capsys):
    assert main(["frobnicate"]) == 4


def test_env_seed_changes_output(capsys, monkeypatch):
    _, doc1 = run_cli(capsys, "run", "cqext", "--k", "4",
                      "--receiver", "device")
    monkeypatch.setenv("QEXT_SEED", "ff" * 32)
    _, doc2 = run_cli(capsys, "run", "cqext", "--k", "4",
                      "--receiver", "device")
    assert doc1["receiver_output"] != doc2["receiver_output"]


def test_stats_zero_trials(capsys):
    code, doc = run_cli(capsys, "stats", "cqext-honest", "--trials", "0")
    assert code == 0 and doc["fields"] == {} and doc["trials"] == 0


def test_unknown_experiment(capsys):
    assert main(["stats", "no-such-experiment"]) == 4


def test_replay_roundtrip_and_tamper(tmp_path, capsys):
    tpath = tmp_path / "t.jsonl"
    code, _ = run_cli(capsys, "run", "cqext", "--k", "4",
                      "--transcript", str(tpath))
    assert code == 0
    code, doc = run_cli(capsys, "replay", str(tpath), "--k", "4")
    assert code == 0 and doc["ok"] and doc["openings_checked"] == 16

    # flip one opening bit: replay must fail with exit code 2
    lines = tpath.read_text().splitlines()
    for i, ln in enumerate(lines):
        rec = json.loads(ln)
        if rec.get("type") == "openings":
            doc2 = json.loads(bytes.fromhex(rec["payload_hex"]))
            h = doc2[0][0]["f"]["randomness"]["hex"]
            doc2[0][0]["f"]["randomness"]["hex"] = \
                ("0" if h[0] != "0" else "1") + h[1:]
            rec["payload_hex"] = json.dumps(
                doc2, sort_keys=True, separators=(",", ":")).encode().hex()
            lines[i] = json.dumps(rec, sort_keys=True,
                                  separators=(",", ":"))
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    code, doc = run_cli(capsys, "replay", str(bad), "--k", "4")
    assert code == 2 and not doc["openings_ok"]


def test_replay_qzk_transcript(tmp_path, capsys):
    tpath = tmp_path / "qzk.jsonl"
    code, _ = run_cli(capsys, "run", "qzk", "--k", "4", "--kwi", "4",
                      "--transcript", str(tpath))
    assert code == 0
    result = replay_transcript(make_config("toy8", k=4, k_wi=4),
                               tpath.read_text())
    assert result["ok"] and result["openings_checked"] > 16


def test_report_files_written(tmp_path):
    cfg = make_config("toy8", k=4)
    report = run_stats("lock-sweep", cfg, 20)
    paths = write_report(report, str(tmp_path))
    assert os.path.exists(paths["json"])
    assert os.path.exists(paths["csv"])
    on_disk = open(paths["json"], "rb").read()
    assert on_disk == report.canonical_json()
    assert open(paths["csv"]).readline() == "key,value\n"


def test_report_figures(tmp_path):
    cfg = make_config("toy8", k=4)
    report = run_stats("cqext-hybrid", cfg, 2)
    paths = write_report(report, str(tmp_path))
    assert any(p.endswith(".png") for p in paths.get("figures", []))


def test_selftest(capsys):
    code, doc = run_cli(capsys, "selftest", "--k", "4")
    assert code == 0 and doc["selftest"] == "pass"
