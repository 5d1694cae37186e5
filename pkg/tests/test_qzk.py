import numpy as np
import pytest

from qextlab import qzk
from qextlab.config import make_config
from qextlab.rng import PrfStream
from qextlab.session import Session
from qextlab.wi import planted_ham_graph


@pytest.fixture(scope="module")
def cfg():
    return make_config("toy8")


@pytest.fixture(scope="module")
def graph_cycle():
    return planted_ham_graph(6, PrfStream(b"\x01" * 32, "g"))


def test_honest_run_accepts(cfg, graph_cycle):
    graph, cycle = graph_cycle
    s = Session("h", b"\x02" * 32)
    verifier = qzk.QzkVerifier(cfg, b"\x03" * 32)
    _, out = qzk.run_qzk(cfg, qzk.QzkProverInput(graph=graph, cycle=cycle),
                         verifier, s)
    assert out["accepted"] and not out["aborted"]


def test_prover_without_witness_gives_up(cfg, graph_cycle):
    graph, _ = graph_cycle
    s = Session("nw", b"\x04" * 32)
    verifier = qzk.QzkVerifier(cfg, b"\x05" * 32)
    _, out = qzk.run_qzk(cfg, qzk.QzkProverInput(graph=graph, cycle=None),
                         verifier, s)
    assert not out["accepted"]


def test_lying_verifier_fails_consistency_check(cfg, graph_cycle):
    """A verifier revealing a different extraction seed than it used must
    be caught by the prover's byte-exact replay."""
    graph, cycle = graph_cycle

    class Liar(qzk.QzkVerifier):
        def msg_reveal(self, grid_comms, b_bits, openings):
            reveal = super().msg_reveal(grid_comms, b_bits, openings)
            return qzk.QzkReveal(r_qext=bytes(32), d=reveal.d,
                                 td=reveal.td)

    s = Session("liar", b"\x06" * 32)
    _, out = qzk.run_qzk(cfg, qzk.QzkProverInput(graph=graph, cycle=cycle),
                         Liar(cfg, b"\x07" * 32), s)
    assert out["aborted"] and out["abort_reason"] == "consistency check"


def test_wrong_td_reveal_fails(cfg, graph_cycle):
    graph, cycle = graph_cycle

    class WrongTd(qzk.QzkVerifier):
        def msg_reveal(self, grid_comms, b_bits, openings):
            reveal = super().msg_reveal(grid_comms, b_bits, openings)
            return qzk.QzkReveal(r_qext=reveal.r_qext, d=reveal.d,
                                 td=bytes(len(reveal.td)))

    s = Session("wtd", b"\x08" * 32)
    _, out = qzk.run_qzk(cfg, qzk.QzkProverInput(graph=graph, cycle=cycle),
                         WrongTd(cfg, b"\x09" * 32), s)
    assert out["aborted"]


def test_attack_suite_small(cfg, graph_cycle):
    graph, cycle = graph_cycle
    for attack in ("no-witness", "td-guesser", "replayer"):
        accepts = qzk.soundness_attack(cfg, attack, b"\x0a" * 32, 3, graph,
                                       cycle=cycle)
        assert accepts == 0, attack
    assert qzk.soundness_attack(cfg, "control", b"\x0b" * 32, 3, graph,
                                cycle=cycle) == 3


def test_simulator_device_mode(cfg, graph_cycle):
    graph, _ = graph_cycle
    s = Session("simd", b"\x0c" * 32)
    verifier = qzk.QzkVerifier(cfg, b"\x0d" * 32)
    _, out = qzk.zk_simulate(cfg, verifier, s, graph, mode="device")
    assert out["accepted"]
    assert out["td_star"] == verifier.td


def test_simulator_rewind_mode(cfg, graph_cycle):
    graph, _ = graph_cycle
    s = Session("simr", b"\x0e" * 32)
    verifier = qzk.QzkVerifier(cfg, b"\x0f" * 32, classical_mode=True)
    _, out = qzk.zk_simulate(cfg, verifier, s, graph, mode="rewind")
    assert out["accepted"]
    assert out["td_star"] == verifier.td


def test_classical_mode_honest_run(cfg, graph_cycle):
    graph, cycle = graph_cycle
    s = Session("cm", b"\x10" * 32)
    verifier = qzk.QzkVerifier(cfg, b"\x11" * 32, classical_mode=True)
    _, out = qzk.run_qzk(cfg, qzk.QzkProverInput(graph=graph, cycle=cycle),
                         verifier, s)
    assert out["accepted"]


def test_simulated_transcript_is_wi_accepting_without_cycle(cfg,
                                                            graph_cycle):
    """The simulator proves the trapdoor branch; the verifier's decision
    procedure is branch-blind, so acceptance carries no branch signal."""
    graph, _ = graph_cycle
    s = Session("blind", b"\x12" * 32)
    verifier = qzk.QzkVerifier(cfg, b"\x13" * 32)
    _, out = qzk.zk_simulate(cfg, verifier, s, graph, mode="device")
    assert out["accepted"]
    assert verifier.wi_ok and verifier.openings_ok
