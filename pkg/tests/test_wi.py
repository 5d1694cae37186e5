import numpy as np
import pytest

from qextlab import wi
from qextlab.commit import xor_bytes
from qextlab.config import make_config
from qextlab.errors import ArgumentError
from qextlab.rng import PrfStream


@pytest.fixture(scope="module")
def setting():
    cfg = make_config("toy8")
    rng = PrfStream(b"\x01" * 32, "wi")
    grid = cfg.qzk_grid_scheme()
    graph, cycle = wi.planted_ham_graph(6, rng.child("g"))
    td = rng.take(grid.msg_len)
    shares, grids = [], []
    for _ in range(cfg.k):
        sh0 = rng.take(grid.msg_len)
        sh1 = xor_bytes(sh0, td)
        d0, d1 = grid.sample_randomness(rng), grid.sample_randomness(rng)
        grids.append((grid.commit(sh0, d0), grid.commit(sh1, d1)))
        shares.append((sh0, d0, sh1, d1))
    inst = wi.RwiInstance(graph=graph, td=td, grids=grids)
    return cfg, inst, cycle, shares


def test_graph_serialization_roundtrip():
    g, _ = wi.planted_ham_graph(5, PrfStream(b"\x02" * 32, "g"))
    g2 = wi.HamGraph.from_adjacency_lists(g.to_adjacency_lists())
    assert np.array_equal(g.adj, g2.adj)


def test_planted_cycle_valid():
    g, order = wi.planted_ham_graph(7, PrfStream(b"\x03" * 32, "g"))
    assert wi.cycle_ok(g, order)
    assert not wi.cycle_ok(g, np.roll(order, 1)[::-1][:6])


def test_rwi_check_both_branches(setting):
    cfg, inst, cycle, shares = setting
    grid = cfg.qzk_grid_scheme()
    assert wi.rwi_check(inst, wi.RwiWitness(branch="language", cycle=cycle),
                        grid)
    assert wi.rwi_check(inst, wi.RwiWitness(branch="trapdoor",
                                            shares=shares), grid)
    bad = list(shares)
    sh0, d0, sh1, d1 = bad[0]
    bad[0] = (xor_bytes(sh0, b"\x01" * len(sh0)), d0, sh1, d1)
    assert not wi.rwi_check(inst, wi.RwiWitness(branch="trapdoor",
                                                shares=bad), grid)


def test_wi_prove_language_branch(setting):
    cfg, inst, cycle, shares = setting
    ok, _ = wi.wi_prove(inst, wi.RwiWitness(branch="language", cycle=cycle),
                        cfg.k_wi, cfg.blum_scheme(), cfg.qzk_grid_scheme(),
                        PrfStream(b"\x04" * 32, "p"),
                        PrfStream(b"\x05" * 32, "v"))
    assert ok


def test_wi_prove_trapdoor_branch(setting):
    cfg, inst, cycle, shares = setting
    ok, _ = wi.wi_prove(inst, wi.RwiWitness(branch="trapdoor",
                                            shares=shares),
                        cfg.k_wi, cfg.blum_scheme(), cfg.qzk_grid_scheme(),
                        PrfStream(b"\x06" * 32, "p"),
                        PrfStream(b"\x07" * 32, "v"))
    assert ok


def test_wi_commit_rejects_bad_witness(setting):
    cfg, inst, cycle, shares = setting
    with pytest.raises(ArgumentError):
        wi.wi_commit(inst, wi.RwiWitness(branch="language",
                                         cycle=np.arange(6)[::-1]),
                     cfg.k_wi, cfg.blum_scheme(), cfg.qzk_grid_scheme(),
                     PrfStream(b"\x08" * 32, "p"))


def test_cheater_without_witness_fails(setting):
    """A prover that pre-commits to both simulated clauses can only answer
    the challenge it guessed: acceptance rate must be ~2^-k_wi."""
    cfg, inst, cycle, shares = setting
    blum, grid = cfg.blum_scheme(), cfg.qzk_grid_scheme()
    syndromes = wi.grid_syndromes(grid, inst)
    rng = PrfStream(b"\x09" * 32, "cheat")
    wins = 0
    for t in range(30):
        guesses, msg, states = [], [], []
        for _ in range(cfg.k_wi):
            ch = rng.bit()
            ch_l = rng.bit()
            st_l, comms = wi.blum_commit(blum, inst.graph, None, ch_l, rng)
            st_t, ts = wi.preimage_commit(grid, syndromes, None,
                                          ch ^ ch_l, rng)
            guesses.append(ch)
            msg.append({"blum": comms, "ts": ts})
            states.append((ch_l, st_l, st_t))
        ch_bits = PrfStream(b"\x0a" * 32, f"v{t}").bits(cfg.k_wi)
        if any(int(c) != g for c, g in zip(ch_bits, guesses)):
            continue  # cheater cannot even respond
        resp = [{"ch_l": ch_l, "ch_t": int(c) ^ ch_l,
                 "resp_l": wi.blum_respond(st_l, ch_l),
                 "resp_t": wi.preimage_respond(st_t, int(c) ^ ch_l)}
                for (ch_l, st_l, st_t), c in zip(states, ch_bits)]
        if wi.wi_verify(inst, msg, ch_bits, resp, blum, grid):
            wins += 1
    assert wins == 0


def test_verifier_rejects_tampered_response(setting):
    cfg, inst, cycle, shares = setting
    blum, grid = cfg.blum_scheme(), cfg.qzk_grid_scheme()
    state, msg = wi.wi_commit(inst,
                              wi.RwiWitness(branch="language", cycle=cycle),
                              cfg.k_wi, blum, grid,
                              PrfStream(b"\x0b" * 32, "p"))
    ch_bits = PrfStream(b"\x0c" * 32, "v").bits(cfg.k_wi)
    resp = wi.wi_respond(state, ch_bits)
    resp[0]["ch_t"] ^= 1  # breaks ch_l xor ch_t = ch
    assert not wi.wi_verify(inst, msg, ch_bits, resp, blum, grid)
