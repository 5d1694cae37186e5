"""Witness-indistinguishable argument for the two-clause OR relation.

Statement: either the graph x has a Hamiltonian cycle, or the k grid
pairs (c_0^(j), c_1^(j)) open to shares with sh_0 xor sh_1 = td for all j.

Composition: per parallel repetition the verifier sends one bit ch and
the prover answers with sub-challenges ch_L xor ch_T = ch, a Blum
Hamiltonicity transcript for ch_L and a GF(2) preimage (Schnorr-style)
transcript for ch_T.  The prover runs the clause it has a witness for
honestly and samples the other clause's transcript from its simulator;
both simulators are perfect on everything the verifier sees, which is
what makes the two witness branches statistically indistinguishable.

The trapdoor clause uses the GF(2) linearity of the grid commitments:
c_0 xor c_1 = A.(r_0 xor r_1) xor enc(td), so knowledge of both openings
reduces to knowledge of a preimage rho of a public syndrome under A.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .commit import (BinaryCommitScheme, Commitment, CommitScheme, Opening,
                     pack_bits, unpack_bits, xor_bytes)
from .errors import ArgumentError, ProtocolError
from .rng import PrfStream

DEFAULT_GRAPH_NODES = 6


# -- Hamiltonicity instances --------------------------------------------------

@dataclass(frozen=True)
class HamGraph:
    n: int
    adj: np.ndarray  # n x n 0/1, no self loops

    def to_adjacency_lists(self) -> list[list[int]]:
        return [list(map(int, np.nonzero(self.adj[i])[0]))
                for i in range(self.n)]

    @staticmethod
    def from_adjacency_lists(lists: list[list[int]]) -> "HamGraph":
        n = len(lists)
        adj = np.zeros((n, n), dtype=np.int64)
        for i, row in enumerate(lists):
            for j in row:
                adj[i][j] = 1
        return HamGraph(n=n, adj=adj)


def planted_ham_graph(n: int, rng: PrfStream,
                      extra_edge_prob: float = 0.5):
    """Random digraph with a planted Hamiltonian cycle; returns the graph
    and the cycle as a vertex ordering."""
    if n < 3:
        raise ArgumentError("need at least 3 nodes")
    order = rng.shuffle(n)
    adj = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        adj[order[i], order[(i + 1) % n]] = 1
    for a in range(n):
        for b in range(n):
            if a != b and rng.randint(0, 999) < 1000 * extra_edge_prob:
                adj[a][b] = 1
    return HamGraph(n=n, adj=adj), order


def cycle_ok(graph: HamGraph, order: np.ndarray) -> bool:
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(graph.n)):
        return False
    return all(graph.adj[order[i], order[(i + 1) % graph.n]] == 1
               for i in range(graph.n))


# -- relation -----------------------------------------------------------------

@dataclass
class RwiInstance:
    graph: HamGraph
    td: bytes
    grids: list  # k pairs (Commitment, Commitment) under the grid scheme


@dataclass
class RwiWitness:
    branch: str                       # "language" | "trapdoor"
    cycle: np.ndarray | None = None   # language branch
    shares: list | None = None        # trapdoor: per j (sh0, d0, sh1, d1)


def rwi_check(instance: RwiInstance, witness: RwiWitness,
              grid_scheme: BinaryCommitScheme) -> bool:
    if witness.branch == "language":
        return cycle_ok(instance.graph, witness.cycle)
    if witness.branch != "trapdoor":
        return False
    if witness.shares is None or len(witness.shares) != len(instance.grids):
        return False
    for (c0, c1), (sh0, d0, sh1, d1) in zip(instance.grids, witness.shares):
        if not grid_scheme.verify_open(c0, sh0, d0):
            return False
        if not grid_scheme.verify_open(c1, sh1, d1):
            return False
        if xor_bytes(sh0, sh1) != instance.td:
            return False
    return True


# -- Blum clause (Hamiltonicity) ----------------------------------------------

def _commit_matrix(scheme: CommitScheme, mat: np.ndarray, rng: PrfStream):
    n = mat.shape[0]
    flat_c, flat_o = scheme.commit_bits(mat.ravel(), rng)
    comms = [flat_c[a * n:(a + 1) * n] for a in range(n)]
    opens = [flat_o[a * n:(a + 1) * n] for a in range(n)]
    return comms, opens


def blum_commit(scheme: CommitScheme, graph: HamGraph,
                cycle: np.ndarray | None, ch_pre: int | None,
                rng: PrfStream):
    """Real commit (cycle given) or simulated commit for a pre-chosen
    challenge.  Returns (state, commitment matrix)."""
    n = graph.n
    if cycle is not None or ch_pre == 0:
        pi = rng.shuffle(n)
        permuted = graph.adj[np.ix_(pi, pi)]  # entry [pi[a]][pi[b]] at (a,b)
        comms, opens = _commit_matrix(scheme, permuted, rng)
        perm_cycle = None
        if cycle is not None:
            inv = np.empty(n, dtype=np.int64)
            inv[pi] = np.arange(n)
            perm_cycle = inv[np.asarray(cycle, dtype=np.int64)]
        state = {"mode": "real" if cycle is not None else "sim0",
                 "pi": pi, "opens": opens, "perm_cycle": perm_cycle, "n": n}
        return state, comms
    if ch_pre == 1:
        # commit to a bare random cycle; only its entries will be opened
        sigma = rng.shuffle(n)
        mat = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            mat[sigma[i], sigma[(i + 1) % n]] = 1
        comms, opens = _commit_matrix(scheme, mat, rng)
        state = {"mode": "sim1", "opens": opens, "perm_cycle": sigma, "n": n}
        return state, comms
    raise ArgumentError("simulated Blum commit needs a pre-chosen challenge")


def blum_respond(state: dict, ch: int):
    if ch == 0:
        if state["mode"] == "sim1":
            raise ProtocolError("simulated transcript cannot answer ch=0")
        return {"pi": state["pi"], "opens": state["opens"]}
    if state["mode"] == "sim0":
        raise ProtocolError("simulated transcript cannot answer ch=1")
    order = state["perm_cycle"]
    n = state["n"]
    edges = [(int(order[i]), int(order[(i + 1) % n])) for i in range(n)]
    return {"cycle": edges,
            "opens": [state["opens"][a][b] for a, b in edges]}


def blum_check(scheme: CommitScheme, graph: HamGraph, comms, ch: int,
               resp: dict) -> bool:
    n = graph.n
    try:
        if ch == 0:
            pi = np.asarray(resp["pi"], dtype=np.int64)
            if sorted(pi.tolist()) != list(range(n)):
                return False
            permuted = graph.adj[np.ix_(pi, pi)]
            opens = [resp["opens"][a][b] for a in range(n)
                     for b in range(n)]
            if any(o.message != bytes([int(v)])
                   for o, v in zip(opens, permuted.ravel())):
                return False
            return scheme.verify_bits(
                [comms[a][b] for a in range(n) for b in range(n)],
                permuted.ravel(), [o.randomness for o in opens])
        edges = resp["cycle"]
        if len(edges) != n:
            return False
        heads = [a for a, _ in edges]
        tails = [b for _, b in edges]
        # one directed cycle covering every vertex
        if sorted(heads) != list(range(n)) or sorted(tails) != list(range(n)):
            return False
        succ = {a: b for a, b in edges}
        node, seen = edges[0][0], set()
        for _ in range(n):
            if node in seen:
                return False
            seen.add(node)
            node = succ[node]
        if node != edges[0][0] or len(seen) != n:
            return False
        for (a, b), o in zip(edges, resp["opens"]):
            if o.message != b"\x01":
                return False
            if not scheme.verify_open(comms[a][b], o.message, o.randomness):
                return False
        return True
    except (KeyError, IndexError, TypeError):
        return False


# -- trapdoor clause (GF(2) preimage) ----------------------------------------

def grid_syndromes(scheme: BinaryCommitScheme,
                   instance: RwiInstance) -> list[np.ndarray]:
    """Per j: c_0 xor c_1 xor enc(td) as a bit vector = A.rho_j."""
    enc_td = scheme.enc_bits(instance.td)
    return [(scheme.commit_to_bits(c0) ^ scheme.commit_to_bits(c1) ^ enc_td)
            for c0, c1 in instance.grids]


def preimage_commit(scheme: BinaryCommitScheme, syndromes: list,
                    rhos: list | None, ch_pre: int | None, rng: PrfStream):
    """rhos given: honest first message t_j = A.mu_j.  rhos None: simulate
    for the pre-chosen challenge by sampling z first."""
    ts, state = [], {"scheme": scheme}
    if rhos is not None:
        mus = [rng.bits(scheme.n_r) for _ in syndromes]
        ts = [scheme.matvec(mu) for mu in mus]
        state.update(mode="real", mus=mus, rhos=rhos)
    else:
        zs = [rng.bits(scheme.n_r) for _ in syndromes]
        ts = [scheme.matvec(z) ^ (ch_pre * syn) % 2
              for z, syn in zip(zs, syndromes)]
        ts = [t % 2 for t in ts]
        state.update(mode="sim", zs=zs, ch_pre=ch_pre)
    return state, ts


def preimage_respond(state: dict, ch: int):
    if state["mode"] == "sim":
        if ch != state["ch_pre"]:
            raise ProtocolError("simulated transcript, wrong challenge")
        return state["zs"]
    if ch == 0:
        return state["mus"]
    return [(mu ^ rho) % 2 for mu, rho in zip(state["mus"], state["rhos"])]


def preimage_check(scheme: BinaryCommitScheme, syndromes: list, ts: list,
                   ch: int, zs: list) -> bool:
    if len(zs) != len(syndromes) or len(ts) != len(syndromes):
        return False
    for t, syn, z in zip(ts, syndromes, zs):
        lhs = scheme.matvec(np.asarray(z, dtype=np.int64))
        rhs = (np.asarray(t, dtype=np.int64) + ch * syn) % 2
        if not np.array_equal(lhs, rhs):
            return False
    return True


# -- OR composition, parallel-repeated ----------------------------------------

@dataclass
class WiProofState:
    reps: list = field(default_factory=list)  # per-rep clause states


def wi_commit(instance: RwiInstance, witness: RwiWitness, k_wi: int,
              blum_scheme: CommitScheme, grid_scheme: BinaryCommitScheme,
              rng: PrfStream):
    """First message of the parallel OR proof; the prover pre-samples the
    simulated clause's sub-challenge per repetition."""
    if not rwi_check(instance, witness, grid_scheme):
        raise ArgumentError("witness does not satisfy the claimed branch")
    syndromes = grid_syndromes(grid_scheme, instance)
    rhos = None
    if witness.branch == "trapdoor":
        rhos = [unpack_bits(d0, grid_scheme.n_r)
                ^ unpack_bits(d1, grid_scheme.n_r)
                for (_, d0, _, d1) in witness.shares]
    state = WiProofState()
    msg = []
    for _ in range(k_wi):
        if witness.branch == "language":
            ch_t = rng.bit()
            st_l, comms = blum_commit(blum_scheme, instance.graph,
                                      witness.cycle, None, rng)
            st_t, ts = preimage_commit(grid_scheme, syndromes, None, ch_t,
                                       rng)
            state.reps.append({"real": "L", "ch_t": ch_t,
                               "st_l": st_l, "st_t": st_t})
        else:
            ch_l = rng.bit()
            st_l, comms = blum_commit(blum_scheme, instance.graph, None,
                                      ch_l, rng)
            st_t, ts = preimage_commit(grid_scheme, syndromes, rhos, None,
                                       rng)
            state.reps.append({"real": "T", "ch_l": ch_l,
                               "st_l": st_l, "st_t": st_t})
        msg.append({"blum": comms, "ts": ts})
    return state, msg


def wi_respond(state: WiProofState, ch_bits: np.ndarray):
    out = []
    for rep, ch in zip(state.reps, np.asarray(ch_bits, dtype=np.int64)):
        if rep["real"] == "L":
            ch_t = rep["ch_t"]
            ch_l = int(ch) ^ ch_t
        else:
            ch_l = rep["ch_l"]
            ch_t = int(ch) ^ ch_l
        out.append({"ch_l": ch_l, "ch_t": ch_t,
                    "resp_l": blum_respond(rep["st_l"], ch_l),
                    "resp_t": preimage_respond(rep["st_t"], ch_t)})
    return out


def wi_verify(instance: RwiInstance, msg: list, ch_bits: np.ndarray,
              resp: list, blum_scheme: CommitScheme,
              grid_scheme: BinaryCommitScheme) -> bool:
    if len(msg) != len(resp) or len(msg) != len(ch_bits):
        return False
    syndromes = grid_syndromes(grid_scheme, instance)
    for m, ch, r in zip(msg, np.asarray(ch_bits, dtype=np.int64), resp):
        try:
            if (r["ch_l"] ^ r["ch_t"]) != int(ch):
                return False
            if not blum_check(blum_scheme, instance.graph, m["blum"],
                              r["ch_l"], r["resp_l"]):
                return False
            if not preimage_check(grid_scheme, syndromes, m["ts"],
                                  r["ch_t"], r["resp_t"]):
                return False
        except (KeyError, TypeError):
            return False
    return True


def wi_prove(instance: RwiInstance, witness: RwiWitness, k_wi: int,
             blum_scheme: CommitScheme, grid_scheme: BinaryCommitScheme,
             prover_rng: PrfStream, verifier_rng: PrfStream):
    """Full non-interactive driver for tests: returns (accept, transcript
    dict with the three messages)."""
    state, msg = wi_commit(instance, witness, k_wi, blum_scheme,
                           grid_scheme, prover_rng)
    ch_bits = verifier_rng.bits(k_wi)
    resp = wi_respond(state, ch_bits)
    ok = wi_verify(instance, msg, ch_bits, resp, blum_scheme, grid_scheme)
    return ok, {"msg": msg, "ch": ch_bits, "resp": resp}
