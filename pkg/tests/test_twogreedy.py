from __future__ import annotations

import math

import numpy as np
import pytest

from longcycle import twogreedy as tg
from longcycle.genmodels import DegreeClassPartition, sample_sequence_graph
from longcycle.multigraph import Multigraph
from longcycle.rng import Rng
from longcycle.weightdist import EdgeWeights, exp_trunc_mean


def _unclassified_partition(g):
    d = np.asarray(g.deg)
    return DegreeClassPartition(g.n, Y1=np.flatnonzero(d == 1), Y2=np.flatnonzero(d == 2),
                                Y=np.flatnonzero(d >= 3))


def test_empty_graph():
    g = Multigraph(4, [])
    ms, tr = tg.run(g, np.zeros(0), None, Rng(0))
    assert ms.size == 0 and tr.tau == 0 and ms.W == 0


def test_single_edge():
    g = Multigraph.from_edges(2, [(0, 1)])
    ms, _ = tg.run(g, np.array([0.7]), _unclassified_partition(g), Rng(0))
    assert ms.M.tolist() == [0] and ms.W == pytest.approx(0.7)


def test_triangle_all_seeds():
    g = Multigraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    w = np.array([0.3, 1.1, 2.5])
    for s in range(30):
        ms, _ = tg.run(g, w, _unclassified_partition(g), Rng(s))
        assert sorted(ms.M.tolist()) == [0, 1, 2]
        assert ms.W == pytest.approx(w.sum())
        comps = tg.matching_components(ms)
        assert len(comps) == 1 and comps[0].is_cycle and comps[0].length == 3


def test_census_mismatch_rejected():
    g = Multigraph.from_edges(3, [(0, 1), (1, 2)])
    p = DegreeClassPartition.all_y(3)
    with pytest.raises(tg.CensusMismatch):
        tg.run(g, np.ones(2), p, Rng(0))


def test_weights_must_cover_edges():
    g = Multigraph.from_edges(2, [(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        tg.run(g, np.ones(1), None, Rng(0))


def _state(n, edges):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    M = np.arange(len(e), dtype=np.int64)
    return tg.MatchState(n, M, M, e, np.zeros(n, np.int64), 0.0, 0.0)


def test_matching_components_examples():
    comps = tg.matching_components(_state(3, [(0, 1), (1, 2), (2, 0)]))
    assert len(comps) == 1 and comps[0].is_cycle and sorted(comps[0].vertices) == [0, 1, 2]
    comps = tg.matching_components(_state(5, [(0, 1), (1, 2), (3, 4)]))
    assert [(c.vertices, c.is_cycle) for c in comps] == [([0, 1, 2], False), ([3, 4], False)]
    assert tg.matching_components(_state(3, [])) == []
    with pytest.raises(tg.InvariantError):
        tg.matching_components(_state(4, [(0, 1), (0, 2), (0, 3)]))


def test_cleanup_drops_loops_and_duplicates():
    g = Multigraph.from_edges(3, [(0, 0), (1, 2), (2, 1)])
    assert tg.cleanup(g, np.array([0, 1, 2])).tolist() == [1]


def _allY(n, seed):
    p = DegreeClassPartition.all_y(n)
    g = sample_sequence_graph(p, 3 * n // 2, Rng(seed).child(0))
    w = EdgeWeights.exp_trunc(g.m, 20.0, Rng(seed).child(1))
    return g, w, p


def test_run_invariants_with_periodic_census():
    n = 100_000
    g, w, p = _allY(n, 1)
    ms, tr = tg.run(g, w, p, Rng(1).child(2), trace_every=500, check_every=10_000)
    # 2-matching
    assert ms.matching_degree().max() <= 2
    # W is the running sum over the added edges
    assert ms.W == pytest.approx(float(w.values[ms.steps].sum()), rel=1e-12)
    t = tr.column("t")
    assert np.all(np.diff(t) > 0)
    assert np.all(np.diff(tr.column("W")) >= 0)
    assert np.all(np.diff(tr.column("m")) <= 0)
    assert tr.completed and tr.tau == len(ms.steps)
    assert ms.size >= n - 10 * n**0.9
    assert len(tg.matching_components(ms)) <= 10 * n**0.9
    assert 0 <= tr.tau1 <= tr.tau2 <= tr.tau


def test_reproducible_given_seed():
    g, w, p = _allY(20_000, 3)
    a, ta = tg.run(g, w, p, Rng(5))
    b, tb = tg.run(g, w, p, Rng(5))
    assert np.array_equal(a.steps, b.steps) and a.W == b.W


def test_integer_weight_ties_uniform():
    # two disjoint heavy edges tie; which goes first is uniform over seeds
    g = Multigraph.from_edges(8, [(0, 1), (0, 2), (1, 3), (4, 5), (4, 6), (5, 7), (2, 3), (6, 7)])
    w = np.array([5, 1, 1, 5, 1, 1, 1, 1], dtype=np.float64)
    g2 = g.copy()
    p = DegreeClassPartition(8, Y2=np.arange(8))
    assert np.all(np.asarray(g2.deg) == 2)
    first = []
    for s in range(400):
        order = tg.max_weight_order(w, Rng(s))
        first.append(int(order[0]))
    frac = first.count(0) / len(first)
    assert set(first) == {0, 3}
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / 400)
    ms, _ = tg.run(g, w, p, Rng(0))
    assert ms.matching_degree().max() <= 2


def test_zeta_before_tau1_soft_bound():
    # soft bound on zeta before it first hits 0, for a start with dangerous vertices
    n = 100_000
    rng = Rng(17)
    hits = 0
    for i in range(10):
        p = DegreeClassPartition(n, Y1=np.arange(0, 200), Y2=np.arange(200, 2000),
                                 Y=np.arange(2000, n))
        g = sample_sequence_graph(p, (p.floor() + 2000) // 2, rng.child(i))
        w = EdgeWeights.exp_trunc(g.m, 20.0, rng.child(100 + i))
        ms, tr = tg.run(g, w, p, rng.child(200 + i), trace_every=1)
        z = tr.column("zeta")
        zeta0 = z[0]
        before = z[: tr.tau1 + 1]
        hits += int(before.max() <= max(200 * 0.01**-2 * zeta0, math.log(n) ** 2))
    assert hits >= 9


def test_v2_coverage():
    n = 100_000
    rng = Rng(23)
    y2 = int(round(n**0.95 / 5))
    ok = 0
    trials = 5
    for i in range(trials):
        p = DegreeClassPartition(n, Y1=np.arange(0, 100), Y2=np.arange(100, 100 + y2),
                                 Y=np.arange(100 + y2, n))
        g = sample_sequence_graph(p, (p.floor() + 1000) // 2, rng.child(i))
        w = EdgeWeights.exp_trunc(g.m, 20.0, rng.child(50 + i))
        nbr = set()
        for v in p.Y2.tolist():
            nbr.update(x for _, x in g.incidence(v))
        V2 = np.asarray(sorted(nbr))
        good = True
        for frac in (0.1, 0.3, 0.5, 0.7, 0.9, 1 - 1 / math.log(n)):
            t = int(frac * n)
            h = g.copy()
            tg.run(h, w, p, rng.child(100 + i), max_steps=t, copy=False)
            alive = int(np.sum(np.asarray(h.deg)[V2] > 0))
            good &= alive >= 0.5 * (1 - t / n) ** 10 * len(V2)
        ok += int(good)
    assert ok == trials


# -- one-step probe -------------------------------------------------------------------------

def test_census_properties():
    c = tg.Census(Y1=2, Y2=3, Z1=1, Y={3: 4}, Z={2: 5})
    assert c.n == 15 and c.zeta == 2 + 6 + 1
    assert c.two_m == 2 + 6 + 1 + 12 + 10


def test_expectations_all_y3():
    f = tg.one_step_expectations(tg.Census(Y={3: 1000}), 20.0)
    assert f["2m"] == pytest.approx(-2.0)
    assert f["zeta"] == pytest.approx(0.0)


def test_expectations_z2_only():
    c = tg.Census(Z={2: 1000})
    f = tg.one_step_expectations(c, 20.0)
    assert f["2m"] == pytest.approx(-2 - 2 * (2 * 1000 / c.two_m) * 2 * 1)


def test_expectations_w_with_danger():
    f = tg.one_step_expectations(tg.Census(Y1=4, Y={3: 1000}), 20.0)
    assert f["W"] == pytest.approx(exp_trunc_mean(20.0))


def test_probe_z2_only_within_3sigma():
    rows = tg.one_step_probe(tg.Census(Z={2: 1000}), 1000, 2000, Rng(2))
    assert all(r.within_3sigma for r in rows)
    assert {r.quantity for r in rows} == {"zeta", "Y", "2m", "W"}


def test_probe_rejects_bad_m():
    with pytest.raises(ValueError):
        tg.one_step_probe(tg.Census(Y={3: 10}), 14, 10, Rng(0))


def _components_oracle(ms):
    # straightforward dictionary walk, same ordering contract
    inc = {}
    for e, (a, b) in zip(ms.M.tolist(), ms.endpoints.tolist()):
        inc.setdefault(a, []).append((e, b))
        inc.setdefault(b, []).append((e, a))
    seen, out = set(), []
    for v in sorted(inc):
        if v in seen or len(inc[v]) != 1:
            continue
        verts, edges, prev, cur = [v], [], -1, v
        seen.add(v)
        while True:
            nxt = [(e, x) for e, x in inc[cur] if e != prev]
            if not nxt:
                break
            e, x = nxt[0]
            edges.append(e)
            verts.append(x)
            seen.add(x)
            prev, cur = e, x
        out.append((verts, edges, False))
    for v in sorted(inc):
        if v in seen:
            continue
        (e0, x0), _ = sorted(inc[v], key=lambda t: (t[1], t[0]))
        verts, edges, prev, cur = [v], [e0], e0, x0
        seen.add(v)
        while cur != v:
            verts.append(cur)
            seen.add(cur)
            e, x = [(e, x) for e, x in inc[cur] if e != prev][0]
            edges.append(e)
            prev, cur = e, x
        out.append((verts, edges, True))
    out.sort(key=lambda c: min(c[0]))
    return out


def test_matching_components_against_oracle():
    for s in range(30):
        n = 300 + 38 * s
        p = DegreeClassPartition.all_y(n)
        g = sample_sequence_graph(p, int(1.5 * n), Rng(500).child(s))
        w = EdgeWeights.exp_trunc(g.m, 20.0, Rng(501).child(s))
        ms, _ = tg.run(g, w, p, Rng(502).child(s))
        got = [(c.vertices, c.edges, c.is_cycle) for c in tg.matching_components(ms)]
        assert got == _components_oracle(ms)
