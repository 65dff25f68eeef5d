from __future__ import annotations

import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longcycle.multigraph import (
    Multigraph,
    VertexSet,
    connected_components,
    read_edge_list,
    write_edge_list,
)
from longcycle.rng import Rng


def test_degree_conventions():
    g = Multigraph.from_edges(5, [(0, 1), (1, 2), (2, 0), (3, 3)])
    assert g.degree(4) == 0
    assert g.degree(3) == 2
    assert [g.degree(v) for v in range(3)] == [2, 2, 2]


def test_remove_edge_cases():
    g = Multigraph.from_edges(2, [(0, 1)])
    g.remove_edge(0)
    assert g.degree(0) == g.degree(1) == 0 and g.m_live == 0

    g = Multigraph.from_edges(1, [(0, 0)])
    g.remove_edge(0)
    assert g.degree(0) == 0

    g = Multigraph.from_edges(2, [(0, 1), (0, 1)])
    g.remove_edge(0)
    assert g.degree(0) == g.degree(1) == 1
    assert g.alive[1] and not g.alive[0]


def test_remove_dead_edge_is_contract_violation():
    g = Multigraph.from_edges(2, [(0, 1)])
    g.remove_edge(0)
    with pytest.raises(AssertionError):
        g.remove_edge(0)


def test_remove_incident_edges():
    star = Multigraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    assert sorted(star.remove_incident_edges(0)) == [0, 1, 2]
    assert all(star.degree(v) == 0 for v in range(4))

    assert Multigraph(3, []).remove_incident_edges(1) == []

    g = Multigraph.from_edges(2, [(0, 0), (0, 1)])
    assert sorted(g.remove_incident_edges(0)) == [0, 1]
    assert g.degree(0) == 0 and g.degree(1) == 0


def test_components_examples():
    g = Multigraph.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    _, sizes = connected_components(g)
    assert sorted(sizes.tolist()) == [3, 3]
    _, sizes = connected_components(Multigraph(5, []))
    assert sizes.tolist() == [1] * 5
    g = Multigraph.from_edges(5, [(0, 1), (1, 2), (2, 3)])
    _, sizes = connected_components(g)
    assert sorted(sizes.tolist()) == [1, 4]


def _bfs_labels(n, edges):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    lab = [-1] * n
    c = 0
    for s in range(n):
        if lab[s] >= 0:
            continue
        lab[s] = c
        q = deque([s])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if lab[y] < 0:
                    lab[y] = c
                    q.append(y)
        c += 1
    return lab


def _same_partition(a, b):
    pairs = {}
    for x, y in zip(a, b):
        if pairs.setdefault(x, y) != y:
            return False
    return len(set(pairs.values())) == len(pairs)


def test_components_exhaustive_small():
    # Connectivity only depends on the set of distinct non-loop pairs, so every
    # support with <= 8 edges on <= 6 vertices is enumerated; each one is then
    # padded with a loop and a duplicated edge to exercise multiplicities.
    for n in range(1, 7):
        pairs = list(itertools.combinations(range(n), 2))
        for m in range(0, min(8, len(pairs)) + 1):
            for edges in itertools.combinations(pairs, m):
                extra = [(n - 1, n - 1)] + ([edges[0]] if edges else [])
                g = Multigraph.from_edges(n, list(edges) + extra)
                lab, sizes = connected_components(g)
                assert _same_partition(lab.tolist(), _bfs_labels(n, edges))
                assert int(sizes.sum()) == n


def test_components_ignore_dead_edges():
    rng = np.random.default_rng(5)
    for _ in range(2000):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(0, 9))
        edges = [tuple(sorted(rng.integers(0, n, 2).tolist())) for _ in range(m)]
        g = Multigraph.from_edges(n, edges)
        dead = [e for e in range(m) if rng.random() < 0.3]
        for e in dead:
            g.remove_edge(e)
        live = [edges[e] for e in range(m) if e not in dead]
        lab, _ = connected_components(g)
        assert _same_partition(lab.tolist(), _bfs_labels(n, live))


ops = st.lists(st.tuples(st.sampled_from(["edge", "vertex"]), st.integers(0, 40)), max_size=30)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=20), ops)
def test_degree_sum_invariant(n, raw, script):
    edges = [(u % n, v % n) for u, v in raw]
    g = Multigraph.from_edges(n, edges)
    for kind, k in script:
        if kind == "edge" and g.m:
            e = k % g.m
            if g.alive[e]:
                g.remove_edge(e)
        elif kind == "vertex":
            v = k % n
            removed = g.remove_incident_edges(v)
            assert g.degree(v) == 0
            assert all(not g.alive[e] for e in removed)
        assert int(np.sum(g.deg)) == 2 * g.m_live
        g.check()


def test_edge_ids_stable_after_deletion():
    g = Multigraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    g.remove_edge(1)
    assert g.endpoints(2) == (2, 0)
    assert g.live_edges().tolist() == [0, 2]


def test_vertexset_sampling_and_updates():
    s = VertexSet(10, [1, 3, 5])
    s.add(7)
    s.discard(3)
    s.discard(9)
    assert sorted(s.members().tolist()) == [1, 5, 7]
    assert 5 in s and 3 not in s and len(s) == 3
    rng = Rng(1)
    seen = {s.sample(rng) for _ in range(200)}
    assert seen == {1, 5, 7}


def test_edge_list_roundtrip(tmp_path):
    g = Multigraph.from_edges(4, [(0, 1), (2, 2), (1, 3), (1, 3)])
    p = tmp_path / "g.txt"
    write_edge_list(g, p)
    h = read_edge_list(p, n=4)
    assert h.edge_array().tolist() == g.edge_array().tolist()
