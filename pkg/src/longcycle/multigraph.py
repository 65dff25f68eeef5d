"""Mutable sparse multigraph with loops, tombstoned edges and O(1) incidence updates.

Storage is half-edge based: edge ``e`` owns half-edges ``2e`` (at ``ends[2e]``)
and ``2e + 1`` (at ``ends[2e + 1]``).  Each vertex keeps its live half-edges in
a fixed slab of ``adj`` and removal is a swap with the last live slot, so a
loop simply sits twice in its vertex's list and counts 2 towards the degree.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc


@njit(cache=True)
def _drop_half(adj, hpos, start, deg, ends, h):
    v = ends[h]
    last = start[v] + deg[v] - 1
    p = hpos[h]
    hl = adj[last]
    adj[p] = hl
    hpos[hl] = p
    adj[last] = h
    hpos[h] = last
    deg[v] -= 1


@njit(cache=True)
def _remove_edge(adj, hpos, start, deg, ends, alive, e):
    _drop_half(adj, hpos, start, deg, ends, 2 * e)
    _drop_half(adj, hpos, start, deg, ends, 2 * e + 1)
    alive[e] = False


@njit(cache=True)
def _remove_incident(adj, hpos, start, deg, ends, alive, v, out):
    k = 0
    while deg[v] > 0:
        h = adj[start[v] + deg[v] - 1]
        e = h >> 1
        _remove_edge(adj, hpos, start, deg, ends, alive, e)
        out[k] = e
        k += 1
    return k


def _build_incidence(n: int, ends: np.ndarray):
    counts = np.bincount(ends, minlength=n).astype(np.int64)
    start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    itype = np.int32 if len(ends) < 2**31 - 1 else np.int64
    adj = np.argsort(ends, kind="stable").astype(itype)
    hpos = np.empty(len(ends), dtype=itype)
    hpos[adj] = np.arange(len(ends), dtype=itype)
    return start, adj, hpos, counts


class Multigraph:
    """Multigraph on vertices ``0..n-1`` with stable edge ids.

    ``ends`` is the flat endpoint sequence ``(u0, v0, u1, v1, ...)``, which is
    also the point sequence of the pairing model.
    """

    def __init__(self, n: int, ends: Sequence[int] | np.ndarray):
        ends = np.asarray(ends)
        if ends.ndim != 1 or len(ends) % 2:
            raise ValueError("ends must be a flat sequence of even length")
        if n < 0:
            raise ValueError("n must be nonnegative")
        if len(ends) and (ends.min() < 0 or ends.max() >= n):
            raise ValueError("endpoint out of range")
        itype = np.int32 if n < 2**31 - 1 else np.int64
        self.n = int(n)
        self.ends = ends.astype(itype, copy=True)
        self.alive = np.ones(len(ends) // 2, dtype=np.bool_)
        self.start, self.adj, self.hpos, deg = _build_incidence(self.n, self.ends)
        self.deg = deg.astype(itype)
        self.m_live = len(ends) // 2

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Multigraph":
        flat = [x for e in edges for x in e]
        return cls(n, np.asarray(flat, dtype=np.int64))

    # -- basic views -----------------------------------------------------
    @property
    def m(self) -> int:
        """Total number of edge ids ever created (live or dead)."""
        return len(self.alive)

    @property
    def eu(self) -> np.ndarray:
        return self.ends[0::2]

    @property
    def ev(self) -> np.ndarray:
        return self.ends[1::2]

    def endpoints(self, e: int) -> tuple[int, int]:
        return int(self.ends[2 * e]), int(self.ends[2 * e + 1])

    def degree(self, v: int) -> int:
        return int(self.deg[v])

    def incidence(self, v: int) -> list[tuple[int, int]]:
        """Live ``(edge_id, other_endpoint)`` pairs at ``v``; a loop appears twice."""
        s = self.start[v]
        hs = self.adj[s : s + self.deg[v]]
        return [(int(h >> 1), int(self.ends[h ^ 1])) for h in hs]

    def live_edges(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def edge_array(self, live_only: bool = True) -> np.ndarray:
        """``(k, 2)`` endpoint array, live edges only by default."""
        pairs = self.ends.reshape(-1, 2)
        return pairs[self.alive] if live_only else pairs

    # -- mutation ----------------------------------------------------------
    def remove_edge(self, e: int) -> None:
        assert self.alive[e], f"edge {e} already removed"
        _remove_edge(self.adj, self.hpos, self.start, self.deg, self.ends, self.alive, e)
        self.m_live -= 1

    def remove_incident_edges(self, v: int) -> list[int]:
        out = np.empty(self.deg[v], dtype=np.int64)
        k = _remove_incident(
            self.adj, self.hpos, self.start, self.deg, self.ends, self.alive, v, out
        )
        self.m_live -= k
        return [int(e) for e in out[:k]]

    def copy(self) -> "Multigraph":
        g = object.__new__(Multigraph)
        g.n = self.n
        g.ends = self.ends.copy()
        g.alive = self.alive.copy()
        g.start = self.start.copy()
        g.adj = self.adj.copy()
        g.hpos = self.hpos.copy()
        g.deg = self.deg.copy()
        g.m_live = self.m_live
        return g

    def compact(self) -> "Multigraph":
        """A fresh graph holding only the live edges (edge ids renumbered)."""
        return Multigraph(self.n, self.edge_array().ravel())

    def check(self) -> None:
        """Assert the degree/incidence invariants (debug aid, O(n + m))."""
        live = self.edge_array()
        expect = np.bincount(live.ravel(), minlength=self.n)
        assert np.array_equal(expect, self.deg), "degree mismatch"
        assert int(self.deg.sum()) == 2 * self.m_live == 2 * len(live)
        for v in range(self.n):
            s = self.start[v]
            hs = self.adj[s : s + self.deg[v]]
            assert np.all(self.ends[hs] == v)
            assert np.all(self.alive[hs >> 1])
            assert np.all(self.hpos[hs] == np.arange(s, s + self.deg[v]))

    def __repr__(self) -> str:
        return f"Multigraph(n={self.n}, live_edges={self.m_live})"


class VertexSet:
    """Subset of ``0..n-1`` with O(1) insert, delete and uniform sampling."""

    def __init__(self, n: int, members: Iterable[int] = ()):
        self.dense = np.empty(n, dtype=np.int64)
        self.pos = np.full(n, -1, dtype=np.int64)
        self.size = 0
        for v in members:
            self.add(v)

    def __contains__(self, v: int) -> bool:
        return self.pos[v] >= 0

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        return iter(int(v) for v in self.dense[: self.size])

    def add(self, v: int) -> None:
        if self.pos[v] >= 0:
            return
        self.dense[self.size] = v
        self.pos[v] = self.size
        self.size += 1

    def discard(self, v: int) -> None:
        p = self.pos[v]
        if p < 0:
            return
        last = self.dense[self.size - 1]
        self.dense[p] = last
        self.pos[last] = p
        self.pos[v] = -1
        self.size -= 1

    def sample(self, rng) -> int:
        if self.size == 0:
            raise IndexError("sample from empty VertexSet")
        return int(self.dense[rng.integers(self.size)])

    def members(self) -> np.ndarray:
        return np.sort(self.dense[: self.size])


def connected_components(g: Multigraph) -> tuple[np.ndarray, np.ndarray]:
    """Component label per vertex and component sizes, over live edges only."""
    if g.n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    live = g.edge_array()
    data = np.ones(len(live), dtype=np.int8)
    a = coo_matrix((data, (live[:, 0], live[:, 1])), shape=(g.n, g.n)).tocsr()
    k, labels = _cc(a, directed=False)
    sizes = np.bincount(labels, minlength=k)
    return labels.astype(np.int64), sizes.astype(np.int64)


def write_edge_list(g: Multigraph, path) -> None:
    np.savetxt(path, g.edge_array(), fmt="%d")


def read_edge_list(path, n: int | None = None) -> Multigraph:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                u, v = line.split()[:2]
                rows.append((int(u), int(v)))
    if n is None:
        n = 1 + max((max(r) for r in rows), default=-1)
    return Multigraph.from_edges(n, rows)
