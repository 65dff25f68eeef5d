"""Giant component, 2-core, weighted kernel and cycle expansion."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .multigraph import Multigraph, connected_components


def giant_component(g: Multigraph) -> np.ndarray:
    """Vertices of a largest component; ties go to the component with the smallest vertex."""
    if g.n == 0:
        return np.zeros(0, dtype=np.int64)
    labels, sizes = connected_components(g)
    _, first = np.unique(labels, return_index=True)  # first vertex of each label
    best = sizes.max()
    cand = np.flatnonzero(sizes == best)
    lab = cand[np.argmin(first[cand])]
    return np.flatnonzero(labels == lab)


@njit(cache=True)
def _peel(n, ends, adj, start, deg, alive, inside):
    cdeg = np.zeros(n, np.int64)
    for v in range(n):
        if not inside[v]:
            continue
        s = start[v]
        for k in range(deg[v]):
            h = adj[s + k]
            if inside[ends[h ^ 1]]:
                cdeg[v] += 1
    incore = inside.copy()
    stack = np.empty(n, np.int64)
    top = 0
    for v in range(n):
        if incore[v] and cdeg[v] <= 1:
            stack[top] = v
            top += 1
            incore[v] = False
    while top > 0:
        top -= 1
        v = stack[top]
        s = start[v]
        for k in range(deg[v]):
            h = adj[s + k]
            x = ends[h ^ 1]
            if incore[x] and x != v:
                cdeg[x] -= 1
                if cdeg[x] <= 1:
                    incore[x] = False
                    stack[top] = x
                    top += 1
    for v in range(n):
        if not incore[v]:
            cdeg[v] = 0
    m = len(alive)
    emask = np.zeros(m, np.bool_)
    for e in range(m):
        if alive[e] and incore[ends[2 * e]] and incore[ends[2 * e + 1]]:
            emask[e] = True
    return incore, cdeg, emask


@dataclass
class Core2:
    """2-core as masks over the parent graph (whose edge ids it keeps)."""

    parent: Multigraph
    vmask: np.ndarray
    emask: np.ndarray
    core_deg: np.ndarray
    n2: int

    @property
    def n_vertices(self) -> int:
        return int(self.vmask.sum())

    @property
    def n_edges(self) -> int:
        return int(self.emask.sum())

    @property
    def empty(self) -> bool:
        return self.n_vertices == 0

    def vertices(self) -> np.ndarray:
        return np.flatnonzero(self.vmask)

    def degree_census(self) -> dict[int, int]:
        vals, cnt = np.unique(self.core_deg[self.vmask], return_counts=True)
        return {int(k): int(c) for k, c in zip(vals, cnt)}

    def to_multigraph(self) -> Multigraph:
        """Copy of the parent with every non-core edge tombstoned."""
        h = self.parent.copy()
        for e in np.flatnonzero(h.alive & ~self.emask):
            h.remove_edge(int(e))
        return h


def two_core(g: Multigraph, within=None) -> Core2:
    """Peel vertices of degree <= 1 (restricted to ``within``) until none remain."""
    inside = np.zeros(g.n, dtype=np.bool_)
    if within is None:
        inside[:] = True
    else:
        inside[np.asarray(within, dtype=np.int64)] = True
    vmask, cdeg, emask = _peel(g.n, g.ends, g.adj, g.start, g.deg, g.alive, inside)
    n2 = int(np.sum(vmask & (cdeg == 2)))
    return Core2(g, vmask, emask, cdeg, n2)


@njit(cache=True)
def _contract(n, ends, adj, start, deg, emask, core_deg, branch):
    m = len(emask)
    visited = np.zeros(m, np.bool_)
    ncore_e = 0
    for e in range(m):
        if emask[e]:
            ncore_e += 1
    # upper bounds: at most ncore_e kernel edges, path storage <= 2*ncore_e
    ku = np.empty(ncore_e, np.int64)
    kv = np.empty(ncore_e, np.int64)
    kw = np.empty(ncore_e, np.int64)
    pv = np.empty(2 * ncore_e + 1, np.int64)
    pvo = np.zeros(ncore_e + 1, np.int64)
    pe = np.empty(ncore_e, np.int64)
    peo = np.zeros(ncore_e + 1, np.int64)
    k = 0
    nv = 0
    ne = 0
    for b in range(n):
        if not branch[b]:
            continue
        s = start[b]
        for i in range(deg[b]):
            h = adj[s + i]
            e = h >> 1
            if not emask[e] or visited[e]:
                continue
            visited[e] = True
            pv[nv] = b
            nv += 1
            pe[ne] = e
            ne += 1
            cur = ends[h ^ 1]
            length = 1
            while not branch[cur]:
                pv[nv] = cur
                nv += 1
                # the other core edge at a degree-2 vertex
                nxt = -1
                sc = start[cur]
                for j in range(deg[cur]):
                    h2 = adj[sc + j]
                    e2 = h2 >> 1
                    if emask[e2] and not visited[e2]:
                        nxt = h2
                        break
                if nxt < 0:
                    break
                e2 = nxt >> 1
                visited[e2] = True
                pe[ne] = e2
                ne += 1
                cur = ends[nxt ^ 1]
                length += 1
            pv[nv] = cur
            nv += 1
            ku[k] = b
            kv[k] = cur
            kw[k] = length
            k += 1
            pvo[k] = nv
            peo[k] = ne
    return ku[:k], kv[:k], kw[:k], pv[:nv], pvo[: k + 1], pe[:ne], peo[: k + 1], visited


@dataclass
class WeightedKernel:
    """Kernel multigraph plus edge weights and the map back to 2-core paths.

    Kernel vertex ``i`` is parent vertex ``vertex_map[i]``.  Path ``e`` runs
    over parent vertices ``path_vertices[pv_off[e]:pv_off[e+1]]`` and parent
    edges ``path_edges[pe_off[e]:pe_off[e+1]]``.
    """

    kernel: Multigraph
    w: np.ndarray
    vertex_map: np.ndarray
    path_vertices: np.ndarray
    pv_off: np.ndarray
    path_edges: np.ndarray
    pe_off: np.ndarray
    n2: int
    bare_cycle: bool = False
    cycle_edges: np.ndarray | None = None  # parent edge ids when bare_cycle

    @property
    def n_K(self) -> int:
        return self.kernel.n

    @property
    def e_K(self) -> int:
        return self.kernel.m

    def path_map(self, e: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.path_vertices[self.pv_off[e] : self.pv_off[e + 1]])

    def path_edge_ids(self, e: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.path_edges[self.pe_off[e] : self.pe_off[e + 1]])

    def check(self, core: Core2 | None = None) -> None:
        """Assert the kernel identities."""
        if self.e_K == 0:
            return
        assert int(self.kernel.deg.min()) >= 3, "kernel vertex of degree < 3"
        assert int(np.sum(self.w - 1)) == self.n2, "weights do not account for n2"
        assert np.all(np.diff(self.pe_off) == self.w)
        ku, kv = self.kernel.eu, self.kernel.ev
        first = self.path_vertices[self.pv_off[:-1]]
        last = self.path_vertices[self.pv_off[1:] - 1]
        assert np.all(first == self.vertex_map[ku]) and np.all(last == self.vertex_map[kv])
        if core is not None:
            for e in range(self.e_K):
                inner = self.path_vertices[self.pv_off[e] + 1 : self.pv_off[e + 1] - 1]
                assert np.all(core.core_deg[inner] == 2)

    def dump(self, path) -> None:
        s = kernel_stats(self)
        with open(path, "w") as fh:
            fh.write(f"# n_K={s.n_K} e_K={s.e_K} n2={s.n2} loops={s.loops} "
                     f"multi_edges={s.multi_edges} weight_sum={s.weight_sum}\n")
            for e in range(self.e_K):
                u, v = self.kernel.endpoints(e)
                fh.write(f"{u} {v} {int(self.w[e])}\n")


def _bare_cycle_edges(core: Core2) -> np.ndarray:
    g = core.parent
    v0 = int(core.vertices()[0])
    out = []
    prev_e = -1
    cur = v0
    while True:
        nxt = None
        for e, x in g.incidence(cur):
            if core.emask[e] and e != prev_e:
                nxt = (e, x)
                break
        if nxt is None:  # a single loop
            break
        e, x = nxt
        out.append(e)
        prev_e = e
        cur = x
        if cur == v0:
            break
    if not out:  # lone loop
        out = [int(np.flatnonzero(core.emask)[0])]
    return np.asarray(out, dtype=np.int64)


def contract(core: Core2) -> WeightedKernel:
    """Contract maximal degree-2 paths of a connected 2-core into weighted kernel edges."""
    g = core.parent
    branch = core.vmask & (core.core_deg >= 3)
    if not branch.any():
        cyc = _bare_cycle_edges(core) if not core.empty else np.zeros(0, np.int64)
        empty = Multigraph(0, np.zeros(0, np.int64))
        z = np.zeros(0, np.int64)
        return WeightedKernel(empty, z, z, z, np.zeros(1, np.int64), z,
                              np.zeros(1, np.int64), core.n2, bare_cycle=not core.empty,
                              cycle_edges=cyc)
    ku, kv, kw, pv, pvo, pe, peo, visited = _contract(
        g.n, g.ends, g.adj, g.start, g.deg, core.emask, core.core_deg, branch
    )
    if np.any(core.emask & ~visited):
        raise ValueError("2-core is not connected: a component without branch vertices remains")
    vertex_map = np.flatnonzero(branch)
    relabel = np.full(g.n, -1, dtype=np.int64)
    relabel[vertex_map] = np.arange(len(vertex_map))
    ends = np.empty(2 * len(ku), dtype=np.int64)
    ends[0::2] = relabel[ku]
    ends[1::2] = relabel[kv]
    kernel = Multigraph(len(vertex_map), ends)
    return WeightedKernel(kernel, kw, vertex_map, pv, pvo, pe, peo, core.n2)


@dataclass
class KernelStats:
    n_K: int
    e_K: int
    n2: int
    loops: int
    multi_edges: int  # vertex pairs joined by >= 2 parallel non-loop edges
    max_multiplicity: int | None  # over non-loop pairs; None without such edges
    weight_sum: int
    max_loop_multiplicity: int = 0


def kernel_stats(k: WeightedKernel) -> KernelStats:
    pairs = k.kernel.edge_array(live_only=False)
    if len(pairs):
        lo = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
        hi = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
        loop = lo == hi
        keys_nl = lo[~loop] * k.n_K + hi[~loop]
        _, mult = np.unique(keys_nl, return_counts=True)
        _, lmult = np.unique(lo[loop], return_counts=True)
    else:
        loop = np.zeros(0, bool)
        mult = lmult = np.zeros(0, np.int64)
    return KernelStats(
        n_K=k.n_K,
        e_K=k.e_K,
        n2=k.n2,
        loops=int(loop.sum()),
        multi_edges=int(np.sum(mult >= 2)),
        max_multiplicity=int(mult.max()) if len(mult) else None,
        weight_sum=int(k.w.sum()),
        max_loop_multiplicity=int(lmult.max()) if len(lmult) else 0,
    )


class UndefinedBoundError(ValueError):
    pass


def luczak_bound(s: KernelStats) -> Fraction:
    """(1 + n2/e_K) * n_K as an exact rational."""
    if s.e_K <= 0:
        raise UndefinedBoundError("empty kernel: bound undefined")
    return (1 + Fraction(s.n2, s.e_K)) * s.n_K


@dataclass
class ExpandedCycle:
    vertices: list[int]  # parent vertex ids, closing vertex not repeated
    edges: list[int]  # parent edge ids in traversal order

    @property
    def length(self) -> int:
        return len(self.edges)


def walk_vertices(g: Multigraph, cycle: list[int]) -> list[int]:
    """Vertex sequence ``v0..v_{k-1}`` of a closed walk given by edge ids (``v0`` = start)."""
    from .cyclebuilder import verify_cycle  # local import: cyclebuilder imports kernelizer

    verify_cycle(g, cycle)
    if len(cycle) == 1:
        return [g.endpoints(cycle[0])[0]]
    a, b = g.endpoints(cycle[0])
    c, d = g.endpoints(cycle[1])
    start = a if b in (c, d) else b
    seq = [start]
    cur = start
    for e in cycle[:-1]:
        x, y = g.endpoints(e)
        cur = y if x == cur else x
        seq.append(cur)
    return seq


def expand_cycle(k: WeightedKernel, kernel_cycle: list[int]) -> ExpandedCycle:
    """Replace each kernel edge of a kernel cycle by its oriented 2-core path."""
    kernel_cycle = [int(e) for e in kernel_cycle]
    seq = walk_vertices(k.kernel, kernel_cycle)
    verts: list[int] = []
    edges: list[int] = []
    for i, e in enumerate(kernel_cycle):
        a = seq[i]
        pv = list(k.path_map(e))
        pe = list(k.path_edge_ids(e))
        if pv[0] != k.vertex_map[a]:
            pv.reverse()
            pe.reverse()
        assert pv[0] == k.vertex_map[a], "orientation mismatch"
        verts.extend(pv[:-1])
        edges.extend(pe)
    assert len(set(verts)) == len(verts), "expanded cycle repeats a vertex"
    assert len(edges) == int(sum(k.w[e] for e in kernel_cycle))
    return ExpandedCycle(verts, edges)
