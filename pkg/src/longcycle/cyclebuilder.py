"""From a 2-Greedy matching to one long cycle.

Pipeline: withhold a few random edges as a reserve, run 2-Greedy on the rest,
cut the matching into paths and fixed-length segments, join segment ends
through reserve edges in an auxiliary digraph, look for a Hamilton cycle
there, and splice the segments along it.  ``verify_cycle`` re-checks any edge
sequence against raw adjacency and shares no state with the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .genmodels import DegreeClassPartition
from .multigraph import Multigraph
from .rng import Rng


class CycleVerificationError(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"index {index}: {reason}")
        self.index = index
        self.reason = reason


def verify_cycle(g: Multigraph, cycle) -> int:
    """Check that the edge ids in ``cycle`` form a simple closed walk; return its length.

    Only ``g.ends`` and ``g.alive`` are read.  A loop is a 1-cycle and two
    parallel edges form a 2-cycle.
    """
    cyc = [int(e) for e in cycle]
    k = len(cyc)
    if k == 0:
        raise CycleVerificationError(0, "empty sequence")
    for i, e in enumerate(cyc):
        if e < 0 or e >= g.m:
            raise CycleVerificationError(i, f"edge {e} does not exist")
        if not g.alive[e]:
            raise CycleVerificationError(i, f"edge {e} is deleted")
    if len(set(cyc)) != k:
        seen = set()
        for i, e in enumerate(cyc):
            if e in seen:
                raise CycleVerificationError(i, f"edge {e} repeats")
            seen.add(e)
    ends = [(int(g.ends[2 * e]), int(g.ends[2 * e + 1])) for e in cyc]
    if k == 1:
        a, b = ends[0]
        if a != b:
            raise CycleVerificationError(0, "single edge is not a loop")
        return 1
    # start at the endpoint of the first edge not shared with the second
    a, b = ends[0]
    if b in ends[1]:
        start = a
    elif a in ends[1]:
        start = b
    else:
        raise CycleVerificationError(1, "edges 0 and 1 share no vertex")
    cur = start
    seen_v = {start}
    for i, (x, y) in enumerate(ends):
        if x == cur:
            nxt = y
        elif y == cur:
            nxt = x
        else:
            raise CycleVerificationError(i, f"edge {cyc[i]} does not touch walk vertex {cur}")
        if i == k - 1:
            if nxt != start:
                raise CycleVerificationError(i, "walk does not close")
            break
        if nxt in seen_v:
            raise CycleVerificationError(i, f"vertex {nxt} repeats")
        seen_v.add(nxt)
        cur = nxt
    return k


# -- reserve split -----------------------------------------------------------

@dataclass
class ReserveSplit:
    reserve: np.ndarray  # reserve edge ids (ids of the input graph)
    main: Multigraph  # input graph with the reserve edges deleted; ids kept
    partition: DegreeClassPartition
    reserve_points: int
    main_points: int

    @property
    def Y0(self) -> np.ndarray:
        lab = self.partition.labels()
        return np.flatnonzero((lab == -1) & (np.asarray(self.main.deg) == 0) & (self._orig_deg > 0))

    _orig_deg: np.ndarray = field(default=None, repr=False)


def reserve_size(n: int, exponent: float | None) -> int:
    return 0 if exponent is None else int(math.ceil(n ** exponent))


def split_reserve(g: Multigraph, exponent: float | None = 0.9, rng: Rng | None = None,
                  n_ref: int | None = None, count: int | None = None) -> ReserveSplit:
    """Withhold ceil(n_ref^exponent) uniformly random live edges.

    Shuffling the point sequence and taking its first 2r points is the same as
    taking r uniformly random edges, which is what is done here.  Residual
    classes follow main degree: 1 -> Y1, 2 -> Y2, >= 3 -> Y; vertices left with
    main degree 0 are unclassified (Y0).  ``count`` overrides the exponent.
    """
    live = g.live_edges()
    n_ref = g.n if n_ref is None else n_ref
    r = reserve_size(n_ref, exponent) if count is None else int(count)
    if r < 0 or r >= len(live) and len(live) > 0:
        raise ValueError(f"reserve of {r} edges leaves no main graph ({len(live)} edges)")
    rng = rng if rng is not None else Rng(0)
    chosen = np.sort(live[rng.permutation(len(live))[:r]]) if r else np.zeros(0, np.int64)
    main = g.copy()
    for e in chosen.tolist():
        main.remove_edge(e)
    d = np.asarray(main.deg)
    p = DegreeClassPartition(
        g.n, Y1=np.flatnonzero(d == 1), Y2=np.flatnonzero(d == 2), Y=np.flatnonzero(d >= 3)
    )
    return ReserveSplit(chosen.astype(np.int64), main, p, 2 * r, 2 * main.m_live,
                        np.asarray(g.deg).copy())


# -- paths and segments -------------------------------------------------------

@dataclass
class Path:
    vertices: np.ndarray
    edges: np.ndarray  # edges[i] joins vertices[i], vertices[i+1]

    @property
    def length(self) -> int:
        return len(self.edges)


@dataclass
class PathCover:
    paths: list[Path]

    def __len__(self) -> int:
        return len(self.paths)

    def weight(self, w: np.ndarray) -> float:
        return float(sum(w[p.edges].sum() for p in self.paths))

    def check(self, g: Multigraph) -> None:
        seen: set[int] = set()
        for p in self.paths:
            vs = p.vertices.tolist()
            assert len(vs) == len(p.edges) + 1, "path shape"
            assert not seen.intersection(vs), "paths share a vertex"
            assert len(set(vs)) == len(vs), "path repeats a vertex"
            seen.update(vs)
            for i, e in enumerate(p.edges.tolist()):
                assert {vs[i], vs[i + 1]} == set(g.endpoints(e)), f"edge {e} misplaced"


def matching_to_paths(components, w: np.ndarray | None = None) -> PathCover:
    """Open every cycle at its lightest edge (first one on ties); paths pass through."""
    out = []
    for c in components:
        vs = list(c.vertices)
        es = list(c.edges)
        if c.is_cycle:
            ws = [1.0] * len(es) if w is None else [float(w[e]) for e in es]
            j = int(np.argmin(ws))
            # drop es[j] joining vs[j] and vs[j+1]: start after it, end before it
            k = len(vs)
            vs = [vs[(j + 1 + i) % k] for i in range(k)]
            es = [es[(j + 1 + i) % k] for i in range(k - 1)]
        out.append(Path(np.asarray(vs, np.int64), np.asarray(es, np.int64)))
    return PathCover(out)


@dataclass
class SegmentReport:
    paths_in: int
    segments: int
    short_paths: int  # shorter than seg_len, dropped whole
    leftover_edges: int  # includes the edges joining consecutive segments
    leftover_weight: float
    v2_discarded: int
    v2_discarded_weight: float
    input_weight: float

    @property
    def discarded_weight(self) -> float:
        return self.leftover_weight + self.v2_discarded_weight


def segment_paths(pc: PathCover, seg_len: int, v2=None, v2_window: int = 0,
                  w: np.ndarray | None = None, merge_leftover: bool = False
                  ) -> tuple[PathCover, SegmentReport]:
    """Cut each path into vertex-disjoint pieces of ``seg_len`` edges.

    The piece after the last full segment is dropped, as are the edges joining
    consecutive segments; with ``merge_leftover`` the tail is appended to the
    last segment instead.  A segment is discarded if some run of ``v2_window``
    consecutive vertices misses ``v2`` (``v2_window = 0`` disables the rule).
    """
    if seg_len < 2:
        raise ValueError("seg_len must be at least 2")
    wt = (lambda es: float(len(es))) if w is None else (lambda es: float(w[es].sum()))
    in_v2 = None
    if v2 is not None and v2_window > 0:
        n = 1 + max((int(p.vertices.max()) for p in pc.paths if len(p.vertices)), default=0)
        in_v2 = np.zeros(max(n, int(np.max(v2, initial=-1)) + 1), bool)
        in_v2[np.asarray(v2, np.int64)] = True
    segs: list[Path] = []
    short = left_e = v2d = 0
    left_w = v2d_w = in_w = 0.0
    for p in pc.paths:
        L = p.length
        in_w += wt(p.edges)
        if L < seg_len:
            short += 1
            left_e += L
            left_w += wt(p.edges)
            continue
        # segment j covers vertices [j*(s+1), j*(s+1)+s]; edge j*(s+1)+s joins to the next
        step = seg_len + 1
        k = (L + 1) // step
        kept = []
        for j in range(k):
            a = j * step
            b = a + seg_len
            if merge_leftover and j == k - 1:
                b = L
            kept.append((a, b))
        used = set()
        for a, b in kept:
            used.update(range(a, b))
        lost = [i for i in range(L) if i not in used]
        left_e += len(lost)
        left_w += wt(p.edges[lost]) if lost else 0.0
        for a, b in kept:
            seg = Path(p.vertices[a:b + 1].copy(), p.edges[a:b].copy())
            if in_v2 is not None and _has_v2_gap(seg.vertices, in_v2, v2_window):
                v2d += 1
                v2d_w += wt(seg.edges)
                continue
            segs.append(seg)
    rep = SegmentReport(len(pc.paths), len(segs), short, left_e, left_w, v2d, v2d_w, in_w)
    return PathCover(segs), rep


def _has_v2_gap(vertices: np.ndarray, in_v2: np.ndarray, window: int) -> bool:
    hit = in_v2[vertices]
    run = 0
    for h in hit:
        run = 0 if h else run + 1
        if run >= window:
            return True
    return False


# -- overlay digraph ---------------------------------------------------------

@dataclass
class Arc:
    tail: int  # segment index
    head: int
    witness: int  # reserve edge id
    tail_vertex: int  # witness endpoint in the tail segment
    head_vertex: int
    tail_pos: int  # vertex position inside the tail segment
    head_pos: int
    cost: float  # weight trimmed off both segments minus the witness weight


@dataclass
class OverlayDigraph:
    k: int
    arcs: dict[tuple[int, int], Arc]
    window: int
    value: np.ndarray  # segment weights

    def __post_init__(self):
        self.out_adj: list[list[int]] = [[] for _ in range(self.k)]
        self.in_adj: list[list[int]] = [[] for _ in range(self.k)]
        for (a, b) in sorted(self.arcs):
            self.out_adj[a].append(b)
            self.in_adj[b].append(a)

    @classmethod
    def from_arcs(cls, k: int, pairs, cost=None) -> "OverlayDigraph":
        """Bare digraph (no segments behind it); witnesses are arc indices."""
        arcs = {}
        for i, (a, b) in enumerate(pairs):
            if a == b:
                raise ValueError("self-arcs are not allowed")
            c = 0.0 if cost is None else float(cost[i])
            arcs[(int(a), int(b))] = Arc(int(a), int(b), i, -1, -1, -1, -1, c)
        return cls(k, arcs, 0, np.zeros(k))

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def has(self, a: int, b: int) -> bool:
        return (a, b) in self.arcs

    def cost(self, a: int, b: int) -> float:
        return self.arcs[(a, b)].cost

    def check(self) -> None:
        wit = [a.witness for a in self.arcs.values()]
        assert len(set(wit)) == len(wit), "witness reused"
        assert all(a != b for a, b in self.arcs), "self-arc"


def _window_ranks(seg: Path, in_v2: np.ndarray | None, window: int):
    """Positions of the first/last ``window`` v2 vertices within the head/tail halves."""
    nv = len(seg.vertices)
    half = nv // 2
    pos = np.arange(nv)
    cand = pos if in_v2 is None else pos[in_v2[seg.vertices]]
    head = cand[cand < half][:window]
    tail = cand[cand >= nv - half][::-1][:window]
    return head, tail


def build_overlay(segs: PathCover, g: Multigraph, reserve: np.ndarray, endpoint_window: int,
                  v2=None, w: np.ndarray | None = None) -> OverlayDigraph:
    """Arc P -> Q when a reserve edge joins a tail-window vertex of P to a head-window vertex of Q.

    Windows hold the first (last) ``endpoint_window`` v2 vertices of the head
    (tail) half of a segment, so they never overlap.  Each arc keeps the
    candidate witness that loses the least weight (ties by edge id); a reserve
    edge can only ever witness one arc.
    """
    k = len(segs)
    n = g.n
    in_v2 = None
    if v2 is not None:
        in_v2 = np.zeros(n, bool)
        in_v2[np.asarray(v2, np.int64)] = True
    seg_of = np.full(n, -1, np.int64)
    pos_of = np.full(n, -1, np.int64)
    is_head = np.zeros(n, bool)
    is_tail = np.zeros(n, bool)
    head_trim = np.zeros(n)  # weight before the vertex in its segment
    tail_trim = np.zeros(n)  # weight after it
    value = np.zeros(k)
    for i, s in enumerate(segs.paths):
        ew = np.ones(len(s.edges)) if w is None else w[s.edges].astype(float)
        value[i] = ew.sum()
        pre = np.concatenate(([0.0], np.cumsum(ew)))
        seg_of[s.vertices] = i
        pos_of[s.vertices] = np.arange(len(s.vertices))
        h, t = _window_ranks(s, in_v2, endpoint_window)
        is_head[s.vertices[h]] = True
        is_tail[s.vertices[t]] = True
        head_trim[s.vertices] = pre
        tail_trim[s.vertices] = pre[-1] - pre
    cands = []
    for e in np.asarray(reserve, np.int64).tolist():
        x, y = g.endpoints(e)
        if x == y:
            continue
        we = 1.0 if w is None else float(w[e])
        for a, b in ((x, y), (y, x)):
            if is_tail[a] and is_head[b] and seg_of[a] != seg_of[b]:
                c = tail_trim[a] + head_trim[b] - we
                cands.append((c, e, a, b))
    cands.sort(key=lambda t: (t[0], t[1]))
    arcs: dict[tuple[int, int], Arc] = {}
    used: set[int] = set()
    for c, e, a, b in cands:
        key = (int(seg_of[a]), int(seg_of[b]))
        if key in arcs or e in used:
            continue
        used.add(e)
        arcs[key] = Arc(key[0], key[1], e, a, b, int(pos_of[a]), int(pos_of[b]), float(c))
    return OverlayDigraph(k, arcs, endpoint_window, value)


# -- Hamilton cycle heuristic --------------------------------------------------

@dataclass
class HamResult:
    cycle: list[int]
    hamiltonian: bool
    steps: int
    restarts: int

    @property
    def length(self) -> int:
        return len(self.cycle)


def hamilton_heuristic(d: OverlayDigraph, budget: int = 10**6, rng: Rng | None = None,
                       restart_every: int | None = None) -> HamResult:
    """Randomised extension-rotation search for a directed Hamilton cycle.

    The path grows at its tail through out-arcs and at its head through
    in-arcs.  When both ends are stuck a rotation is tried: for an arc from
    the tail v_k back to v_i and an arc v_{i-1} -> v_j (i < j <= k) the path
    v_0..v_{i-1} v_j..v_k v_i..v_{j-1} has the same vertex set and a new tail.
    A full path whose tail reaches the head closes the cycle; a shorter closed
    path is opened by absorbing an outside node.  The longest closed cycle
    seen is kept.  Restarts use fresh random roots.
    """
    rng = rng if rng is not None else Rng(0)
    k = d.k
    if k == 0:
        return HamResult([], False, 0, 0)
    out_adj, in_adj = d.out_adj, d.in_adj
    restart_every = restart_every or max(50 * k, 1000)
    best: list[int] = []
    steps = 0
    restarts = 0
    gen = rng.gen
    while steps < budget:
        restarts += 1
        root = int(gen.integers(k))
        path = [root]
        where = {root: 0}
        since = 0
        while steps < budget and since < restart_every:
            steps += 1
            since += 1
            tail, head = path[-1], path[0]
            if len(path) > 1 and d.has(tail, head) and len(path) > len(best):
                best = list(path)
                if len(path) == k:
                    return HamResult(best, True, steps, restarts)
            outs = [x for x in out_adj[tail] if x not in where]
            if outs:
                x = outs[int(gen.integers(len(outs)))]
                where[x] = len(path)
                path.append(x)
                continue
            ins = [x for x in in_adj[head] if x not in where]
            if ins:
                x = ins[int(gen.integers(len(ins)))]
                path.insert(0, x)
                where = {v: i for i, v in enumerate(path)}
                continue
            if len(path) > 1 and d.has(tail, head):
                # closed but not spanning: open at a cycle node with an arc out of the cycle
                opened = _open_cycle(path, out_adj, where, gen)
                if opened is not None:
                    path = opened
                    where = {v: i for i, v in enumerate(path)}
                    continue
            # rotation at the tail
            back = [where[x] for x in out_adj[tail] if x in where and 0 < where[x] < len(path) - 1]
            if not back:
                continue
            i = back[int(gen.integers(len(back)))]
            # a cycle v_i..v_k closes here; record it
            if len(path) - i > len(best):
                best = path[i:]
            prev = path[i - 1]
            js = [where[x] for x in out_adj[prev] if x in where and where[x] > i]
            if not js:
                continue
            j = js[int(gen.integers(len(js)))]
            path = path[:i] + path[j:] + path[i:j]
            where = {v: t for t, v in enumerate(path)}
    return HamResult(best, len(best) == k and k > 1, steps, restarts)


def _open_cycle(path, out_adj, where, gen):
    opts = [(i, x) for i, v in enumerate(path) for x in out_adj[v] if x not in where]
    if not opts:
        return None
    i, x = opts[int(gen.integers(len(opts)))]
    # cycle order ending at path[i], then x
    return path[i + 1:] + path[:i + 1] + [x]


def cycle_value(d: OverlayDigraph, cycle: list[int]) -> float:
    """Segment weight kept by splicing along ``cycle`` (witness weights included)."""
    if len(cycle) < 2:
        return 0.0
    tot = float(sum(d.value[c] for c in cycle))
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        tot -= d.cost(a, b)
    return tot


def improve_cycle(d: OverlayDigraph, cycle: list[int], max_passes: int = 50) -> list[int]:
    """Local search on the spliced weight: insert outside nodes, relocate or drop nodes."""
    cyc = list(cycle)
    if len(cyc) < 2:
        return cyc
    for _ in range(max_passes):
        changed = False
        inside = set(cyc)
        # insert outside nodes where two arcs allow it
        for v in range(d.k):
            if v in inside:
                continue
            best = None
            for t in range(len(cyc)):
                a, b = cyc[t], cyc[(t + 1) % len(cyc)]
                if d.has(a, v) and d.has(v, b):
                    gain = d.value[v] - d.cost(a, v) - d.cost(v, b) + d.cost(a, b)
                    if gain > 1e-9 and (best is None or gain > best[0]):
                        best = (gain, t)
            if best is not None:
                cyc.insert(best[1] + 1, v)
                inside.add(v)
                changed = True
        # relocate single nodes
        t = 0
        while t < len(cyc) and len(cyc) > 3:
            v = cyc[t]
            a, b = cyc[t - 1], cyc[(t + 1) % len(cyc)]
            if not d.has(a, b):
                t += 1
                continue
            rest = cyc[:t] + cyc[t + 1:]
            base = d.cost(a, v) + d.cost(v, b) - d.cost(a, b)
            best = None
            for s in range(len(rest)):
                x, y = rest[s], rest[(s + 1) % len(rest)]
                if d.has(x, v) and d.has(v, y):
                    delta = d.cost(x, v) + d.cost(v, y) - d.cost(x, y)
                    if delta < base - 1e-9 and (best is None or delta < best[0]):
                        best = (delta, s)
            if best is not None:
                rest.insert(best[1] + 1, v)
                cyc = rest
                changed = True
            elif d.value[v] - base < -1e-9:
                cyc = rest  # the node costs more than it brings
                changed = True
                continue
            t += 1
        if not changed:
            break
    return cyc


# -- stitching ----------------------------------------------------------------

@dataclass
class StitchResult:
    edges: list[int]
    witnesses: list[int]
    trimmed_head: list[int]  # vertices cut before the in-witness, per node
    trimmed_tail: list[int]

    @property
    def length(self) -> int:
        return len(self.edges)


def stitch(segs: PathCover, hc: list[int], overlay: OverlayDigraph) -> StitchResult:
    """Concatenate each segment between its in- and out-witness with the witness edges."""
    r = len(hc)
    if r < 2:
        raise ValueError("need a node cycle of length >= 2")
    arcs = [overlay.arcs[(hc[i], hc[(i + 1) % r])] for i in range(r)]
    wit = [a.witness for a in arcs]
    assert len(set(wit)) == len(wit), "witness collision"
    edges: list[int] = []
    th, tt = [], []
    for i in range(r):
        node = hc[i]
        s = segs.paths[node]
        b = arcs[i - 1].head_pos  # entered at this position
        a = arcs[i].tail_pos  # leave from this position
        assert arcs[i - 1].head == node and arcs[i].tail == node
        assert b <= a, "head witness after tail witness"
        edges.extend(int(e) for e in s.edges[b:a])
        edges.append(int(arcs[i].witness))
        th.append(b)
        tt.append(len(s.vertices) - 1 - a)
    return StitchResult(edges, wit, th, tt)


# -- whole pipeline at graph level --------------------------------------------

@dataclass
class CycleKnobs:
    """Size parameters, as powers of the graph order with absolute floors."""

    reserve_exponent: float | None = 0.9
    seg_exponent: float = 0.095
    seg_floor: int = 32
    v2_window_exponent: float = 0.06
    v2_window_floor: int = 8
    endpoint_exponent: float = 0.03
    endpoint_floor: int = 8
    merge_leftover: bool = False
    ham_budget: int = 10**6
    improve: bool = True
    v2_rule: bool = True
    absorb: bool = False

    def sizes(self, n: int) -> dict[str, int]:
        return {
            "reserve": reserve_size(n, self.reserve_exponent),
            "seg_len": max(self.seg_floor, int(round(n ** self.seg_exponent))),
            "v2_window": max(self.v2_window_floor, int(round(n ** self.v2_window_exponent))) if self.v2_rule else 0,
            "endpoint_window": max(self.endpoint_floor, int(round(n ** self.endpoint_exponent))),
        }


@dataclass
class LongCycle:
    edges: list[int]  # edge ids of the input graph
    weight: float
    source: str  # "stitched", "matching-cycle" or "dfs"
    report: dict


def long_cycle(g: Multigraph, w: np.ndarray, rng: Rng, knobs: CycleKnobs | None = None) -> LongCycle:
    """Run reserve split, 2-Greedy, segmentation, overlay, Hamilton search and splicing.

    Returns the heaviest verified cycle among the spliced one, the heaviest
    cycle inside the matching and a DFS cycle, with its source named.
    """
    from . import twogreedy

    knobs = knobs or CycleKnobs()
    w = np.asarray(w, dtype=np.float64)
    n_ref = int(np.count_nonzero(np.asarray(g.deg)))
    sz = knobs.sizes(max(n_ref, 1))
    live = g.m_live
    r = min(sz["reserve"], max(live - 1, 0))
    split = split_reserve(g, None, rng.child(0), count=r)
    ms, tr = twogreedy.run(split.main, w, split.partition, rng.child(1))
    comps = twogreedy.matching_components(ms)
    pc = matching_to_paths(comps, w)
    v2 = split.partition.Y2
    segs, srep = segment_paths(pc, sz["seg_len"], v2, sz["v2_window"], w, knobs.merge_leftover)
    while len(segs) < 2 and sz["seg_len"] > 2:
        # small graphs: shorten segments until the overlay has something to join
        sz["seg_len"] //= 2
        segs, srep = segment_paths(pc, sz["seg_len"], v2, sz["v2_window"], w, knobs.merge_leftover)
    ov = build_overlay(segs, g, split.reserve, sz["endpoint_window"], v2, w)
    report = {
        "sizes": sz, "reserve_edges": int(len(split.reserve)), "matching_weight": ms.weight,
        "W_tau": ms.W, "components": len(comps), "paths": len(pc), "segments": len(segs),
        "short_paths": srep.short_paths, "leftover_weight": srep.leftover_weight,
        "v2_discarded": srep.v2_discarded, "arcs": ov.n_arcs,
    }
    candidates: list[tuple[float, str, list[int]]] = []
    ham = None
    if len(segs) >= 2 and ov.n_arcs:
        ham = hamilton_heuristic(ov, knobs.ham_budget, rng.child(2))
        cyc = ham.cycle
        if knobs.improve and len(cyc) >= 2:
            cyc = improve_cycle(ov, cyc)
        if len(cyc) >= 2:
            st = stitch(segs, cyc, ov)
            candidates.append((float(w[st.edges].sum()), "stitched", st.edges))
            report.update(ham_nodes=len(cyc), hamiltonian=bool(ham.hamiltonian and len(cyc) == len(segs)),
                          witnesses=len(st.witnesses), ham_steps=ham.steps)
    if "hamiltonian" not in report:
        report.update(ham_nodes=0, hamiltonian=False, witnesses=0, ham_steps=0)
    mc = [c for c in comps if c.is_cycle]
    if mc:
        best = max(mc, key=lambda c: (float(w[c.edges].sum()), -min(c.vertices)))
        candidates.append((float(w[best.edges].sum()), "matching-cycle", list(best.edges)))
    for pth in sorted(pc.paths, key=lambda q: -float(w[q.edges].sum()))[:20]:
        cl = close_path(g, w, pth)
        if cl is not None:
            candidates.append((float(w[cl].sum()), "closed-path", cl))
    if not candidates:
        dc = dfs_cycle(g)
        if dc:
            candidates.append((float(w[dc].sum()), "dfs", dc))
    if not candidates:
        raise ValueError("graph has no cycle")
    candidates.sort(key=lambda t: -t[0])
    report["stitched_weight"] = next((c[0] for c in candidates if c[1] == "stitched"), None)
    for wt, src, edges in candidates:
        try:
            verify_cycle(g, edges)
        except CycleVerificationError:
            continue
        report["start_source"] = src
        report["start_weight"] = wt
        report["splices"] = 0
        if knobs.absorb:
            from .kernelizer import walk_vertices

            cv = walk_vertices(g, edges)
            pieces = pieces_outside(comps, cv, g)
            cv, edges, report["splices"] = absorb_pieces(g, w, cv, list(edges), pieces)
            verify_cycle(g, edges)
            wt = float(w[edges].sum())
            if report["splices"]:
                src = src + "+absorbed"
        report["retention"] = wt / ms.weight if ms.weight > 0 else None
        return LongCycle(list(edges), wt, src, report)
    raise CycleVerificationError(0, "no candidate cycle verified")


def close_path(g: Multigraph, w: np.ndarray, path: Path) -> list[int] | None:
    """Heaviest cycle made of a suffix or prefix of ``path`` and one edge back from its end."""
    vs = path.vertices.tolist()
    es = path.edges.tolist()
    if len(vs) < 2:
        return None
    pre = _prefix(w[es].tolist()) if es else np.zeros(1)
    pos = {v: i for i, v in enumerate(vs)}
    on_path = set(es)
    best = None
    for end in (0, len(vs) - 1):
        v = vs[end]
        s0 = g.start[v]
        for h in g.adj[s0: s0 + g.deg[v]]:
            e = int(h >> 1)
            x = int(g.ends[h ^ 1])
            if e in on_path or x not in pos:
                continue
            i = pos[x]
            lo, hi = min(i, end), max(i, end)
            if x == v:
                cyc = [e]
            else:
                cyc = es[lo:hi] + [e]
            wt = float(pre[hi] - pre[lo] + w[e])
            if best is None or wt > best[0]:
                best = (wt, cyc)
    return None if best is None else best[1]


def pieces_outside(comps, cycle_vertices, g: Multigraph) -> list[Piece]:
    """Matching components cut down to the runs that avoid the cycle, plus lone vertices."""
    on = np.zeros(g.n, bool)
    on[list(cycle_vertices)] = True
    covered = on.copy()
    out: list[Piece] = []
    for c in comps:
        vs = list(c.vertices)
        es = list(c.edges)
        covered[vs] = True
        flags = on[vs]
        if c.is_cycle and not flags.any():
            out.append(Piece(vs, es, True))
            continue
        if c.is_cycle:
            r = int(np.flatnonzero(flags)[0])
            vs = vs[r:] + vs[:r] + [vs[r]]
            es = es[r:] + es[:r]
        run_v: list[int] = []
        run_e: list[int] = []
        for t, v in enumerate(vs):
            if on[v]:
                if run_v:
                    out.append(Piece(run_v, run_e))
                run_v, run_e = [], []
                continue
            if run_v:
                run_e.append(es[t - 1])
            run_v.append(v)
        if run_v:
            out.append(Piece(run_v, run_e))
    lone = np.flatnonzero(~covered & (np.asarray(g.deg) > 0))
    out.extend(Piece([int(v)], []) for v in lone)
    return out


def dfs_cycle(g: Multigraph) -> list[int]:
    """Some cycle of ``g`` as edge ids (iterative DFS); empty if acyclic."""
    n = g.n
    parent_edge = np.full(n, -1, np.int64)
    depth = np.full(n, -1, np.int64)
    for root in range(n):
        if depth[root] >= 0 or g.deg[root] == 0:
            continue
        depth[root] = 0
        stack = [(root, iter(g.incidence(root)))]
        while stack:
            v, it = stack[-1]
            adv = False
            for e, x in it:
                if e == parent_edge[v]:
                    continue
                if x == v:
                    return [e]
                if depth[x] < 0:
                    depth[x] = depth[v] + 1
                    parent_edge[x] = e
                    stack.append((x, iter(g.incidence(x))))
                    adv = True
                    break
                if depth[x] < depth[v]:
                    # back edge v -> x closes a cycle through the tree path
                    cyc = [e]
                    u = v
                    while u != x:
                        pe = int(parent_edge[u])
                        cyc.append(pe)
                        a, b = g.endpoints(pe)
                        u = a if b == u else b
                    return cyc
            if not adv:
                stack.pop()
    return []


# -- absorbing leftover pieces ----------------------------------------------------

@dataclass
class Piece:
    vertices: list[int]
    edges: list[int]  # edges[i] joins vertices[i] and vertices[i+1] (and last->first for cycles)
    is_cycle: bool = False


def _prefix(ws: list[float]) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(np.asarray(ws, dtype=np.float64))))


def absorb_pieces(g: Multigraph, w: np.ndarray, cycle_vertices: list[int], cycle_edges: list[int],
                  pieces: list[Piece], max_passes: int = 50, max_pairs: int = 4000
                  ) -> tuple[list[int], list[int], int]:
    """Splice vertex-disjoint pieces into a cycle wherever that adds weight.

    For edges (c_i, x) and (c_j, y) of ``g`` with c_i, c_j on the cycle and
    x, y on a piece, the forward arc c_i -> c_j is replaced by
    c_i - x ... y - c_j, where x ... y runs along the piece.  The best such pair
    is applied when its net gain is positive; the dropped arc and the unused
    parts of the piece become pieces again.  Returns (vertices, edges, splices).
    """
    n = g.n
    cv = list(cycle_vertices)
    ce = list(cycle_edges)
    queue = [p for p in pieces if p.vertices]
    splices = 0
    for _ in range(max_passes):
        improved = False
        queue.sort(key=lambda p: (-float(w[p.edges].sum()) if p.edges else 0.0, p.vertices[0]))
        nxt: list[Piece] = []
        cpos = np.full(n, -1, np.int64)
        cpos[cv] = np.arange(len(cv))
        preC = _prefix(w[ce].tolist())
        for p in queue:
            res = _best_splice(g, w, cpos, preC, p, max_pairs)
            if res is None:
                nxt.append(p)
                continue
            (i, j, s_edge, t_edge, a, b, fwd) = res
            L = len(cv)
            # keep c_j ... c_i (forward), then c_i - x .. y - c_j
            keep_v = [cv[(j + t) % L] for t in range(((i - j) % L) + 1)]
            keep_e = [ce[(j + t) % L] for t in range((i - j) % L)]
            drop_v = [cv[(i + t) % L] for t in range(1, (j - i) % L)]
            drop_e = [ce[(i + t) % L] for t in range(1, (j - i) % L - 1)] if len(drop_v) > 1 else []
            pv, pe_, rest = _piece_walk(p, a, b, fwd)
            cv = keep_v + pv
            ce = keep_e + [s_edge] + pe_ + [t_edge]
            cpos = np.full(n, -1, np.int64)
            cpos[cv] = np.arange(len(cv))
            preC = _prefix(w[ce].tolist())
            if drop_v:
                nxt.append(Piece(drop_v, drop_e))
            nxt.extend(rest)
            splices += 1
            improved = True
        queue = nxt
        if not improved:
            break
    return cv, ce, splices


def _best_splice(g, w, cpos, preC, p: Piece, max_pairs: int):
    pv = p.vertices
    ppos = {v: t for t, v in enumerate(pv)}
    cs, ps, es = [], [], []
    for v in pv:
        s = g.start[v]
        for h in g.adj[s: s + g.deg[v]]:
            x = int(g.ends[h ^ 1])
            if cpos[x] >= 0:
                cs.append(int(cpos[x]))
                ps.append(ppos[v])
                es.append(int(h >> 1))
    q = len(cs)
    if q < 2:
        return None
    if q > max_pairs:
        keep = np.argsort(-w[np.asarray(es)], kind="stable")[:max_pairs]
        cs = [cs[k] for k in keep]
        ps = [ps[k] for k in keep]
        es = [es[k] for k in keep]
    cs = np.asarray(cs)
    ps = np.asarray(ps)
    es = np.asarray(es)
    we = w[es]
    TC = preC[-1]
    F = preC[cs][None, :] - preC[cs][:, None]  # forward arc weight cs[s] -> cs[t]
    F = np.where(F < 0, F + TC, F)
    preP = _prefix(w[p.edges].tolist()) if p.edges else np.zeros(1)
    if p.is_cycle:
        TP = preP[-1]
        d = preP[ps][None, :] - preP[ps][:, None]
        d = np.where(d < 0, d + TP, d)  # forward along the piece from ps[s] to ps[t]
        fwd = d >= TP - d
        kept = np.where(fwd, d, TP - d)
        same = ps[None, :] == ps[:, None]
        kept = np.where(same, 0.0, kept)
        fwd = fwd | same
    else:
        kept = np.abs(preP[ps][None, :] - preP[ps][:, None])
        fwd = ps[None, :] >= ps[:, None]
    gain = kept + we[:, None] + we[None, :] - F
    invalid = cs[:, None] == cs[None, :]
    gain = np.where(invalid, -np.inf, gain)
    k = int(np.argmax(gain))
    s, t = divmod(k, q)
    if not gain[s, t] > 1e-9:
        return None
    return int(cs[s]), int(cs[t]), int(es[s]), int(es[t]), int(ps[s]), int(ps[t]), bool(fwd[s, t])


def _piece_walk(p: Piece, a: int, b: int, fwd: bool):
    """Vertices/edges of the piece from position a to b, plus the unused remainder pieces."""
    pv, pe = p.vertices, p.edges
    k = len(pv)
    if p.is_cycle:
        if a == b:
            rest_v = [pv[(a + t) % k] for t in range(1, k)]
            rest_e = [pe[(a + t) % k] for t in range(1, k - 1)]
            return [pv[a]], [], ([Piece(rest_v, rest_e)] if rest_v else [])
        step = 1 if fwd else -1
        span = ((b - a) * step) % k
        vs = [pv[(a + step * t) % k] for t in range(span + 1)]
        es = [pe[(a + t) % k] if fwd else pe[(a - t - 1) % k] for t in range(span)]
        rest_v = [pv[(b + step * t) % k] for t in range(1, k - span)]
        rest_e = [pe[(b + t) % k] if fwd else pe[(b - t - 1) % k] for t in range(1, k - span - 1)]
        return vs, es, ([Piece(rest_v, rest_e)] if rest_v else [])
    lo, hi = min(a, b), max(a, b)
    vs = pv[lo:hi + 1]
    es = pe[lo:hi]
    if a > b:
        vs = vs[::-1]
        es = es[::-1]
    rest = []
    if lo > 0:
        rest.append(Piece(pv[:lo], pe[:lo - 1]))
    if hi < k - 1:
        rest.append(Piece(pv[hi + 1:], pe[hi + 1:]))
    return list(vs), list(es), rest
