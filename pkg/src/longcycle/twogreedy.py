"""The 2-Greedy weighted 2-matching process.

While edges remain: if a dangerous vertex exists (degree 1 with no matched
edge, degree 2 with no matched edge, or degree 1 with one matched edge) pick
one uniformly and match a uniform incident edge; otherwise match a
maximum-weight edge.  A vertex that reaches matching degree 2 (a matched loop
counts 2) loses all its remaining edges.

The loop is compiled.  Per-vertex state is ``dM`` (matching degree) and a class
code ``cls``: ``-1`` for gone/saturated, ``j`` for (dM=0, degree j) and
``BUCKETS + j`` for (dM=1, degree j), with degrees above ``OVERFLOW - 1``
sharing one overflow bucket.  Only the three dangerous classes are kept as
sampleable sets; the other classes are counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .genmodels import DegreeClassPartition, degree_class_census
from .multigraph import Multigraph, _remove_edge
from .rng import Rng
from .weightdist import EdgeWeights, exp_trunc_mean

OVERFLOW = 17  # degrees >= 17 share this bucket
BUCKETS = OVERFLOW + 1
# dangerous set slots
SZ1, SY1, SY2 = 0, 1, 2

TRACE_COLS = ("t", "zeta", "Y", "Y3", "m", "wmax", "W", "Z2")


@njit(cache=True)
def _class_of(dM, d):
    if dM >= 2 or d == 0:
        return -1
    b = d if d < OVERFLOW else OVERFLOW
    if dM == 0:
        return b
    return BUCKETS + b


@njit(cache=True)
def _dslot(c):
    if c == 1:
        return SY1
    if c == 2:
        return SY2
    if c == BUCKETS + 1:
        return SZ1
    return -1


@njit(cache=True)
def _reclass(v, dM, deg, cls, counts, dset, dsize, dpos):
    new = _class_of(dM[v], deg[v])
    old = cls[v]
    if new == old:
        return
    if old >= 0:
        counts[old] -= 1
        s = _dslot(old)
        if s >= 0:
            p = dpos[v]
            last = dset[s, dsize[s] - 1]
            dset[s, p] = last
            dpos[last] = p
            dsize[s] -= 1
            dpos[v] = -1
    if new >= 0:
        counts[new] += 1
        s = _dslot(new)
        if s >= 0:
            dset[s, dsize[s]] = v
            dpos[v] = dsize[s]
            dsize[s] += 1
    cls[v] = new


@njit(cache=True)
def _ysum(counts):
    s = 0
    for j in range(3, BUCKETS):
        s += counts[j]
    return s


@njit(cache=True)
def _census_counts(n, dM, deg):
    counts = np.zeros(2 * BUCKETS, np.int64)
    for v in range(n):
        c = _class_of(dM[v], deg[v])
        if c >= 0:
            counts[c] += 1
    return counts


@njit(cache=True)
def _greedy(n, ends, adj, hpos, start, deg, alive, m_live, w, order, dM, seed,
            max_steps, trace_every, eps1n, trace, step_log, check_every=0):
    """Run up to ``max_steps`` steps in place.

    trace rows: t, zeta, |Y|, |Y3|, m, wmax, W, |Z2|.  Returns
    (steps, m_live, W, matched, n_matched, n_rows, tau1, tau2, ptr).
    ``step_log[t] = (edge, dangerous_flag)`` for each executed step.  With
    ``check_every > 0`` the class counts are recomputed from scratch at that
    period and a mismatch stops the run with ``steps = -1 - t``.
    """
    np.random.seed(seed)
    cls = np.full(n, -1, np.int64)
    counts = np.zeros(2 * BUCKETS, np.int64)
    dset = np.empty((3, max(n, 1)), np.int64)
    dsize = np.zeros(3, np.int64)
    dpos = np.full(n, -1, np.int64)
    for v in range(n):
        _reclass(v, dM, deg, cls, counts, dset, dsize, dpos)
    matched = np.empty(m_live, np.int64)
    nm = 0
    W = 0.0
    ptr = 0
    nrows = 0
    tau1 = -1
    tau2 = -1
    t = 0
    maxrows = trace.shape[0]
    while True:
        zeta = dsize[SZ1] + dsize[SY1] + 2 * dsize[SY2]
        if tau1 < 0 and zeta == 0:
            tau1 = t
        y3 = counts[3]
        if tau2 < 0 and y3 <= eps1n:
            tau2 = t
        done = m_live == 0 or t >= max_steps
        if trace_every > 0 and nrows < maxrows and (t % trace_every == 0 or tau1 == t or done):
            while ptr < len(order) and not alive[order[ptr]]:
                ptr += 1
            wmax = w[order[ptr]] if ptr < len(order) else 0.0
            trace[nrows, 0] = t
            trace[nrows, 1] = zeta
            trace[nrows, 2] = _ysum(counts)
            trace[nrows, 3] = y3
            trace[nrows, 4] = m_live
            trace[nrows, 5] = wmax
            trace[nrows, 6] = W
            trace[nrows, 7] = counts[BUCKETS + 2]
            nrows += 1
        if done:
            break
        if check_every > 0 and t % check_every == 0:
            fresh = _census_counts(n, dM, deg)
            if (not np.array_equal(fresh, counts) or dsize[SY1] != counts[1]
                    or dsize[SY2] != counts[2] or dsize[SZ1] != counts[BUCKETS + 1]):
                return -1 - t, m_live, W, matched, nm, nrows, tau1, tau2, ptr
        dsz = dsize[SZ1] + dsize[SY1] + dsize[SY2]
        if dsz > 0:
            r = np.random.randint(0, dsz)
            if r < dsize[SZ1]:
                v = dset[SZ1, r]
            elif r < dsize[SZ1] + dsize[SY1]:
                v = dset[SY1, r - dsize[SZ1]]
            else:
                v = dset[SY2, r - dsize[SZ1] - dsize[SY1]]
            h = adj[start[v] + np.random.randint(0, deg[v])]
            e = h >> 1
            u = ends[h ^ 1]
            dangerous = 1
        else:
            while not alive[order[ptr]]:
                ptr += 1
            e = order[ptr]
            v = ends[2 * e]
            u = ends[2 * e + 1]
            dangerous = 0
        if len(step_log) > 0 and t < step_log.shape[0]:
            step_log[t, 0] = e
            step_log[t, 1] = dangerous
        W += w[e]
        matched[nm] = e
        nm += 1
        if u == v:
            dM[v] += 2
        else:
            dM[v] += 1
            dM[u] += 1
        _remove_edge(adj, hpos, start, deg, ends, alive, e)
        m_live -= 1
        for k in range(2):
            z = np.int64(v) if k == 0 else np.int64(u)
            if dM[z] >= 2:
                while deg[z] > 0:
                    h2 = adj[start[z] + deg[z] - 1]
                    e2 = h2 >> 1
                    x = ends[h2 ^ 1]
                    _remove_edge(adj, hpos, start, deg, ends, alive, e2)
                    m_live -= 1
                    _reclass(x, dM, deg, cls, counts, dset, dsize, dpos)
            _reclass(z, dM, deg, cls, counts, dset, dsize, dpos)
        t += 1
    return t, m_live, W, matched, nm, nrows, tau1, tau2, ptr


@dataclass
class GreedyTrace:
    rows: np.ndarray  # columns TRACE_COLS
    tau: int
    tau1: int
    tau2: int
    n: int
    completed: bool

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, TRACE_COLS.index(name)]

    def to_csv(self, path=None) -> str:
        lines = [",".join(TRACE_COLS)]
        lines += [f"{int(r[0])},{int(r[1])},{int(r[2])},{int(r[3])},{int(r[4])},"
                  f"{float(r[5])!r},{float(r[6])!r},{int(r[7])}" for r in self.rows]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass
class MatchState:
    """Result of a 2-Greedy run.

    ``steps`` are the edges added in order (the raw M_tau); ``M`` is the final
    2-matching after dropping loops and duplicate parallel edges.
    """

    n: int
    steps: np.ndarray
    M: np.ndarray
    endpoints: np.ndarray  # (len(M), 2)
    dM: np.ndarray  # matching degree in the raw process (loops count 2)
    W: float  # process weight sum over all steps
    weight: float  # weight of the cleaned matching
    class_counts: np.ndarray = field(default_factory=lambda: np.zeros(2 * BUCKETS, np.int64))
    step_log: np.ndarray | None = None  # (edge, dangerous) per step when requested

    @property
    def size(self) -> int:
        return len(self.M)

    def matching_degree(self) -> np.ndarray:
        return np.bincount(self.endpoints.ravel(), minlength=self.n)


def initial_dM(p: DegreeClassPartition) -> np.ndarray:
    dM = np.zeros(p.n, dtype=np.int64)
    dM[p.Z1] = 1
    dM[p.Z] = 1
    return dM


def max_weight_order(w: np.ndarray, rng: Rng) -> np.ndarray:
    """Edge ids by decreasing weight, equal weights in uniformly random order.

    A stable sort of a random permutation; with no insertions, a forward
    pointer that skips dead ids is a lazy-deletion max structure, and the first
    live id among equal weights is uniform over the live tied edges.
    """
    perm = rng.permutation(len(w))
    return perm[np.argsort(-w[perm], kind="stable")].astype(np.int64)


class CensusMismatch(ValueError):
    pass


def check_census(g: Multigraph, p: DegreeClassPartition) -> None:
    if p.n != g.n:
        raise CensusMismatch("partition and graph disagree on n")
    c = degree_class_census(g, p)
    if c.violations:
        raise CensusMismatch(f"{c.violations} vertices violate their degree class")


def run(g: Multigraph, w: EdgeWeights | np.ndarray, p: DegreeClassPartition | None,
        rng: Rng, trace_every: int = 0, eps1: float = 0.01, max_steps: int | None = None,
        copy: bool = True, log_steps: bool = False, check_every: int = 0):
    """Execute 2-Greedy on ``g`` and return ``(MatchState, GreedyTrace)``.

    ``p`` fixes the initial matching degrees (Z1/Z start matched once); with
    ``p=None`` every vertex starts unmatched and no census check is made.
    The graph is consumed unless ``copy`` is true.
    """
    if p is not None:
        check_census(g, p)
        dM = initial_dM(p)
    else:
        dM = np.zeros(g.n, dtype=np.int64)
    wv = w.values if isinstance(w, EdgeWeights) else np.asarray(w, dtype=np.float64)
    if len(wv) != g.m:
        raise ValueError("weights must be defined on every edge id")
    h = g.copy() if copy else g
    order = max_weight_order(wv, rng)
    seed = rng.kernel_seed()
    if max_steps is None:
        max_steps = h.m_live + 1
    rows_cap = (h.m_live // trace_every + 4) if trace_every > 0 else 0
    trace = np.zeros((rows_cap, len(TRACE_COLS)))
    step_log = np.zeros((h.m_live if log_steps else 0, 2), dtype=np.int64)
    t, m_live, W, matched, nm, nrows, tau1, tau2, _ = _greedy(
        h.n, h.ends, h.adj, h.hpos, h.start, h.deg, h.alive, h.m_live, wv, order,
        dM, seed, max_steps, trace_every, eps1 * h.n, trace, step_log, check_every,
    )
    if t < 0:
        raise InvariantError(f"class counts diverged from a fresh census at step {-1 - t}")
    h.m_live = int(m_live)
    steps = matched[:nm].copy()
    M = cleanup(h, steps)
    ends = h.ends.reshape(-1, 2)[M].astype(np.int64)
    state = MatchState(
        n=h.n, steps=steps, M=M, endpoints=ends, dM=dM, W=float(W),
        weight=float(wv[M].sum()) if len(M) else 0.0,
        class_counts=_census_counts(h.n, dM, h.deg),
    )
    tr = GreedyTrace(trace[:nrows].copy(), int(t), int(tau1), int(tau2), h.n, m_live == 0)
    if log_steps:
        state.step_log = step_log[:t]
    return state, tr


def cleanup(g: Multigraph, steps: np.ndarray) -> np.ndarray:
    """Drop matched loops and keep the first copy of each matched parallel pair."""
    if len(steps) == 0:
        return np.zeros(0, dtype=np.int64)
    pairs = g.ends.reshape(-1, 2)[steps].astype(np.int64)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    keep = lo != hi
    key = lo * g.n + hi
    _, first = np.unique(key, return_index=True)
    firstmask = np.zeros(len(steps), dtype=bool)
    firstmask[first] = True
    return np.sort(steps[keep & firstmask])


@dataclass
class MatchComponent:
    vertices: list[int]
    edges: list[int]  # edges[i] joins vertices[i] and vertices[i+1] (mod len for cycles)
    is_cycle: bool

    @property
    def length(self) -> int:
        return len(self.edges)


class InvariantError(AssertionError):
    pass


@njit(cache=True)
def _walk_components(n, M, ends):
    """Flat walk of a 2-matching: vertex/edge sequences, offsets and cycle flags."""
    cnt = np.zeros(n, np.int64)
    nb = np.full((n, 2), -1, np.int64)
    ne = np.full((n, 2), -1, np.int64)
    for i in range(len(M)):
        a = ends[i, 0]
        b = ends[i, 1]
        nb[a, cnt[a]] = b
        ne[a, cnt[a]] = M[i]
        cnt[a] += 1
        nb[b, cnt[b]] = a
        ne[b, cnt[b]] = M[i]
        cnt[b] += 1
    seen = np.zeros(n, np.bool_)
    vout = np.empty(n, np.int64)
    eout = np.empty(len(M), np.int64)
    voff = [0]
    eoff = [0]
    cyc = []
    nv = 0
    nedge = 0
    for phase in range(2):
        for v in range(n):
            if seen[v] or cnt[v] != phase + 1:
                continue
            seen[v] = True
            vout[nv] = v
            nv += 1
            if phase == 0:
                prev_e = -1
                cur = v
            else:
                k = 0
                if nb[v, 1] < nb[v, 0] or (nb[v, 1] == nb[v, 0] and ne[v, 1] < ne[v, 0]):
                    k = 1
                prev_e = ne[v, k]
                eout[nedge] = prev_e
                nedge += 1
                cur = nb[v, k]
            while True:
                if phase == 1:
                    if cur == v:
                        break
                    seen[cur] = True
                    vout[nv] = cur
                    nv += 1
                k = 0 if ne[cur, 0] != prev_e else 1
                if k >= cnt[cur] or ne[cur, k] == prev_e:
                    break
                e = ne[cur, k]
                x = nb[cur, k]
                eout[nedge] = e
                nedge += 1
                prev_e = e
                cur = x
                if phase == 0:
                    seen[x] = True
                    vout[nv] = x
                    nv += 1
            voff.append(nv)
            eoff.append(nedge)
            cyc.append(phase == 1)
    return vout[:nv], eout[:nedge], np.array(voff), np.array(eoff), np.array(cyc)


def matching_components(ms: MatchState) -> list[MatchComponent]:
    """Split the cleaned 2-matching into its paths and cycles.

    Order: components by their smallest vertex; paths start at their smaller
    endpoint, cycles at their smallest vertex heading to the smaller neighbour.
    """
    n = ms.n
    if len(ms.M) == 0:
        return []
    ends = np.ascontiguousarray(ms.endpoints, dtype=np.int64)
    deg = np.bincount(ends.ravel(), minlength=n)
    if deg.max() > 2:
        v = int(np.argmax(deg))
        raise InvariantError(f"vertex {v} has {int(deg[v])} matching edges")
    vs, es, vo, eo, cyc = _walk_components(n, np.asarray(ms.M, np.int64), ends)
    vl = vs.tolist()
    el = es.tolist()
    comps = [MatchComponent(vl[vo[i]:vo[i + 1]], el[eo[i]:eo[i + 1]], bool(cyc[i]))
             for i in range(len(cyc))]
    if comps:
        mins = np.minimum.reduceat(vs, vo[:-1])
        comps = [comps[i] for i in np.argsort(mins, kind="stable")]
    return comps


# -- one-step probe ------------------------------------------------------------

@dataclass
class Census:
    """Class census of a graph state: degree -> count per class.

    ``Y`` and ``Z`` map degree to count (Y degrees >= 3, Z degrees >= 2).
    """

    Y1: int = 0
    Y2: int = 0
    Z1: int = 0
    Y: dict[int, int] = field(default_factory=dict)
    Z: dict[int, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.Y1 + self.Y2 + self.Z1 + sum(self.Y.values()) + sum(self.Z.values())

    @property
    def two_m(self) -> int:
        return (self.Y1 + 2 * self.Y2 + self.Z1 + sum(k * c for k, c in self.Y.items())
                + sum(k * c for k, c in self.Z.items()))

    @property
    def zeta(self) -> int:
        return self.Z1 + self.Y1 + 2 * self.Y2

    def degrees_and_dM(self) -> tuple[np.ndarray, np.ndarray]:
        d, dm = [], []
        for k, c in [(1, self.Y1), (2, self.Y2)] + sorted(self.Y.items()):
            d += [k] * c
            dm += [0] * c
        for k, c in [(1, self.Z1)] + sorted(self.Z.items()):
            d += [k] * c
            dm += [1] * c
        return np.asarray(d, np.int64), np.asarray(dm, np.int64)


def one_step_expectations(c: Census, wmax: float) -> dict[str, float]:
    """Leading-order one-step changes of zeta, |Y|, 2m and W for a census.

    Error terms are O((1 + zeta) / 2m).  The zeta change carries the factor
    (i - 1) for each Z_i endpoint: all i - 1 remaining neighbours are hit.
    """
    two_m = c.two_m
    ind = 1.0 if c.zeta > 0 else 0.0
    y3 = c.Y.get(3, 0)
    pz2 = 2 * c.Z.get(2, 0) / two_m
    py3 = 3 * y3 / two_m
    sz_zeta = sum(i * z / two_m * (i - 1) for i, z in c.Z.items()) * (pz2 + 2 * py3)
    d_zeta = -ind + (2 - ind) * sz_zeta
    d_y = -(2 - ind) * (sum(i * y / two_m for i, y in c.Y.items())
                        + sum(i * z / two_m * (i - 1) * py3 for i, z in c.Z.items()))
    d_2m = -2 - (2 - ind) * sum(i * z / two_m * 2 * (i - 1) for i, z in c.Z.items())
    d_w = exp_trunc_mean(wmax) if ind else float("nan")  # zeta = 0: the realised max
    return {"zeta": d_zeta, "Y": d_y, "2m": d_2m, "W": d_w}


@dataclass
class ProbeRow:
    quantity: str
    formula: float
    empirical: float
    stderr: float

    @property
    def gap(self) -> float:
        return abs(self.empirical - self.formula)

    @property
    def within_3sigma(self) -> bool:
        return self.gap <= 3 * self.stderr + 1e-12


def one_step_probe(c: Census, m_t: int, trials: int, rng: Rng, wmax: float = 20.0) -> list[ProbeRow]:
    """Resample the pairing model for the census, run one 2-Greedy step, average the changes.

    Weights are i.i.d. Exp_{<=wmax}(1).  When zeta = 0 the W row compares the
    realised weight increment with the realised maximum weight per trial.
    """
    d, dm0 = c.degrees_and_dM()
    if int(d.sum()) != 2 * m_t:
        raise ValueError(f"census total degree {int(d.sum())} != 2*m_t={2 * m_t}")
    ind = c.zeta > 0
    out = {k: np.empty(trials) for k in ("zeta", "Y", "2m", "W", "wmax")}
    n = len(d)
    for i in range(trials):
        g = _pairing(d, rng)
        w = rng.gen.random(g.m)
        w = -np.log1p(w * np.expm1(-wmax))
        dM = dm0.copy()
        before = _census_counts(n, dM, g.deg)
        z0 = before[1] + 2 * before[2] + before[BUCKETS + 1]
        y0 = before[3:BUCKETS].sum()
        order = max_weight_order(w, rng)
        trace = np.zeros((0, len(TRACE_COLS)))
        step_log = np.zeros((0, 2), np.int64)
        res = _greedy(n, g.ends, g.adj, g.hpos, g.start, g.deg, g.alive, g.m_live, w,
                      order, dM, rng.kernel_seed(), 1, 0, 0.0, trace, step_log)
        after = _census_counts(n, dM, g.deg)
        out["zeta"][i] = after[1] + 2 * after[2] + after[BUCKETS + 1] - z0
        out["Y"][i] = after[3:BUCKETS].sum() - y0
        out["2m"][i] = 2 * (res[1] - g.m)
        out["W"][i] = res[2]
        out["wmax"][i] = w.max()
    f = one_step_expectations(c, wmax)
    rows = []
    for q in ("zeta", "Y", "2m"):
        x = out[q]
        rows.append(ProbeRow(q, f[q], float(x.mean()), float(x.std(ddof=1) / np.sqrt(trials))))
    if ind:
        x = out["W"]
        rows.append(ProbeRow("W", f["W"], float(x.mean()), float(x.std(ddof=1) / np.sqrt(trials))))
    else:
        x = out["W"] - out["wmax"]
        rows.append(ProbeRow("W", float(out["wmax"].mean()), float(out["W"].mean()),
                             float(x.std(ddof=1) / np.sqrt(trials))))
    return rows


def _pairing(d: np.ndarray, rng: Rng) -> Multigraph:
    points = np.repeat(np.arange(len(d), dtype=np.int64), d)
    rng.gen.shuffle(points)
    return Multigraph(len(d), points)
