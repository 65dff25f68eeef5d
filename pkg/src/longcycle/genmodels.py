"""Random multigraph samplers.

* ``sample_gnm``: m independent uniform unordered pairs from [n], loops allowed.
* ``sample_sequence_graph``: uniform point sequence with a degree-class
  constrained degree vector (the pseudo-graph model), degrees drawn from
  truncated Poissons and accepted when they sum to 2m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .multigraph import Multigraph
from .rng import Rng

CLASSES = ("Y1", "Y2", "Y", "Z1", "Z")


class InfeasibleError(ValueError):
    """The requested edge count cannot be realised by the degree classes."""


@dataclass
class DegreeClassPartition:
    """Five pairwise disjoint vertex classes on ``[n]``.

    Forced degrees: 1 on Y1 and Z1, 2 on Y2, at least 2 on Z, at least 3 on Y.
    Vertices outside every class have degree 0.
    """

    n: int
    Y1: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    Y2: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    Y: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    Z1: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    Z: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        for name in CLASSES:
            setattr(self, name, np.unique(np.asarray(getattr(self, name), dtype=np.int64)))
        allv = np.concatenate([getattr(self, c) for c in CLASSES])
        if len(allv) and (allv.min() < 0 or allv.max() >= self.n):
            raise ValueError("class member out of range")
        if len(np.unique(allv)) != len(allv):
            raise ValueError("degree classes must be pairwise disjoint")

    @classmethod
    def all_y(cls, n: int) -> "DegreeClassPartition":
        return cls(n, Y=np.arange(n))

    def sizes(self) -> dict[str, int]:
        return {c: len(getattr(self, c)) for c in CLASSES}

    def floor(self) -> int:
        """Smallest feasible total degree."""
        s = self.sizes()
        return s["Y1"] + 2 * s["Y2"] + 3 * s["Y"] + s["Z1"] + 2 * s["Z"]

    def fixed_points(self) -> int:
        s = self.sizes()
        return s["Y1"] + 2 * s["Y2"] + s["Z1"]

    def labels(self) -> np.ndarray:
        """Per-vertex class index into ``CLASSES``; -1 for unclassified."""
        lab = np.full(self.n, -1, dtype=np.int8)
        for i, c in enumerate(CLASSES):
            lab[getattr(self, c)] = i
        return lab

    def check_feasible(self, m: int) -> None:
        if 2 * m < self.floor():
            raise InfeasibleError(f"2m={2 * m} below class floor {self.floor()}")


# -- truncated Poisson helpers ---------------------------------------------

def _poisson_tail(lam: float, k: int) -> float:
    """sum_{j>=k} lam^j / j!, accurate for small lam too."""
    if lam == 0.0:
        return 0.0
    if lam < 1.0:
        term = lam**k / math.factorial(k)
        total, j = 0.0, k
        while term > 1e-300 and (total == 0.0 or term > total * 1e-18):
            total += term
            j += 1
            term *= lam / j
        return total
    return math.exp(lam) - sum(lam**j / math.factorial(j) for j in range(k))


def mean_poisson_atleast(lam: float, k: int) -> float:
    """E[Po(lam) | Po(lam) >= k]; tends to k as lam -> 0."""
    if lam <= 0.0:
        return float(k)
    return lam * _poisson_tail(lam, k - 1) / _poisson_tail(lam, k)


def poisson_atleast_pmf(lam: float, k: int, j: int) -> float:
    if j < k:
        return 0.0
    return math.exp(j * math.log(lam) - math.lgamma(j + 1)) / _poisson_tail(lam, k)


def solve_lambda(p: DegreeClassPartition, m: int) -> float:
    """Root of |Y| E[Po>=3(l)] + |Z| E[Po>=2(l)] = 2m - |Y1| - 2|Y2| - |Z1|.

    Returns 0.0 in the degenerate case where the floor is met exactly (all
    free degrees are forced to their minimum).
    """
    s = p.sizes()
    rhs = 2 * m - p.fixed_points()
    floor = p.floor()
    if 2 * m < floor:
        raise InfeasibleError(f"2m={2 * m} below class floor {floor}")
    if 2 * m == floor:
        return 0.0
    ny, nz = s["Y"], s["Z"]
    if ny + nz == 0:
        raise InfeasibleError("no free-degree vertices to absorb the excess")

    def f(lam):
        return ny * mean_poisson_atleast(lam, 3) + nz * mean_poisson_atleast(lam, 2) - rhs

    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        hi *= 2.0
    tol = 1e-12 * 2 * m
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        r = f(mid)
        if abs(r) < tol * 1e-2 or hi - lo <= 4 * np.finfo(float).eps * hi:
            lo = hi = mid
            break
        if r < 0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return lam


def _poisson_atleast_table(lam: float, k: int) -> np.ndarray:
    """CDF over values k, k+1, ... truncated once the tail mass drops below 1e-15."""
    probs = []
    j = k
    mass = 0.0
    while True:
        pj = poisson_atleast_pmf(lam, k, j)
        probs.append(pj)
        mass += pj
        if 1.0 - mass < 1e-15 or (j > k + 5 and pj < 1e-17):
            break
        j += 1
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return cdf


def sample_poisson_atleast(lam: float, k: int, size: int, rng: Rng) -> np.ndarray:
    cdf = _poisson_atleast_table(lam, k)
    u = rng.random(size)
    return k + np.searchsorted(cdf, u, side="right").astype(np.int64)


def sample_conditioned_degrees(p: DegreeClassPartition, m: int, rng: Rng) -> np.ndarray:
    """Degree vector with the class constraints and total exactly 2m."""
    lam = solve_lambda(p, m)
    d = np.zeros(p.n, dtype=np.int64)
    d[p.Y1] = 1
    d[p.Z1] = 1
    d[p.Y2] = 2
    d[p.Y] = 3
    d[p.Z] = 2
    if lam == 0.0:
        return d
    target_free = 2 * m - p.fixed_points()
    cap = int(1e6 * math.sqrt(max(m, 1)))
    ny, nz = len(p.Y), len(p.Z)
    cdf_y = _poisson_atleast_table(lam, 3) if ny else None
    cdf_z = _poisson_atleast_table(lam, 2) if nz else None
    for _ in range(cap):
        dy = 3 + np.searchsorted(cdf_y, rng.random(ny), side="right") if ny else np.zeros(0, np.int64)
        dz = 2 + np.searchsorted(cdf_z, rng.random(nz), side="right") if nz else np.zeros(0, np.int64)
        if int(dy.sum()) + int(dz.sum()) == target_free:
            d[p.Y] = dy
            d[p.Z] = dz
            return d
    raise RuntimeError("degree rejection sampler exceeded its retry cap")


def sample_sequence_graph(p: DegreeClassPartition, m: int, rng: Rng) -> Multigraph:
    """Uniform point sequence with a class-constrained degree vector, paired consecutively."""
    d = sample_conditioned_degrees(p, m, rng)
    return pairing_from_degrees(d, rng)


def pairing_from_degrees(d: np.ndarray, rng: Rng) -> Multigraph:
    d = np.asarray(d, dtype=np.int64)
    if int(d.sum()) % 2:
        raise ValueError("degree sum must be even")
    points = np.repeat(np.arange(len(d), dtype=np.int64), d)
    rng.gen.shuffle(points)
    return Multigraph(len(d), points)


def sample_gnm(n: int, m: int, rng: Rng) -> Multigraph:
    """m independent uniform edges over the n(n+1)/2 unordered pairs (loops included).

    Draw ``i`` in [0, n] and ``j`` in [0, n); ``i <= j`` maps to ``{i, j}`` and
    ``i > j`` to ``{j, i - 1}``, which hits every unordered pair exactly twice.
    """
    if n < 1:
        raise ValueError("n must be positive")
    i = rng.gen.integers(0, n + 1, size=m)
    j = rng.gen.integers(0, n, size=m)
    swap = i > j
    a = np.where(swap, j, i)
    b = np.where(swap, i - 1, j)
    ends = np.empty(2 * m, dtype=np.int64)
    ends[0::2] = a
    ends[1::2] = b
    return Multigraph(n, ends)


@dataclass
class DegreeCensus:
    """Counts of (class, degree) cells plus class-constraint violations."""

    cells: dict[tuple[str, int], int]
    violations: int

    def count(self, cls: str, degree: int) -> int:
        return self.cells.get((cls, degree), 0)


def degree_class_census(g: Multigraph, p: DegreeClassPartition) -> DegreeCensus:
    lab = p.labels()
    deg = np.asarray(g.deg, dtype=np.int64)
    cells: dict[tuple[str, int], int] = {}
    violations = 0
    lo = {"Y1": (1, 1), "Y2": (2, 2), "Y": (3, None), "Z1": (1, 1), "Z": (2, None)}
    for i, c in enumerate(CLASSES):
        dv = deg[lab == i]
        if not len(dv):
            continue
        vals, cnt = np.unique(dv, return_counts=True)
        for k, c_ in zip(vals, cnt):
            cells[(c, int(k))] = int(c_)
        a, b = lo[c]
        violations += int(np.sum(dv < a)) + (int(np.sum(dv > b)) if b is not None else 0)
    violations += int(np.sum(deg[lab == -1] != 0))
    return DegreeCensus(cells, violations)


def expected_class_degree_count(lam: float, size: int, k: int, degree: int) -> float:
    """size * P(Po>=k(lam) = degree): the closed-form census cell."""
    return size * poisson_atleast_pmf(lam, k, degree)
