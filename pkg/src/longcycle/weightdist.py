"""Edge-weight distributions and the geometric/exponential coupling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import Rng


@dataclass
class EdgeWeights:
    """Weights indexed by edge id.

    ``mode`` is ``"real"`` (values in [0, C]) or ``"integer"`` (path lengths >= 1).
    The 2-Greedy loop only ever sees ``values`` as float64.
    """

    values: np.ndarray
    mode: str = "real"
    cap: float | None = None

    def __post_init__(self):
        if self.mode not in ("real", "integer"):
            raise ValueError(f"unknown weight mode {self.mode!r}")
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self):
        return len(self.values)

    def check(self) -> None:
        v = self.values
        if self.mode == "real":
            assert np.all(v >= 0), "negative real weight"
            if self.cap is not None:
                assert np.all(v <= self.cap), "weight above cap"
        else:
            assert np.all(v >= 1) and np.all(v == np.round(v)), "bad integer weight"

    @classmethod
    def exp_trunc(cls, m: int, C: float, rng: Rng) -> "EdgeWeights":
        return cls(sample_exp_trunc(C, rng, size=m), "real", C)

    @classmethod
    def integer(cls, values) -> "EdgeWeights":
        return cls(np.asarray(values), "integer")


def exp_trunc_inverse(u, C: float):
    """Inverse CDF of Exp(1) truncated to [0, C]."""
    u = np.asarray(u, dtype=np.float64)
    return np.minimum(-np.log1p(u * np.expm1(-C)), C)  # rounding can overshoot C near u=1


def exp_trunc_mean(C: float) -> float:
    return (1.0 - math.exp(-C) * (C + 1.0)) / (-math.expm1(-C))


def exp_trunc_cdf(x, C: float):
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, C)
    return np.expm1(-x) / np.expm1(-C)


def sample_exp_trunc(C: float, rng: Rng, size=None):
    if C <= 0:
        raise ValueError("C must be positive")
    x = exp_trunc_inverse(rng.random(size), C)
    if size is None:
        return float(x)
    return x


def sample_uniform_composition(parts: int, total: int, rng: Rng) -> np.ndarray:
    """Uniform random composition of ``total`` into ``parts`` positive integers."""
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if total < parts:
        raise ValueError(f"cannot split {total} into {parts} positive parts")
    cuts = np.sort(rng.gen.choice(total - 1, size=parts - 1, replace=False)) + 1
    edges = np.concatenate(([0], cuts, [total]))
    return np.diff(edges).astype(np.int64)


@dataclass
class CouplingReport:
    gamma: float
    gamma_prime: float
    C: float
    threshold: int  # integer-scale index above which X' is a tail draw
    q: np.ndarray  # q[i-1] for i = 1..threshold
    q_in_range: bool
    redraws: int
    dominance_fraction: float
    X: np.ndarray
    Y: np.ndarray

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.X.tolist(), self.Y.tolist()))


class CouplingNumericalError(ArithmeticError):
    pass


def couple_geom_exp(gamma: float, C: float, m: int, rng: Rng) -> CouplingReport:
    """Couple Geom(gamma') variables X' with Exp_{<=C}(1) variables Y so that X' >= Y/gamma'.

    gamma' solves m/gamma - (m/gamma)^(2/3) = m/gamma'.  Y is binned on the
    integer scale; bin i keeps X' = ceil(Y/gamma') with probability 1 - q_i and
    otherwise X' is redrawn from Geom(gamma') conditioned above the last full bin.
    """
    if not 0 < gamma < 0.01:
        raise ValueError("gamma must lie in (0, 0.01)")
    if math.exp(-C) < gamma:
        raise ValueError("need exp(-C) >= gamma")
    big = m / gamma
    denom = big - big ** (2.0 / 3.0)
    if denom <= 0:
        raise ValueError("m/gamma too small for a positive gamma'")
    gp = m / denom
    K = int(math.floor(C / gp))
    i = np.arange(1, K + 1, dtype=np.float64)
    # P(Exp_{<=C} in ((i-1)g', i g']) and P(Geom(g') = i)
    p_exp = (np.exp(-(i - 1) * gp) * (-np.expm1(-gp))) / (-math.expm1(-C))
    p_geo = np.exp(np.log(gp) + (i - 1) * np.log1p(-gp))
    q = (p_exp - p_geo) / p_exp
    q_ok = bool(np.all((q >= -1e-12) & (q <= 1.0)))
    if not q_ok:
        raise CouplingNumericalError(f"q outside [0,1]: min={q.min()}, max={q.max()}")
    q = np.clip(q, 0.0, 1.0)

    Y = sample_exp_trunc(C, rng, size=m)
    idx = np.maximum(np.ceil(Y / gp).astype(np.int64), 1)
    qi = np.ones(m)
    inside = idx <= K
    qi[inside] = q[idx[inside] - 1]
    redraw = rng.random(m) < qi
    X = idx.copy()
    nr = int(redraw.sum())
    X[redraw] = K + rng.gen.geometric(gp, size=nr)
    dom = float(np.mean(X >= Y / gp))
    return CouplingReport(gamma, gp, C, K, q, q_ok, nr, dom, X, Y)
