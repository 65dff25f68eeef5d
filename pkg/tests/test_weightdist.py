from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from longcycle.rng import Rng
from longcycle.weightdist import (
    EdgeWeights,
    couple_geom_exp,
    exp_trunc_cdf,
    exp_trunc_inverse,
    exp_trunc_mean,
    sample_exp_trunc,
    sample_uniform_composition,
)


# -- truncated exponential -----------------------------------------------------------

def test_inverse_endpoints():
    assert exp_trunc_inverse(0.0, 20.0) == 0.0
    assert exp_trunc_inverse(1.0, 20.0) == pytest.approx(20.0, abs=1e-9)


@pytest.mark.parametrize("C", [1.4, 20.0])
def test_exp_trunc_ks(C):
    x = sample_exp_trunc(C, Rng(3), size=100_000)
    assert x.min() >= 0 and x.max() <= C
    d = stats.kstest(x, lambda t: exp_trunc_cdf(t, C)).statistic
    assert d < 0.01


def test_exp_trunc_mean_closed_form():
    C = 20.0
    closed = (1 - math.exp(-C) * (C + 1)) / (1 - math.exp(-C))
    assert exp_trunc_mean(C) == pytest.approx(closed, rel=1e-14)
    x = sample_exp_trunc(C, Rng(4), size=1_000_000)
    assert abs(x.mean() - closed) < 1e-2


def test_edge_weight_modes():
    w = EdgeWeights.exp_trunc(100, 20.0, Rng(0))
    w.check()
    assert w.mode == "real" and len(w) == 100
    EdgeWeights.integer([1, 2, 3]).check()
    with pytest.raises(AssertionError):
        EdgeWeights.integer([0, 2]).check()


# -- compositions -----------------------------------------------------------------------

def test_composition_forced():
    assert sample_uniform_composition(1, 7, Rng(0)).tolist() == [7]
    assert sample_uniform_composition(4, 4, Rng(0)).tolist() == [1, 1, 1, 1]
    with pytest.raises(ValueError):
        sample_uniform_composition(5, 4, Rng(0))


def _all_compositions(parts, total):
    for cuts in itertools.combinations(range(1, total), parts - 1):
        e = (0,) + cuts + (total,)
        yield tuple(e[i + 1] - e[i] for i in range(parts))


@pytest.mark.parametrize("parts,total,draws", [(3, 5, 600_000), (2, 6, 100_000)])
def test_composition_uniform_chi2(parts, total, draws):
    space = list(_all_compositions(parts, total))
    assert len(space) == math.comb(total - 1, parts - 1)
    index = {c: i for i, c in enumerate(space)}
    counts = np.zeros(len(space), np.int64)
    rng = Rng(9)
    for _ in range(draws):
        c = sample_uniform_composition(parts, total, rng)
        assert c.sum() == total and c.min() >= 1
        counts[index[tuple(c.tolist())]] += 1
    assert stats.chisquare(counts).pvalue > 1e-3
    p = 1 / len(space)
    sigma = math.sqrt(p * (1 - p) / draws)
    assert np.all(np.abs(counts / draws - p) <= 3.5 * sigma)


# -- coupling ---------------------------------------------------------------------------

def test_coupling_q_in_range_and_dominance():
    full = 0
    for i in range(100):
        rep = couple_geom_exp(1e-3, 6.0, 10_000, Rng(12).child(i))
        assert rep.q_in_range
        assert np.all((rep.q >= 0) & (rep.q <= 1))
        full += int(rep.dominance_fraction == 1.0)
    assert full >= 99


def test_coupling_construction_dominates_without_redraw():
    rep = couple_geom_exp(1e-3, 6.0, 10_000, Rng(1))
    kept = rep.X <= rep.threshold
    assert np.all(rep.X[kept] >= np.ceil(rep.Y[kept] / rep.gamma_prime))


def test_coupling_gamma_prime_equation():
    g, m = 1e-3, 10_000
    rep = couple_geom_exp(g, 6.0, m, Rng(0))
    big = m / g
    assert big - big ** (2 / 3) == pytest.approx(m / rep.gamma_prime, rel=1e-12)


def test_coupled_marginal_is_geometric():
    xs = []
    for i in range(20):
        rep = couple_geom_exp(1e-3, 6.0, 10_000, Rng(40).child(i))
        gp = rep.gamma_prime
        xs.append(rep.X)
    x = np.concatenate(xs)
    # equal-probability bins of Geom(gp)
    edges = np.unique(stats.geom.ppf(np.linspace(0, 1, 41)[1:-1], gp).astype(np.int64))
    bins = np.concatenate(([0], edges, [np.iinfo(np.int64).max]))
    obs = np.histogram(x, bins=bins)[0]
    # histogram bins are [a, b), and geom.cdf(k) = P(X <= k)
    cdf = np.concatenate(([0.0], stats.geom.cdf(edges - 1, gp), [1.0]))
    exp = np.diff(cdf) * len(x)
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_coupling_parameter_errors():
    with pytest.raises(ValueError):
        couple_geom_exp(0.5, 6.0, 100, Rng(0))
    with pytest.raises(ValueError):
        couple_geom_exp(1e-3, 8.0, 100, Rng(0))
