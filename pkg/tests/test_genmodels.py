from __future__ import annotations

import math

import numpy as np
import pytest

from longcycle.genmodels import (
    DegreeClassPartition,
    InfeasibleError,
    degree_class_census,
    expected_class_degree_count,
    mean_poisson_atleast,
    sample_conditioned_degrees,
    sample_gnm,
    sample_sequence_graph,
    solve_lambda,
)
from longcycle.multigraph import connected_components
from longcycle.rng import Rng


def _series_mean_atleast(lam, k, terms=200):
    # independent oracle: sum j * lam^j / j! over j >= k, divided by the mass
    num = den = 0.0
    term = math.exp(-lam)
    for j in range(terms):
        if j >= k:
            num += j * term
            den += term
        term *= lam / (j + 1)
    return num / den


# -- G^M(n, m) ---------------------------------------------------------------

def test_gnm_trivial_cases():
    g = sample_gnm(7, 0, Rng(0))
    assert g.n == 7 and g.m == 0
    g = sample_gnm(1, 1, Rng(0))
    assert g.endpoints(0) == (0, 0) and g.degree(0) == 2


def test_gnm_loop_fraction():
    n, m = 10, 100_000
    g = sample_gnm(n, m, Rng(3))
    e = g.edge_array()
    frac = float(np.mean(e[:, 0] == e[:, 1]))
    p = 2 / (n + 1)
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / m)


def test_gnm_pairs_uniform():
    # each of the n(n+1)/2 unordered pairs equally likely
    n, m = 4, 200_000
    e = sample_gnm(n, m, Rng(11)).edge_array()
    lo, hi = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
    _, counts = np.unique(lo * n + hi, return_counts=True)
    assert len(counts) == n * (n + 1) // 2
    from scipy.stats import chisquare

    assert chisquare(counts).pvalue > 1e-3


def test_gnm_reproducible():
    a = sample_gnm(1000, 3000, Rng(9)).edge_array()
    b = sample_gnm(1000, 3000, Rng(9)).edge_array()
    assert np.array_equal(a, b)


# -- lambda ----------------------------------------------------------------------

def test_lambda_degenerate_regular():
    p = DegreeClassPartition.all_y(100)
    assert solve_lambda(p, 150) == 0.0
    d = sample_conditioned_degrees(p, 150, Rng(0))
    assert np.all(d == 3)


def test_lambda_z_only_residual():
    n = 1000
    p = DegreeClassPartition(n, Z=np.arange(n))
    lam = solve_lambda(p, 1250)
    f = lam * math.expm1(lam) / (math.expm1(lam) - lam)
    assert abs(n * f - 2500) < 1e-12 * 2500


def test_lambda_series_oracle():
    n = 1000
    p = DegreeClassPartition.all_y(n)
    lam = solve_lambda(p, 1600)
    assert abs(_series_mean_atleast(lam, 3) - 3.2) < 1e-12
    assert abs(mean_poisson_atleast(lam, 3) - _series_mean_atleast(lam, 3)) < 1e-12


def test_lambda_small_lambda_accuracy():
    # near-degenerate targets stress the tail sums
    n = 10_000
    p = DegreeClassPartition.all_y(n)
    lam = solve_lambda(p, 15_001)
    assert abs(n * _series_mean_atleast(lam, 3) - 30_002) < 1e-6


def test_lambda_infeasible():
    p = DegreeClassPartition.all_y(10)
    with pytest.raises(InfeasibleError):
        solve_lambda(p, 14)


# -- degree vectors and graphs -----------------------------------------------------

def test_conditioned_degrees_forced_cases():
    n = 50
    d = sample_conditioned_degrees(DegreeClassPartition(n, Y2=np.arange(n)), n, Rng(1))
    assert np.all(d == 2)


def test_conditioned_degrees_census_y():
    n = 10_000
    m = 16_000
    p = DegreeClassPartition.all_y(n)
    lam = solve_lambda(p, m)
    d = sample_conditioned_degrees(p, m, Rng(2))
    assert int(d.sum()) == 2 * m
    assert d.min() >= 3
    for k in range(3, 9):
        closed = n * lam**k / (math.factorial(k) * (math.exp(lam) - 1 - lam - lam * lam / 2))
        assert abs(int(np.sum(d == k)) - closed) <= m**0.6
        assert abs(expected_class_degree_count(lam, n, 3, k) - closed) < 1e-9 * n


def test_two_vertex_pairing_frequencies():
    p = DegreeClassPartition(2, Y2=[0, 1])
    trials = 100_000
    rng = Rng(4)
    double = 0
    for i in range(trials):
        e = sample_sequence_graph(p, 2, rng.child(i)).edge_array()
        double += int(e[0, 0] != e[0, 1])
    q = 2 / 3
    assert abs(double / trials - q) <= 3 * math.sqrt(q * (1 - q) / trials)


def test_forced_single_edge():
    g = sample_sequence_graph(DegreeClassPartition(2, Y1=[0, 1]), 1, Rng(0))
    assert sorted(g.endpoints(0)) == [0, 1]


def test_cubic_sample_connected():
    n = 100_000
    p = DegreeClassPartition.all_y(n)
    connected = 0
    for i in range(100):
        g = sample_sequence_graph(p, 3 * n // 2, Rng(8).child(i))
        assert g.deg.min() == 3 and g.deg.max() == 3
        _, sizes = connected_components(g)
        connected += int(len(sizes) == 1)
    assert connected >= 99


@pytest.mark.slow
def test_class_constraints_and_max_degree():
    n = 100_000
    rng = Rng(6)
    p = DegreeClassPartition(
        n, Y1=np.arange(0, 1000), Y2=np.arange(1000, 3000), Z1=np.arange(3000, 3500),
        Z=np.arange(3500, 10_000), Y=np.arange(10_000, n)
    )
    m = 155_000
    ok = 0
    for i in range(100):
        g = sample_sequence_graph(p, m, rng.child(i))
        c = degree_class_census(g, p)
        assert c.violations == 0
        assert int(np.sum(g.deg)) == 2 * m
        ok += int(g.deg.max() <= math.log(n))
    assert ok >= 99


def test_census_examples():
    n = 300
    p = DegreeClassPartition.all_y(n)
    c = degree_class_census(sample_sequence_graph(p, 450, Rng(0)), p)
    assert c.cells == {("Y", 3): n} and c.violations == 0

    from longcycle.multigraph import Multigraph

    empty = degree_class_census(Multigraph(0, []), DegreeClassPartition(0))
    assert empty.cells == {} and empty.violations == 0


def test_census_z_closed_form():
    n = 10_000
    m = 12_500
    p = DegreeClassPartition(n, Z=np.arange(n))
    lam = solve_lambda(p, m)
    c = degree_class_census(sample_sequence_graph(p, m, Rng(12)), p)
    closed = lam * lam * n / (2 * (math.exp(lam) - 1 - lam))
    assert abs(c.count("Z", 2) - closed) <= m**0.6
    for k in range(2, 9):
        assert abs(c.count("Z", k) - expected_class_degree_count(lam, n, 2, k)) <= m**0.6


def test_sequence_graph_reproducible():
    p = DegreeClassPartition.all_y(5000)
    a = sample_sequence_graph(p, 8000, Rng(21)).edge_array()
    b = sample_sequence_graph(p, 8000, Rng(21)).edge_array()
    assert np.array_equal(a, b)
