import math

import numpy as np
import pytest

from vhstab import instances
from vhstab.dsl import parse
from vhstab.grid import Domain, bielecki_norm, sample
from vhstab.operator import apply_A
from vhstab.problem import ProblemInstance
from vhstab.solver import NotConverged, QOutOfRange, a_priori_bound, solve

XYZ = {"x", "y", "z"}


def series(lam, xyz, terms=9):
    return sum((lam * xyz) ** k / math.factorial(k) ** 3 for k in range(terms))


def test_series_oracle_value():
    assert series(0.5, 1.0) == pytest.approx(1.5318332, abs=1e-7)
    # terms beyond k = 8 are below 1e-13
    assert abs(series(0.5, 1.0, 20) - series(0.5, 1.0)) < 1e-13


def test_integral_free_problem():
    d = Domain(L=1.0, n=5)
    p = ProblemInstance.from_strings(g="x+y+z", domain=d)
    r = solve(p)
    first = sample(parse("x+y+z", XYZ), d)
    # u_1 is already the fixed point; the second application confirms it
    assert r.converged and r.iterations == 2
    assert r.residual_history[-1] == 0.0
    np.testing.assert_array_equal(r.u_star.values, first.values)


def test_lin_zero_lambda():
    r = solve(instances.lin(0.0))
    assert r.iterations == 2
    assert np.all(r.u_star.values == 1.0)


@pytest.mark.parametrize("n", [9, 17])
def test_lin_matches_series(n):
    p = instances.lin(0.5, n=n)
    r = solve(p)
    assert r.converged
    d = p.domain
    x, y, z = d.mesh()
    exact = np.vectorize(lambda s: series(0.5, s))(np.broadcast_to(x * y * z, d.shape))
    # O(h^2) trapezoid error
    assert np.max(np.abs(r.u_star.values - exact)) <= 0.05 * d.h ** 2


def test_report_invariants(certified):
    for p in certified.values():
        r = solve(p)
        assert r.converged
        assert len(r.residual_history) == r.iterations
        assert len(r.observed_ratios) == r.iterations - 1
        assert r.residual_history[-1] <= r.tol
        assert all(ratio >= 0 for ratio in r.observed_ratios)
        q = p.lip.l_g * p.lip.l_h + p.lip.l_1 + p.lip.l_2
        hist = r.residual_history
        for a, b in zip(hist, hist[1:]):
            assert b <= a + 0.05 * hist[0]
        assert max(r.observed_ratios) <= q + 0.05
        assert bielecki_norm(r.u_star - apply_A(p, r.u_star)) <= 2 * r.tol


def test_a_priori_bound_consistency(certified):
    for p in certified.values():
        r = solve(p)
        q_obs = max(r.observed_ratios)
        u = sample(parse("0", XYZ), p.domain)
        for k in range(r.iterations):
            # the estimate lives in the weighted norm; sup_diff exceeds it once tau > 0
            assert bielecki_norm(u - r.u_star) <= a_priori_bound(q_obs, r.residual_history[0], k) + 2 * r.tol
            u = apply_A(p, u)


def test_initial_guess_independence(certified):
    for p in certified.values():
        a = solve(p)
        b = solve(p, u0=sample(parse("x+y+z", XYZ), p.domain))
        assert bielecki_norm(a.u_star - b.u_star) <= 2 * a.tol


def test_not_converged():
    p = instances.lin(0.5)
    r = solve(p, tol=1e-14, max_iter=2)
    assert not r.converged and r.iterations == 2
    with pytest.raises(NotConverged) as info:
        solve(p, tol=1e-14, max_iter=2, strict=True)
    assert info.value.report.iterations == 2


def test_solver_argument_checks():
    p = instances.lin(0.5)
    with pytest.raises(ValueError):
        solve(p, tol=0)
    with pytest.raises(ValueError):
        solve(p, max_iter=0)


def test_deterministic():
    p = instances.nonlinear()
    a, b = solve(p), solve(p)
    assert np.array_equal(a.u_star.values, b.u_star.values)
    assert a.residual_history == b.residual_history


@pytest.mark.parametrize(
    "q, first, k, expected",
    [(0.0, 3.0, 1, 0.0), (0.0, 3.0, 5, 0.0), (0.5, 1.0, 0, 2.0), (0.5, 1.0, 3, 0.25)],
)
def test_a_priori_bound(q, first, k, expected):
    assert a_priori_bound(q, first, k) == expected


@pytest.mark.parametrize("q", [1.0, 1.5, -0.1])
def test_a_priori_bound_rejects_q(q):
    with pytest.raises(QOutOfRange):
        a_priori_bound(q, 1.0, 1)
