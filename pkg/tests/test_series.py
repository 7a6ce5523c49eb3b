import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from resforge.series import (
    DimensionError,
    FormalSeries,
    HamiltonianGerm,
    SymplecticMapGerm,
    dumps,
    hamiltonian_flow_map,
    lie_exp,
    loads,
    poisson,
    random_series,
    series_from_dict,
    series_to_dict,
)


def var(i, nvars=1, cap=4, **kw):
    return FormalSeries.variable(i, nvars, cap, **kw)


def one(nvars=1, cap=4, **kw):
    return FormalSeries.constant(1.0, nvars, cap, **kw)


def same(a, b, tol=0.0):
    return np.max(np.abs(a.coeffs - b.coeffs), initial=0.0) <= tol


# -- add / mul -------------------------------------------------------------------

def test_add_cancellation():
    x = var(0)
    s = (one() + x) + (one() - x)
    assert s.terms() == {((0,), 0): 2}


def test_add_zero_identity():
    p = random_series(np.random.default_rng(1), 2, [1, 2, 3], 3)
    assert same(p + FormalSeries.zeros(2, 3), p)


def test_add_truncation_drops_high_degree():
    x2 = FormalSeries.from_terms(1, {(2,): 1.0}, 2)
    assert (x2 + x2).with_cap(1).is_zero


def test_add_dimension_mismatch():
    with pytest.raises(DimensionError):
        var(0, 1) + var(0, 2)


def test_mul_binomial():
    x = var(0, cap=2)
    sq = (one(cap=2) + x) * (one(cap=2) + x)
    assert sq.terms() == {((0,), 0): 1, ((1,), 0): 2, ((2,), 0): 1}


def test_mul_unit():
    p = random_series(np.random.default_rng(2), 2, [0, 1, 2], 4, real=False)
    assert same(p * one(2, 4), p)


def test_graded_truncation_prunes_high_action_power():
    # order r = 1 keeps h^0 terms through degree 2 only
    xxi = FormalSeries.from_terms(2, {((1, 1), 0): 1.0}, order=1)
    assert not xxi.is_zero
    assert (xxi * xxi).is_zero


def test_graded_cap_depends_on_h_power():
    s = FormalSeries.from_terms(1, {((4,), 0): 1.0, ((4,), 1): 1.0, ((2,), 1): 1.0}, order=2)
    assert set(s.terms()) == {((4,), 0), ((2,), 1)}


def test_reciprocal_and_power():
    x = var(0, cap=6)
    s = one(cap=6) - x
    inv = s.reciprocal()
    assert all(abs(inv.coeff((k,)) - 1) < 1e-15 for k in range(7))
    assert same((s * inv), one(cap=6), 1e-15)
    assert same(s ** -2, inv * inv, 1e-14)


# -- Poisson bracket ----------------------------------------------------------------

def test_poisson_anchor():
    a = FormalSeries.from_terms(2, {(1, 1): 1.0}, 4)
    b = FormalSeries.from_terms(2, {(2, 0): 0.5, (0, 2): -0.5}, 4)
    assert poisson(a, b).terms() == {((2, 0), 0): 1, ((0, 2), 0): 1}


def test_poisson_antisymmetry_and_sign():
    a = random_series(np.random.default_rng(3), 2, [2, 3], 5)
    assert poisson(a, a).is_zero
    x, xi = var(0, 2), var(1, 2)
    assert poisson(x, xi).terms() == {((0, 0), 0): -1}


def test_poisson_odd_variables():
    with pytest.raises(DimensionError):
        poisson(var(0, 3), var(1, 3))


# total degree <= 3 keeps every nested bracket below the cap of 5
exps = st.dictionaries(
    st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)).filter(
        lambda e: sum(e) <= 3),
    st.floats(-2, 2, allow_nan=False), min_size=1, max_size=5)


@settings(max_examples=25, deadline=None)
@given(exps, exps, exps)
def test_jacobi_identity(ta, tb, tc):
    a, b, c = (FormalSeries.from_terms(4, t, 5) for t in (ta, tb, tc))
    total = poisson(a, poisson(b, c)) + poisson(b, poisson(c, a)) + poisson(c, poisson(a, b))
    scale = max(1.0, a.max_abs() * b.max_abs() * c.max_abs())
    assert total.max_abs() <= 1e-12 * scale


@settings(max_examples=25, deadline=None)
@given(exps, exps, exps)
def test_mul_commutative_associative_distributive(ta, tb, tc):
    a, b, c = (FormalSeries.from_terms(4, t, 9) for t in (ta, tb, tc))
    scale = max(1.0, a.max_abs() * b.max_abs() * c.max_abs()) * 1e-12
    assert (a * b - b * a).max_abs() <= scale
    assert ((a * b) * c - a * (b * c)).max_abs() <= scale
    assert (a * (b + c) - (a * b + a * c)).max_abs() <= scale


# -- flow maps -----------------------------------------------------------------------

def test_linear_flow_exact():
    mu = 0.7
    p = HamiltonianGerm(FormalSeries.from_terms(2, {(1, 1): mu}, 6))
    g = hamiltonian_flow_map(p, 6)
    assert abs(g.components[0].coeff((1, 0)) - math.exp(mu)) < 1e-14
    assert abs(g.components[1].coeff((0, 1)) - math.exp(-mu)) < 1e-14
    assert sum(len(c.terms()) for c in g.components) == 2


def test_flow_against_rk_integration():
    mu, c = 0.8, 0.3
    order = 9
    p = HamiltonianGerm(FormalSeries.from_terms(2, {(1, 1): mu, (2, 2): c}, order + 1))
    g = hamiltonian_flow_map(p, order)

    def rhs(_, z):
        x, xi = z
        # dx/dt = d_xi p, dxi/dt = -d_x p
        return [mu * x + 2 * c * x * x * xi, -(mu * xi + 2 * c * x * xi * xi)]

    for angle in np.linspace(0, 2 * np.pi, 5, endpoint=False):
        z0 = 0.05 * np.array([np.cos(angle), np.sin(angle)])
        sol = solve_ivp(rhs, (0, 1), z0, method="DOP853", rtol=1e-13, atol=1e-15)
        approx = np.real(g(z0))
        assert np.max(np.abs(approx - sol.y[:, -1])) < 1e-9


def test_flow_order_one_is_linear():
    rng = np.random.default_rng(5)
    mu = 0.5
    extra = random_series(rng, 2, [3, 4], 4, scale=0.2)
    p = HamiltonianGerm(FormalSeries.from_terms(2, {(1, 1): mu}, 4) + extra)
    g = hamiltonian_flow_map(p, 1)
    assert np.allclose(g.linear_part(), np.diag([math.exp(mu), math.exp(-mu)]), atol=1e-15)


def test_flow_is_symplectic():
    rng = np.random.default_rng(6)
    quad = FormalSeries.from_terms(4, {(1, 0, 1, 0): 0.6, (0, 1, 0, 1): 1.1}, 6)
    p = HamiltonianGerm(quad + random_series(rng, 4, [3, 4, 5, 6], 6, density=0.3, scale=0.3))
    g = hamiltonian_flow_map(p, 5)
    J = np.real(g.linear_part())
    Om = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    assert np.max(np.abs(J.T @ Om @ J - Om)) < 1e-13
    assert g.symplectic_defect() < 1e-11


def test_lie_exp_pullback_composition():
    # exp(H_a) exp(-H_a) f = f
    rng = np.random.default_rng(7)
    a = random_series(rng, 2, [3], 6, scale=0.5)
    f = random_series(rng, 2, [1, 2], 6)
    back = lie_exp(a, lie_exp(a, f), sign=-1.0)
    assert (back - f).max_abs() < 1e-13


def test_germ_inverse_roundtrip():
    rng = np.random.default_rng(8)
    p = HamiltonianGerm(FormalSeries.from_terms(2, {(1, 1): 0.4}, 5)
                        + random_series(rng, 2, [3, 4, 5], 5, scale=0.3))
    g = hamiltonian_flow_map(p, 4)
    ident = SymplecticMapGerm.identity(1, 4)
    assert g.compose(g.inverse()).max_coefficient_diff(ident) < 1e-12


# -- serialization ------------------------------------------------------------------

def test_json_roundtrip_bit_exact():
    rng = np.random.default_rng(9)
    s = random_series(rng, 3, [0, 1, 2, 3], 3, real=False, scale=1e-3)
    s = s * (1.0 / 3.0)
    back = loads(dumps(s))
    assert np.array_equal(back.coeffs, s.coeffs)
    data = series_to_dict(s)
    assert set(data) >= {"nvars", "terms"}
    assert set(data["terms"][0]) == {"exp", "hpow", "re", "im"}
    assert np.array_equal(series_from_dict(json.loads(json.dumps(data))).coeffs, s.coeffs)


def test_json_roundtrip_graded():
    s = FormalSeries.from_terms(2, {((1, 1), 0): 0.1, ((0, 0), 1): 1 / 7, ((2, 0), 1): -2.5j}, order=2)
    back = loads(dumps(s))
    assert back.terms() == s.terms()
    assert back.graded and back.max_hpow == 2
