import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovtrace.funcspace import (AtomValidationError, BoundaryFunction, NormParams, atom_integral,
                                  atom_sum, bump, constant, cosine_wave_profile, fd_derivative,
                                  gradient_array, hat_profile, make_atom, mollify, monomial,
                                  multiindices, multiindices_upto, odd_bump_profile, parse_zoo,
                                  power_of_height, radial_power, smooth_bump_profile,
                                  square_wave_profile, taylor_polynomial, trace_jet,
                                  validate_atom, weierstrass_hoelder, zoo_field)
from besovtrace.geometry import half_plane, sawtooth_graph

SAW = sawtooth_graph(0.5, 1.0, (-8, 8))


@pytest.mark.parametrize("kw", [
    dict(p=1.0, theta=0.0), dict(p=1.0, theta=1.0), dict(p=1.0, theta=0.5, q=0.5),
    dict(p=1.0, theta=0.5, m=0), dict(p=0.6, theta=0.5),
])
def test_norm_params_reject(kw):
    with pytest.raises(ValueError):
        NormParams(**kw)


def test_norm_params_lower_p_limit():
    # p must exceed (d-1)/(d-1+theta) = 2/3 at theta = 1/2
    NormParams(0.67, 0.5)
    with pytest.raises(ValueError):
        NormParams(2 / 3, 0.5)
    assert NormParams(2.0, 0.25).weight_exponent == pytest.approx(0.5)


@pytest.mark.parametrize("order, count", [(0, 1), (1, 2), (2, 3), (3, 4)])
def test_multiindices_count(order, count):
    assert len(multiindices(order)) == count
    assert len(multiindices_upto(order)) == sum(range(1, count + 1))


FIELDS = [
    bump((0.1, 0.2), 0.9, 3),
    monomial((2, 1), (0.3, -0.1)),
    power_of_height(1.5),
    radial_power(2.5, (0.2, -0.4)),
    bump((0.0, 0.0), 1.0) * monomial((1, 1)),
    constant(3.0) + 2.0 * monomial((0, 2)),
]


@pytest.mark.parametrize("f", FIELDS, ids=lambda f: f.name)
@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (1, 1), (2, 0)])
def test_analytic_derivatives_match_differences(f, alpha):
    x = np.array([0.31, -0.2, 0.55])
    t = np.array([0.4, 0.7, 0.25])
    exact = f.deriv(alpha, x, t)
    approx = fd_derivative(f, alpha, x, t, 1e-3)
    assert np.allclose(exact, approx, rtol=1e-4, atol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.25, 4.0), st.floats(-1, 1), st.floats(0.05, 1.5))
def test_scaled_field_chain_rule(lam, x, t):
    f = bump((0.2, 0.3), 1.2, 3)
    g = f.scaled(lam)
    assert g(x, t) == pytest.approx(f(lam * x, lam * t))
    assert g.deriv((1, 1), x, t) == pytest.approx(lam ** 2 * f.deriv((1, 1), lam * x, lam * t))


def test_gradient_array_components():
    u = monomial((2, 1))
    G = gradient_array(u, 2)
    x, t = np.array(0.5), np.array(2.0)
    assert float(G[(2, 0)](x, t)) == pytest.approx(2 * 2.0)
    assert float(G[(1, 1)](x, t)) == pytest.approx(2 * 0.5)
    assert float(G[(0, 2)](x, t)) == 0.0
    assert G.magnitude(x, t) == pytest.approx(math.sqrt(16 + 1))


def test_zoo_parsing_and_errors():
    f = parse_zoo("bump:cx=0.5,ct=0.2,radius=0.3,power=2")
    assert f(0.5, 0.2) == pytest.approx(1.0)
    assert f(1.0, 0.2) == 0.0
    with pytest.raises(ValueError):
        zoo_field("no_such_field")


def test_radial_power_homogeneity():
    f = radial_power(0.7)
    assert f(0.6, 0.8) == pytest.approx(1.0)
    assert f(1.2, 1.6) == pytest.approx(2.0 ** 0.7)


@pytest.mark.parametrize("profile", [hat_profile(), smooth_bump_profile() * 0.5],
                         ids=["hat", "bump3"])
@pytest.mark.parametrize("r", [0.25, 1.0, 3.0])
def test_positive_atom_bounds(profile, r):
    P = NormParams(1.5, 0.4)
    a = make_atom("positive", 0.2, r, profile, P, SAW)
    x = np.linspace(a.support[0], a.support[1], 2001)
    assert np.max(np.abs(a(x))) <= r ** (0.4 - 1 / 1.5) * (1 + 1e-12)
    lo, hi = a.support
    # support sits inside the Euclidean ball of radius r on a slope-1/2 graph
    assert (hi - lo) / 2 * math.sqrt(1 + 0.25) == pytest.approx(r)


@pytest.mark.parametrize("profile", [square_wave_profile(), odd_bump_profile(),
                                     cosine_wave_profile(2)], ids=["square", "oddbump", "sine2"])
@pytest.mark.parametrize("domain", [None, SAW], ids=["flat", "sawtooth"])
def test_negative_atom_has_zero_mean(profile, domain):
    a = make_atom("negative", -0.3, 0.7, profile, NormParams(1.0, 0.5), domain)
    assert abs(atom_integral(a)) < 1e-10
    assert validate_atom(a)


def test_steep_positive_atom_rejected():
    with pytest.raises(AtomValidationError):
        make_atom("positive", 0.0, 1.0, smooth_bump_profile(), NormParams(1.0, 0.5))


@pytest.mark.parametrize("kind, r", [("neutral", 1.0), ("positive", 0.0), ("negative", -1.0)])
def test_make_atom_rejects_arguments(kind, r):
    with pytest.raises(ValueError):
        make_atom(kind, 0.0, r, hat_profile(), NormParams(1.0, 0.5))


def test_atom_sum_is_linear():
    P = NormParams(1.0, 0.5)
    a = make_atom("positive", 0.0, 1.0, hat_profile(), P)
    b = make_atom("negative", 1.0, 0.5, square_wave_profile(), P)
    f = atom_sum([(2.0, a), (-0.5, b)], c0=1.0)
    x = np.linspace(-2, 2, 11)
    assert np.allclose(f(x), 1.0 + 2.0 * a(x) - 0.5 * b(x))


def test_trace_jet_restricts_derivatives():
    u = monomial((1, 2))
    jet = trace_jet(u, SAW, 2)
    y = np.linspace(-1, 1, 9)
    psi = SAW.psi(y)
    assert np.allclose(jet.comps[(0, 0)](y), y * psi ** 2)
    assert np.allclose(jet.comps[(0, 1)](y), 2 * y * psi)
    assert set(jet.whitney_array().comps) == {(1, 0), (0, 1)}


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 1))
def test_taylor_polynomial_reproduces_quadratics(x1, y1, x2):
    # the degree-2 Taylor jet of a quadratic is exact
    u = monomial((1, 1)) + monomial((2, 0)) + 3.0 * monomial((0, 1))
    y = np.array([y1, 0.0])
    x = np.array([x1, x2])
    jet = {z: u.deriv(z, y[0], y[1]) for z in multiindices_upto(2)}
    assert taylor_polynomial(jet, x, y, (0, 0), 3) == pytest.approx(u(x1, x2))
    with pytest.raises(ValueError):
        taylor_polynomial({(0, 0): 1.0}, x, y, (0, 0), 2)


def test_weierstrass_is_hoelder():
    f = weierstrass_hoelder(0.5, 14)
    h = 2.0 ** -np.arange(4, 12)
    inc = np.array([abs(f(np.array(hh)) - f(np.array(0.0))) for hh in h])
    assert np.all(inc <= 6 * h ** 0.5)


def test_mollify_reproduces_linear_fields():
    v = monomial((1, 0)) + 2.0 * monomial((0, 1))
    m = mollify(v, 0.05, half_plane())
    assert m(0.3, 0.7) == pytest.approx(v(0.3, 0.7), abs=1e-12)


def test_boundary_function_algebra():
    f = BoundaryFunction(np.sin, np.cos)
    g = f + f * 2.0
    assert g(np.array(0.5)) == pytest.approx(3 * math.sin(0.5))
    assert f.deriv(np.array(0.0)) == 1.0
