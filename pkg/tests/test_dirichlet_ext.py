import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovtrace.dirichlet_ext import (DirichletExtension, build_boundary_kernel,
                                      extend_dirichlet, kernel_derivative_constant, node_count,
                                      pointwise_bound_ratio, vertical_holder_slope)
from besovtrace.funcspace import (BoundaryFunction, BoundaryJet, NormParams, bump, constant, hat_profile,
                                  make_atom, monomial, scalar_jet, trace_jet)
from besovtrace.geometry import abs_graph, dist_to_boundary, half_plane, sawtooth_graph
from besovtrace.harness import cusp_data

FLAT = half_plane((-8, 8))
SAW = sawtooth_graph(0.5, 1.0, (-8, 8))


def _bf_const(c):
    return BoundaryFunction(lambda y: np.full(np.shape(y), float(c)), lambda y: np.zeros(np.shape(y)))


@pytest.mark.parametrize("domain", [FLAT, SAW, abs_graph(1.0)], ids=["flat", "saw", "abs"])
def test_kernel_has_unit_mass(domain):
    K = build_boundary_kernel(domain)
    x = np.array([0.1, -0.4, 0.0])
    t = domain.psi(x) + np.array([0.05, 0.6, 1.3])
    assert np.allclose(K.normalization(x, t), 1.0, atol=1e-12)


def test_kernel_scale_limit():
    with pytest.raises(ValueError):
        build_boundary_kernel(SAW, a=1.0)


@pytest.mark.parametrize("domain", [FLAT, SAW], ids=["flat", "saw"])
def test_kernel_window_stays_within_twice_the_distance(domain):
    K = build_boundary_kernel(domain)
    x = np.linspace(-1, 1, 7)
    t = domain.psi(x) + 0.3
    d = dist_to_boundary(domain, np.stack([x, t], -1))
    assert np.all(K.support_radius(x, t) <= 2 * d)


def test_flat_kernel_derivatives_scale_invariant():
    # |d^g K| dist^(1+|g|) is unchanged under dilation on the half-plane
    K = build_boundary_kernel(FLAT)
    a = kernel_derivative_constant(K, [[0.0, 1.0]], 2)
    b = kernel_derivative_constant(K, [[0.0, 0.01]], 2)
    assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(0.01, 2), st.floats(-10, 10))
def test_constants_reproduced_exactly(x, h, c):
    ext = DirichletExtension(scalar_jet(_bf_const(c)), build_boundary_kernel(SAW), max_nodes=256)
    t = float(SAW.psi(np.array(x))) + h
    assert ext(np.array([x]), np.array([t]))[0] == pytest.approx(c, abs=1e-12 * (1 + abs(c)))


@pytest.mark.parametrize("domain", [FLAT, SAW, abs_graph(0.8)], ids=["flat", "saw", "abs"])
@pytest.mark.parametrize("u", [monomial((1, 0)) - 2.0 * monomial((0, 1)) + 0.5,
                               constant(-3.0)], ids=["linear", "constant"])
def test_linear_polynomials_reproduced_with_m2(domain, u):
    ext = DirichletExtension(trace_jet(u, domain, 2), build_boundary_kernel(domain, 2))
    x = np.array([0.3, -0.6, 1.1, 0.5])
    t = domain.psi(x) + np.array([0.7, 0.13, 0.9, 0.02])
    assert np.max(np.abs(ext(x, t) - u(x, t))) < 1e-10
    # first derivatives of the extension match too
    assert np.allclose(ext.deriv((1, 0), x, t), u.deriv((1, 0), x, t), atol=1e-7)


def test_extension_derivatives_match_differences():
    f = bump((0.0, 0.0), 1.0, 3)
    jet = trace_jet(f, FLAT, 1)
    ext = DirichletExtension(jet, build_boundary_kernel(FLAT))
    x, t, h = np.array([0.2]), np.array([0.4]), 1e-4
    fd = (ext(x + h, t) - ext(x - h, t)) / (2 * h)
    assert ext.deriv((1, 0), x, t) == pytest.approx(fd, rel=1e-6)
    grad = ext.gradient(1)
    assert grad.magnitude(x, t) == pytest.approx(
        math.hypot(ext.deriv((1, 0), x, t)[0], ext.deriv((0, 1), x, t)[0]))


def test_extend_dirichlet_errors():
    K = build_boundary_kernel(FLAT, 2)
    with pytest.raises(ValueError):
        extend_dirichlet(BoundaryJet(2, {(0, 0): _bf_const(1.0)}), K, np.array([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        extend_dirichlet(scalar_jet(_bf_const(1.0)), K, np.array([[0.0, -1.0]]))
    with pytest.raises(ValueError):
        extend_dirichlet(scalar_jet(_bf_const(1.0)), K, np.array([[0.0, 1e-5]]), strict=True)


def test_node_count_capped():
    n = node_count(np.array([1.0, 1e-2, 1e-6]), max_nodes=256)
    assert list(n) == [32, 256, 256]
    assert list(node_count(np.array([0.05, 0.5]))) == [160, 32]


@pytest.mark.parametrize("theta", [0.3, 0.5, 0.7])
def test_vertical_approach_recovers_hoelder_exponent(theta):
    f = cusp_data(0.3, theta)
    ext = DirichletExtension(scalar_jet(f), build_boundary_kernel(SAW))
    s, dist, dev = vertical_holder_slope(ext, f, 0.3, np.logspace(-3, -1, 7))
    assert s == pytest.approx(theta, abs=0.05)
    assert np.all(np.diff(dev) > 0)


def test_pointwise_bound_uniform_in_height():
    a = make_atom("positive", 0.0, 1.0, hat_profile(), NormParams(1.0, 0.5), SAW)
    jet = scalar_jet(a.as_boundary_function())
    K = build_boundary_kernel(SAW)
    ratios = [pointwise_bound_ratio(jet, K, np.array([0.2, float(SAW.psi(np.array(0.2))) + h]))
              for h in (0.05, 0.2, 0.6)]
    assert all(0 < r < 10 for r in ratios)
    with pytest.raises(ValueError):
        pointwise_bound_ratio(BoundaryJet(2, {}), K, np.array([0.0, 1.0]))
