import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovtrace.dirichlet_ext import DirichletExtension, build_boundary_kernel
from besovtrace.dirichlet_trace import (build_interior_kernel, smooth_reproject, smoothed_field,
                                        smoothing_bound_constants, trace_besov_experiment,
                                        trace_whitney_array)
from besovtrace.funcspace import (Field, NormParams, bump, constant, hat_profile, make_atom,
                                  monomial, multiindices_upto, radial_power, scalar_jet)
from besovtrace.geometry import dist_to_boundary, half_plane, sawtooth_graph

FLAT = half_plane((-8, 8))
SAW = sawtooth_graph(0.5, 1.0, (-8, 8))


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_interior_kernel_mass_and_moments(m):
    K = build_interior_kernel(m)
    assert K.moment((0, 0)) == pytest.approx(1.0, abs=1e-12)
    for z in multiindices_upto(m):
        if sum(z) > 0:
            assert abs(K.moment(z)) < 1e-10


@pytest.mark.parametrize("a", [0.0, 0.75])
def test_interior_kernel_support_range(a):
    with pytest.raises(ValueError):
        build_interior_kernel(1, support_a=a)


POLYS = {
    1: [constant(2.5)],
    2: [constant(-1.0), monomial((1, 0)) + 3.0 * monomial((0, 1))],
    3: [monomial((2, 0)) - monomial((1, 1)) + 0.5 * monomial((0, 2)) + 1.0],
}


@pytest.mark.parametrize("domain", [FLAT, SAW], ids=["flat", "saw"])
@pytest.mark.parametrize("m, u", [(m, u) for m, us in POLYS.items() for u in us])
def test_smoothing_fixes_polynomials(domain, m, u):
    K = build_interior_kernel(m, domain=domain)
    x = np.array([0.3, -0.7, 1.2])
    pts = np.stack([x, domain.psi(x) + np.array([0.05, 0.4, 1.1])], -1)
    out = smooth_reproject(u, K, pts)[(0, 0)]
    assert np.max(np.abs(out - u(pts[:, 0], pts[:, 1]))) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(0.02, 1.0))
def test_smoothing_local_bounds(x, h):
    phi = bump((0.1, 0.2), 1.0, 3) + radial_power(1.5, (0.0, -0.1))
    K = build_interior_kernel(2, domain=SAW)
    pt = np.array([[x, float(SAW.psi(np.array(x))) + h]])
    top, low = smoothing_bound_constants(phi, K, pt)
    assert np.all(top < 50) and np.all(low < 50)


def test_smoothed_field_wraps_reprojection():
    K = build_interior_kernel(1)
    f = bump((0.0, 0.5), 0.8, 3)
    T = smoothed_field(f, K)
    pts = np.array([[0.1, 0.4]])
    ref = smooth_reproject(f, K, pts, 1)
    assert T(0.1, 0.4) == pytest.approx(ref[(0, 0)][0])
    assert T.deriv((0, 1), 0.1, 0.4) == pytest.approx(ref[(0, 1)][0])


@pytest.mark.parametrize("m, theta", [(1, 0.5), (2, 0.5), (1, 0.3)])
def test_smoothing_gradient_decay_rate(m, theta):
    # |grad^m T phi| ~ dist^(theta - 1) for phi of Hoelder order m - 1 + theta at a boundary point
    phi = radial_power(m - 1 + theta, (0.5, 0.0))
    K = build_interior_kernel(m)
    h = np.logspace(-3, -1, 7)
    pts = np.stack([np.full_like(h, 0.5), h], -1)
    jet = smooth_reproject(phi, K, pts, m)
    mag = np.sqrt(sum(jet[al] ** 2 for al in jet if sum(al) == m))
    slope = np.polyfit(np.log(dist_to_boundary(FLAT, pts)), np.log(mag), 1)[0]
    assert slope == pytest.approx(theta - 1, abs=0.05)


def test_trace_of_smooth_field_is_restriction():
    u = bump((0.1, 0.0), 1.5, 3)
    grid = np.linspace(-1, 1, 21)
    tr = trace_whitney_array(u, SAW, grid, 1, levels=8)
    assert tr.ok
    assert np.max(np.abs(tr.values[(0, 0)] - u(grid, SAW.psi(grid)))) < 1e-4
    tr2 = trace_whitney_array(u, FLAT, grid, 2, levels=8)
    assert set(tr2.values) == {(1, 0), (0, 1)}
    assert np.allclose(tr2.values[(0, 1)], u.deriv((0, 1), grid, 0 * grid), atol=1e-4)


def test_field_without_trace_is_flagged():
    u = Field(lambda x, t: np.sin(np.log(np.maximum(t, 1e-300))) + 0 * x)
    tr = trace_whitney_array(u, FLAT, np.linspace(-1, 1, 5), 1, levels=12)
    assert not tr.ok


def test_round_trip_of_positive_atom():
    a = make_atom("positive", 0.1, 1.0, hat_profile(), NormParams(1.0, 0.5), SAW)
    ext = DirichletExtension(scalar_jet(a.as_boundary_function()), build_boundary_kernel(SAW),
                             max_nodes=256)
    grid = np.linspace(-0.6, 0.8, 9)
    tr = trace_whitney_array(ext, SAW, grid, 1, levels=8)
    assert np.max(np.abs(tr.values[(0, 0)] - a(grid))) < 0.05 * np.max(np.abs(a(grid)))


def test_trace_experiment_on_zero_and_bumps():
    P = NormParams(2.0, 0.5)
    # both sides vanish for the zero field; data outside the interval count as zero,
    # so nonzero constants are not used here
    out = trace_besov_experiment(constant(0.0), FLAT, P, (-1, 1), 64, 6, (-1.5, 1.5, 1.5), 5)
    assert out["ratio"] == 0.0
    out = trace_besov_experiment(bump((0.0, 0.0), 0.8, 3), FLAT, P, (-1, 1), 128, 8,
                                 (-1.5, 1.5, 1.5), 6)
    assert 1e-2 < out["ratio"] < 1e2 and not out["flagged"]
    inf = trace_besov_experiment(bump((0.0, 0.0), 0.8, 3), FLAT, NormParams(math.inf, 0.5, math.inf),
                                 (-1, 1), 128, 8, (-1.5, 1.5, 1.5), 6)
    assert math.isfinite(inf["ratio"]) and inf["ratio"] > 0
