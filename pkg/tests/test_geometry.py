import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovtrace.geometry import (DyadicCube, abs_graph, adapted_distance, composite_gl,
                                 dist_to_boundary, domain_from_spec, dyadic_cubes, graded_gl,
                                 half_plane, mollifier_constant, polar_disk_rule, sampled_graph,
                                 sawtooth_graph, tent_regions, whitney_decompose)
from besovtrace.harness import oracle

SAW = sawtooth_graph(0.5, 1.0, (-8, 8))


def test_half_plane_is_flat():
    D = half_plane()
    assert D.is_flat and D.M == 0.0
    assert np.all(D.psi(np.linspace(-3, 3, 7)) == 0.0)


@pytest.mark.parametrize("domain, M", [(abs_graph(1.0), 1.0), (abs_graph(0.3), 0.3), (SAW, 0.5)])
def test_lipschitz_constant_respected(domain, M):
    x = np.linspace(-3, 3, 4001)
    slopes = np.abs(np.diff(domain.psi(x)) / np.diff(x))
    assert slopes.max() <= M + 1e-12


def test_sampled_graph_interpolates():
    xs = np.array([-1.0, 0.0, 0.5, 2.0])
    ys = np.array([0.0, 0.4, 0.1, 0.3])
    D = sampled_graph(xs, ys)
    assert np.allclose(D.psi(xs), ys)
    assert D.M == pytest.approx(0.6)


@pytest.mark.parametrize("spec, kind", [
    ({"psi": "zero"}, "zero"),
    ('{"psi": "abs", "M": 0.5}', "abs"),
    ({"psi": "sawtooth", "M": 0.25, "window": [-2, 2]}, "sawtooth"),
    ({"psi": {"samples": [0.0, 0.2, 0.1]}, "window": [0, 1]}, "samples"),
])
def test_domain_from_spec(spec, kind):
    assert domain_from_spec(spec).kind == kind


@pytest.mark.parametrize("spec", [{"psi": "zero", "dim": 3}, {"psi": "cosh"}])
def test_domain_from_spec_rejects(spec):
    with pytest.raises(ValueError):
        domain_from_spec(spec)


def test_abs_distance_matches_dense_oracle():
    d = dist_to_boundary(abs_graph(1.0), np.array([[0.0, 1.0]]))[0]
    ref = oracle("dense_boundary_distance", {"domain": {"psi": "abs", "M": 1.0},
                                             "point": (0.0, 1.0)})["value"]
    assert d == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert ref == pytest.approx(1 / math.sqrt(2), abs=1e-4)


# frozen from the dense sampling oracle (2*10^5 samples plus refinement)
@pytest.mark.parametrize("pt, expected", [
    ((0.3, 0.4), 0.223606797749979),
    ((0.5, 0.27), 0.020000000000000018),
    ((-1.2, 0.9), 0.7158910531638177),
    ((2.25, 0.6), 0.42485291572496003),
])
def test_sawtooth_distance_frozen(pt, expected):
    assert dist_to_boundary(SAW, np.array([pt]))[0] == pytest.approx(expected, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.02, 2.0))
def test_distance_agrees_with_dense_sampling(x, h):
    t = float(SAW.psi(np.array(x))) + h
    d = dist_to_boundary(SAW, np.array([[x, t]]))[0]
    ref = oracle("dense_boundary_distance", {"domain": {"psi": "sawtooth", "M": 0.5,
                                                        "window": [-8, 8]},
                                             "point": (x, t), "samples": 20001})["value"]
    assert d <= ref + 1e-12
    assert d == pytest.approx(ref, abs=2e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3.0))
def test_adapted_distance_comparable_to_distance(x, h):
    # rho = c*delta with c*delta between (c - M) h and (c + M) h, and h/sqrt(1+M^2) <= dist <= h
    c, M = mollifier_constant(SAW), SAW.M
    t = float(SAW.psi(np.array(x))) + h
    delta = adapted_distance(SAW, np.array([x, t]))
    assert h / (c + M) * (1 - 1e-9) <= delta <= h / (c - M) * (1 + 1e-9)
    d = dist_to_boundary(SAW, np.array([[x, t]]))[0]
    assert 1 / (c + M) <= delta / d <= math.sqrt(1 + M * M) / (c - M)


def test_adapted_distance_flat_and_increasing():
    D = half_plane()
    assert adapted_distance(D, np.array([0.3, 0.8])) == pytest.approx(0.8 / mollifier_constant(D))
    ts = float(SAW.psi(np.array(0.37))) + np.linspace(0.05, 2.0, 40)
    vals = adapted_distance(SAW, np.stack([np.full_like(ts, 0.37), ts], -1))
    assert np.all(np.diff(vals) > 0)


def test_adapted_distance_rejects_outside_point():
    with pytest.raises(ValueError):
        adapted_distance(SAW, np.array([[0.0, -0.5]]))


@pytest.mark.parametrize("deg", range(8))
def test_composite_gl_exact_for_polynomials(deg):
    x, w = composite_gl(-1.0, 2.0, 3, 4, breaks=(0.3,))
    exact = (2.0 ** (deg + 1) - (-1.0) ** (deg + 1)) / (deg + 1)
    assert np.sum(w * x ** deg) == pytest.approx(exact, rel=1e-12)


def test_graded_rule_integrates_endpoint_singularity():
    x, w = graded_gl(0.0, 1.0, 60, 8)
    assert np.sum(w * x ** -0.5) == pytest.approx(2.0, rel=1e-8)


def test_polar_disk_rule_area_and_moments():
    pts, w = polar_disk_rule(6, 16)
    assert w.sum() == pytest.approx(math.pi)
    assert np.sum(w * pts[:, 0]) == pytest.approx(0.0, abs=1e-14)
    assert np.sum(w * pts[:, 0] ** 2) == pytest.approx(math.pi / 4)


def test_dyadic_cubes_cover_interval():
    cubes = dyadic_cubes(-2, -0.3, 0.6)
    assert cubes[0].interval[0] <= -0.3 and cubes[-1].interval[1] >= 0.6
    assert all(c.side == 0.25 for c in cubes)
    kids = DyadicCube(0, 3).children()
    assert [k.interval for k in kids] == [(3.0, 3.5), (3.5, 4.0)]


def test_tent_regions_nest():
    T, W = tent_regions(SAW, DyadicCube(-1, 1))
    assert W.area == pytest.approx(0.5 * 4 * 0.5)
    pts = np.array([[0.7, SAW.psi(np.array(0.7)) + 2.5], [0.7, SAW.psi(np.array(0.7)) + 0.1]])
    assert list(W.contains(pts)) == [True, False]
    assert list(T.contains(pts)) == [True, True]


@pytest.mark.parametrize("domain", [half_plane(), SAW])
def test_whitney_cubes_are_disjoint_and_whitney(domain):
    cubes = whitney_decompose(domain, (-1.0, 1.0, 0.5, 2.5), 7)
    assert cubes
    for q in cubes:
        assert q.dist >= q.side
    area = sum(q.side ** 2 for q in cubes)
    # disjoint dyadic squares: total area at most the box area
    assert area <= 4.0 + 1e-12
    if domain.is_flat:
        # the box sits at height >= 0.5, so no collar is dropped
        assert area == pytest.approx(4.0, rel=1e-12)


def test_whitney_rejects_bad_region():
    with pytest.raises(ValueError):
        whitney_decompose(half_plane(), (0.0, 1.0, 0.0, 0.7), 4)
    with pytest.raises(ValueError):
        whitney_decompose(half_plane(), (0.0, 1.0, 0.0, 1.0), 0)
