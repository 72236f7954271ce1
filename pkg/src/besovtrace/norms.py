"""Weighted averaged norms, tent sums, boundary Besov norms and Poincare ratios.

All interior integrals are truncated to a box ``(a, b, top)``: graph
coordinates a <= x' <= b and heights 0 < t - psi(x') <= top.  Toward the
boundary the integrals are resolved layer by layer on dyadic heights and
the missing layers are added as a geometric tail fitted to the last two.
"""

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .funcspace import (AtomicDecomposition, BoundaryJet, NormParams, PolynomialRM,
                        Restricted, WhitneyArray, gradient_array, magnitude,
                        multiindices, multiindices_upto, validate_atom)
from .geometry import (composite_gl, dist_to_boundary, dyadic_cubes, gauss_legendre,
                       graded_gl, polar_disk_rule, quadrature_rule, tent_regions,
                       whitney_decompose)


@dataclass
class NormResult:
    value: float
    est_error: float
    params: dict
    truncation: dict = field(default_factory=dict)
    mode: str = ""

    def __float__(self):
        return float(self.value)

    def as_dict(self):
        return {"value": self.value, "est_error": self.est_error,
                "params": self.params, "truncation": self.truncation, "mode": self.mode}


def _check_params(params):
    if params.q < 1:
        raise ValueError("q must be at least 1")
    if not params.p > 0:
        raise ValueError("p must be positive")


def _sample(H, x, t):
    v = np.asarray(magnitude(H, x, t), dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite samples")
    return v


def _geometric_tail(c):
    """Sum of the layers beyond the last, assuming the ratio of the last two persists."""
    if len(c) < 2 or c[-1] <= 0 or c[-2] <= 0:
        return 0.0
    r = c[-1] / c[-2]
    if r >= 1:
        return math.inf
    return c[-1] * r / (1 - r)


def _tree_sum(v):
    # numpy pairwise summation keeps the result independent of chunking order
    return float(np.sum(np.asarray(v, dtype=float)))


class CachedMagnitude:
    """Memoize |H| on node arrays so several exponents share one pass.

    Norms with the same box, depth and disc rule sample identical nodes for
    every (p, theta); only the weights change.
    """

    def __init__(self, H):
        self.H = H
        self.name = getattr(H, "name", "cached")
        self._memo = {}

    def magnitude(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        key = (x.shape, hashlib.sha1(x.tobytes() + t.tobytes()).hexdigest())
        if key not in self._memo:
            self._memo[key] = np.asarray(magnitude(self.H, x, t), dtype=float)
        return self._memo[key]


def ball_average(H, centers, radii, q, rule=None, chunk=4096):
    """Average of |H|^q over discs (sup over nodes when q is infinite)."""
    pts, w = rule if rule is not None else polar_disk_rule(6, 16)
    w = w / np.sum(w)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float).ravel()
    out = np.empty(len(radii))
    for i in range(0, len(radii), chunk):
        c, r = centers[i:i + chunk], radii[i:i + chunk]
        X = c[:, 0:1] + r[:, None] * pts[:, 0]
        T = c[:, 1:2] + r[:, None] * pts[:, 1]
        v = _sample(H, X, T)
        out[i:i + chunk] = v.max(axis=1) if math.isinf(q) else (v ** q) @ w
    return out


# --------------------------------------------------------------------------
# lav_norm


def _layer_nodes(top, depth, order):
    z, w = gauss_legendre(order)
    layers = []
    for k in range(depth):
        lo, hi = top * 2.0 ** (-k - 1), top * 2.0 ** (-k)
        layers.append((0.5 * (lo + hi) + 0.5 * (hi - lo) * z, 0.5 * (hi - lo) * w))
    return layers


def _distances(domain, X, T):
    if domain.is_flat:
        return T - domain.psi(X)
    return dist_to_boundary(domain, np.stack([X, T], axis=-1))


def _direct(H, domain, params, region, depth, nx, order, inner):
    a, b, top = region
    rule = polar_disk_rule(*inner)
    p, q, th = params.p, params.q, params.theta
    xs, wx = composite_gl(a, b, nx, order, domain.breakpoints(a, b))
    layers = _layer_nodes(top, depth, order)
    contrib, sup = [], 0.0
    for s, ws in layers:
        X, S = np.meshgrid(xs, s, indexing="ij")
        W = np.outer(wx, ws)
        T = domain.psi(X) + S
        dist = _distances(domain, X.ravel(), T.ravel())
        A = ball_average(H, np.stack([X.ravel(), T.ravel()], -1), dist / 2, q, rule)
        if math.isinf(p):
            m = A if math.isinf(q) else A ** (1 / q)
            sup = max(sup, float(np.max(m * dist ** (1 - th))))
            contrib.append(0.0)
        else:
            g = A if math.isinf(q) else A ** (1 / q)
            contrib.append(_tree_sum(g ** p * dist ** (p - 1 - p * th) * W.ravel()))
    if math.isinf(p):
        return sup, {"box": [a, b, top], "depth": depth, "tail": 0.0}
    tail = _geometric_tail(contrib)
    return (sum(contrib) + tail) ** (1 / p), {"box": [a, b, top], "depth": depth, "tail": tail}


def _whitney(H, domain, params, region, depth, order=3):
    a, b, top = region
    p, q, th = params.p, params.q, params.theta
    if domain.is_flat:
        box, side = (a, b, 0.0, top), None
    else:
        side = 2.0 ** math.floor(math.log2(min(b - a, top)))
        lo = math.floor(domain.psi(np.linspace(a, b, 513)).min() / side) * side
        hi = lo + math.ceil((domain.psi(np.linspace(a, b, 513)).max() + top - lo) / side) * side
        box = (a, b, lo, hi)
    cubes = whitney_decompose(domain, box, depth, side=side)
    z, w = gauss_legendre(order)
    u = 0.5 * (z + 1)
    W = np.outer(w, w).ravel() / 4
    U1, U2 = (g.ravel() for g in np.meshgrid(u, u, indexing="ij"))
    x0 = np.array([c.x0 for c in cubes])
    t0 = np.array([c.t0 for c in cubes])
    ell = np.array([c.side for c in cubes])
    X = x0[:, None] + ell[:, None] * U1
    T = t0[:, None] + ell[:, None] * U2
    v = _sample(H, X, T)
    avg = v.max(axis=1) if math.isinf(q) else (v ** q) @ W
    g = avg if math.isinf(q) else avg ** (1 / q)
    trunc = {"box": list(box), "depth": depth, "cubes": len(cubes)}
    if math.isinf(p):
        trunc["tail"] = 0.0
        return float(np.max(g * ell ** (1 - th))) if len(cubes) else 0.0, trunc
    terms = g ** p * ell ** (1 + p - p * th)
    sides = np.unique(ell)[::-1]
    contrib = [_tree_sum(terms[ell == s]) for s in sides]
    tail = _geometric_tail(contrib)
    trunc["tail"] = tail
    return (sum(contrib) + tail) ** (1 / p), trunc


def _slab_rule(domain, a, b, side, order):
    """Nodes and weights on the slabs W(Q) over [a, b] for boundary cubes of a given side."""
    n = max(1, round((b - a) / side))
    edges = np.linspace(a, b, n + 1)
    z, w = gauss_legendre(order)
    h = np.diff(edges) / 2
    xs = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * z
    wx = h[:, None] * w
    s = 6 * side + 2 * side * z
    ws = 2 * side * w
    X = xs[:, :, None] + 0 * s
    S = 0 * xs[:, :, None] + s
    Wt = wx[:, :, None] * ws
    X = X.reshape(n, -1)
    S = S.reshape(n, -1)
    Wt = Wt.reshape(n, -1)
    return X, domain.psi(X) + S, Wt, np.diff(edges)


def _dyadic_w(H, domain, params, region, depth, order=4):
    a, b, top = region
    p, q, th = params.p, params.q, params.theta
    contrib, sup = [], 0.0
    for k in range(depth):
        side = top / 8 * 2.0 ** (-k)
        X, T, Wt, widths = _slab_rule(domain, a, b, side, order)
        v = _sample(H, X, T)
        if math.isinf(q):
            g = v.max(axis=1)
        else:
            g = ((v ** q * Wt).sum(axis=1) / Wt.sum(axis=1)) ** (1 / q)
        if math.isinf(p):
            sup = max(sup, float(np.max(g * side ** (1 - th))))
            contrib.append(0.0)
        else:
            contrib.append(_tree_sum(g ** p * widths / side * side ** (1 + p - p * th)))
    trunc = {"box": [a, b, top], "depth": depth}
    if math.isinf(p):
        trunc["tail"] = 0.0
        return sup, trunc
    tail = _geometric_tail(contrib)
    trunc["tail"] = tail
    return (sum(contrib) + tail) ** (1 / p), trunc


def _tail_dominates(value, trunc, p, share=0.1):
    tail = trunc.get("tail", 0.0)
    if math.isinf(tail):
        return True
    if math.isinf(p) or tail == 0.0:
        return False
    return tail > share * value ** p


def lav_norm(H, domain, params, mode="direct", depth=8, region=(-1.0, 1.0, 1.0),
             nx=None, order=6, estimate_error=True, inner=(6, 16)):
    """Truncated weighted averaged norm of an interior field.

    Parameters
    ----------
    H : Field, ArrayField or anything with ``magnitude(x, t)``
    mode : {"direct", "whitney", "dyadicW"}
        ``direct`` integrates the ball averages against dist^(p-1-p theta);
        ``whitney`` sums cube averages times side^(1+p-p theta) over
        Whitney cubes; ``dyadicW`` does the same over the slabs W(Q).
    depth : int
        Number of dyadic height layers resolved below ``top`` (Whitney
        depth in ``whitney`` mode).
    region : (a, b, top)
        Truncation box in graph coordinates.
    nx : int, optional
        Panels in x' for ``direct`` mode; defaults to 8 * depth.
    inner : (int, int)
        Radial and angular node counts of the disc rule for the averages.

    Returns
    -------
    NormResult
        ``est_error`` is the change from one extra level of refinement.
    """
    _check_params(params)

    def run(L):
        if mode == "direct":
            return _direct(H, domain, params, region, L, nx or 8 * L, order, inner)
        if mode == "whitney":
            return _whitney(H, domain, params, region, L)
        if mode == "dyadicW":
            return _dyadic_w(H, domain, params, region, L)
        raise ValueError(f"unknown mode {mode!r}")

    value, trunc = run(depth)
    # the fitted tail is only trusted once it is a small part of the total;
    # otherwise the layers are not yet geometric and the cut goes deeper
    used = depth
    while _tail_dominates(value, trunc, params.p) and used < depth + 6:
        used += 1
        value, trunc = run(used)
    trunc["depth_used"] = used
    err = math.nan
    if estimate_error:
        fine, _ = run(used + 1)
        err = abs(fine - value)
    return NormResult(value, err, params.as_dict(), trunc, mode)


# --------------------------------------------------------------------------
# tent functional and local L1 bound


def _tent_level(H, domain, cubes, a, b, top, q, order=4, grade=6):
    """Integrals of |H|^q over T(Q) cut to the truncation box, one per cube."""
    z, w = gauss_legendre(order)
    u, wu = 0.5 * (z + 1), 0.5 * w
    lo = np.array([max(Q.interval[0], a) for Q in cubes])
    hi = np.array([min(Q.interval[1], b) for Q in cubes])
    width = np.maximum(hi - lo, 0.0)
    height = min(8 * cubes[0].side, top)
    ss, ws = graded_gl(0.0, height, grade, order)
    X = (lo[:, None] + width[:, None] * u)[:, :, None] + 0 * ss
    S = np.broadcast_to(ss, X.shape)
    v = _sample(H, X, domain.psi(X) + S)
    W = (width[:, None] * wu)[:, :, None] * ws
    return np.sum((v ** q * W).reshape(len(cubes), -1), axis=1)


def tent_functional(H, domain, params, depth=8, region=(-1.0, 1.0, 1.0), estimate_error=True):
    """Sum over boundary dyadic cubes of (int_T(Q) |H|^q)^(p/q) side^(1+p-p theta-2p/q).

    Fine cubes are summed down to side top/8 * 2^-(depth-1) with a
    geometric tail below.  Coarse cubes are summed up to the scale where the
    cut tents stop changing, after which every term scales by
    2^(1+p-p theta-2p/q) and the remaining series is added in closed form.
    """
    _check_params(params)
    p, q, th = params.p, params.q, params.theta
    if math.isinf(q) or math.isinf(p):
        raise ValueError("tent functional requires finite p and q")
    e = 1 + p - p * th - 2 * p / q
    if e >= 0:
        raise ValueError("tent functional diverges: need 1 + p - p*theta < 2p/q")
    a, b, top = region
    j_top = int(math.floor(math.log2(top / 8)))

    def run(L):
        fine = []
        for j in range(j_top - L + 1, j_top + 1):
            I = _tent_level(H, domain, dyadic_cubes(j, a, b), a, b, top, q)
            fine.append(_tree_sum(I ** (p / q) * (2.0 ** j) ** e))
        # coarse levels until [-s, 0) and [0, s) hold all of [a, b] under full-height tents
        coarse, j = [], j_top + 1
        while True:
            cubes = dyadic_cubes(j, a, b)
            I = _tent_level(H, domain, cubes, a, b, top, q)
            coarse.append(_tree_sum(I ** (p / q) * (2.0 ** j) ** e))
            s = 2.0 ** j
            if 8 * s >= top and s >= max(abs(a), abs(b)):
                break
            j += 1
        up_tail = coarse[-1] * 2.0 ** e / (1 - 2.0 ** e)
        down_tail = _geometric_tail(fine[::-1])
        total = sum(fine) + sum(coarse) + up_tail + down_tail
        return total, {"box": [a, b, top], "depth": L, "tail": down_tail, "upward_tail": up_tail}

    value, trunc = run(depth)
    err = math.nan
    if estimate_error:
        err = abs(run(depth + 1)[0] - value)
    return NormResult(value, err, params.as_dict(), trunc, "tent")


def local_l1(H, domain, x0, R, panels=32, order=8, grade=12):
    """int over B(x0, R) cut to the domain of |H|, for a boundary point x0 (given by x0')."""
    x0 = float(np.atleast_1d(x0)[0])
    t0 = float(domain.psi(np.array(x0)))
    xs, wx = composite_gl(x0 - R, x0 + R, panels, order, domain.breakpoints(x0 - R, x0 + R))
    half = np.sqrt(np.maximum(R * R - (xs - x0) ** 2, 0.0))
    lo = np.maximum(domain.psi(xs), t0 - half)
    hi = t0 + half
    ss, ws = graded_gl(0.0, 1.0, grade, order)
    span = np.maximum(hi - lo, 0.0)
    X = xs[:, None] + 0 * ss
    T = lo[:, None] + span[:, None] * ss
    v = _sample(H, X, T)
    return float(np.sum(v * (wx * span)[:, None] * ws))


# --------------------------------------------------------------------------
# boundary norms


def _tangential_derivative(f, xs, domain):
    df = f.deriv(xs) if hasattr(f, "deriv") else np.gradient(f(xs), xs)
    return df / domain.arclength_density(xs)


def _slobodeckij_scalar(f, domain, p, theta, n, interval, tails, chunk=1024):
    a, b = interval
    h = (b - a) / n
    xs = a + h * (np.arange(n) + 0.5)
    ys = domain.psi(xs)
    vals = np.asarray(f(xs), dtype=float)
    w = h * domain.arclength_density(xs)
    s = 1 + p * theta
    total = 0.0
    for i in range(0, n, chunk):
        dv = np.abs(vals[i:i + chunk, None] - vals[None, :]) ** p
        dd = np.hypot(xs[i:i + chunk, None] - xs[None, :], ys[i:i + chunk, None] - ys[None, :])
        rows = np.arange(i, min(i + chunk, n))
        dd[rows - i, rows] = 1.0
        dv[rows - i, rows] = 0.0
        total += _tree_sum((dv / dd ** s) @ w * w[i:i + chunk])
    # each diagonal cell: |f_tau|^p int int |x-y|^(p-1-p theta) over a cell of length w
    e = p - 1 - p * theta
    ft = np.abs(_tangential_derivative(f, xs, domain))
    total += _tree_sum(ft ** p * 2 * w ** (e + 2) / ((e + 1) * (e + 2)))
    if tails:
        total += _tree_sum(2 * w * np.abs(vals) ** p *
                           ((xs - a) ** (-p * theta) + (b - xs) ** (-p * theta)) / (p * theta))
    return total ** (1 / p)


def slobodeckij_norm(f, domain, p, theta, grid_n=512, interval=(0.0, 1.0), tails=False):
    """Double-integral Besov norm of boundary data on a piece of the boundary.

    Off-diagonal cell pairs use the midpoint rule with arclength weights;
    each diagonal cell uses the local slope, for which the singular integral
    is known in closed form.  With ``tails=True`` the data are taken to
    vanish outside ``interval`` on a flat boundary, and the pairs with one
    point outside are added exactly.  Whitney arrays and jets return the sum
    of the component norms.  ``p = inf`` is routed to ``holder_seminorm``.
    """
    if grid_n < 16:
        raise ValueError("grid too coarse: grid_n must be at least 16")
    if math.isinf(p):
        return holder_seminorm(f, theta, grid_n, interval)
    if isinstance(f, BoundaryJet):
        f = f.whitney_array()
    if isinstance(f, WhitneyArray):
        return sum(_slobodeckij_scalar(c, domain, p, theta, grid_n, interval, tails)
                   for c in f.comps.values())
    return _slobodeckij_scalar(f, domain, p, theta, grid_n, interval, tails)


def holder_seminorm(f, theta, grid_n=1024, interval=(0.0, 1.0), chunk=1024):
    """max over grid pairs of |f(x) - f(y)| / |x - y|^theta on linspace(a, b, grid_n + 1)."""
    if isinstance(f, BoundaryJet):
        f = f.whitney_array()
    if isinstance(f, WhitneyArray):
        return sum(holder_seminorm(c, theta, grid_n, interval) for c in f.comps.values())
    xs = np.linspace(interval[0], interval[1], grid_n + 1)
    v = np.asarray(f(xs), dtype=float)
    best = 0.0
    for i in range(0, len(xs), chunk):
        dx = np.abs(xs[i:i + chunk, None] - xs[None, :])
        dv = np.abs(v[i:i + chunk, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dx > 0, dv / dx ** theta, 0.0)
        best = max(best, float(r.max()))
    return best


def atomic_norm(dec, p):
    """(sum |lambda_j|^p)^(1/p) for a given decomposition after validating every atom."""
    terms = dec.terms if isinstance(dec, AtomicDecomposition) else list(dec)
    for _, a in terms:
        validate_atom(a)
    if not terms:
        return 0.0
    lam = np.abs(np.array([l for l, _ in terms], dtype=float))
    if math.isinf(p):
        return float(lam.max())
    return float(np.sum(lam ** p) ** (1 / p))


# --------------------------------------------------------------------------
# Poincare on tents


def _w_average(u, alpha, rule):
    X, T = rule.nodes[:, 0], rule.nodes[:, 1]
    return float(np.sum(u.deriv(alpha, X, T) * rule.weights) / rule.measure)


def tent_polynomial(u, domain, Q, m, order=6, subdiv=2):
    """The polynomial of degree <= m-1 whose derivative averages over W(Q) match u's."""
    _, W = tent_regions(domain, Q)
    rule = quadrature_rule(W, order, subdiv)
    a, b = Q.interval
    center = (0.5 * (a + b), float(domain.psi(np.array(0.5 * (a + b)))) + 6 * Q.side)
    basis = multiindices_upto(m - 1)
    poly = [PolynomialRM({al: 1.0}, center).as_field() for al in basis]
    A = np.array([[_w_average(P, be, rule) for P in poly] for be in basis])
    rhs = np.array([_w_average(u, be, rule) for be in basis])
    c = np.linalg.solve(A, rhs)
    return PolynomialRM(dict(zip(basis, c)), center)


def poincare_ratio(u, domain, Q, k, params, depth=10, nx=48):
    """||1_T(Q) grad^k (u - u_Q)|| / (side^(m-k) ||1_T(Q) grad^m u||) in the averaged norm.

    Both norms are taken in direct mode over [a - 8l, b + 8l] x (0, 16l],
    which holds every point whose averaging ball meets T(Q).  Returns 0 when
    both sides vanish and inf (with a warning) when only the denominator does.
    """
    m = params.m
    if not 0 <= k <= m - 1:
        raise ValueError("k must lie in 0..m-1")
    T, _ = tent_regions(domain, Q)
    uQ = tent_polynomial(u, domain, Q, m).as_field()
    diff = u - uQ
    num_field = diff if k == 0 else gradient_array(diff, k)
    a, b = Q.interval
    ell = Q.side
    box = (a - 8 * ell, b + 8 * ell, 16 * ell)
    member = T.contains
    num = lav_norm(Restricted(num_field, member), domain, params, "direct", depth, box,
                   nx=nx, estimate_error=False).value
    den = lav_norm(Restricted(gradient_array(u, m), member), domain, params, "direct", depth,
                   box, nx=nx, estimate_error=False).value
    if den == 0.0:
        if num <= 1e-9:
            return 0.0
        warnings.warn("grad^m u vanishes on T(Q) but u is not a polynomial there")
        return math.inf
    return num / (ell ** (m - k) * den)


def weighted_lp_norm(H, domain, params, depth=8, region=(-1.0, 1.0, 1.0), nx=None, order=6):
    """(int |H|^p dist^(p-1-p theta))^(1/p) with no local averaging."""
    a, b, top = region
    p, th = params.p, params.theta
    xs, wx = composite_gl(a, b, nx or 8 * depth, order, domain.breakpoints(a, b))
    contrib = []
    for s, ws in _layer_nodes(top, depth, order):
        X, S = np.meshgrid(xs, s, indexing="ij")
        T = domain.psi(X) + S
        dist = _distances(domain, X.ravel(), T.ravel())
        v = _sample(H, X.ravel(), T.ravel())
        contrib.append(_tree_sum(v ** p * dist ** (p - 1 - p * th) * np.outer(wx, ws).ravel()))
    return (sum(contrib) + _geometric_tail(contrib)) ** (1 / p)
