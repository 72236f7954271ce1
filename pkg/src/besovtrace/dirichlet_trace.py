"""Interior smoothing with a vanishing-moment kernel, numerical traces and
trace-norm experiments."""

import math
from dataclasses import dataclass, field

import numpy as np

from .funcspace import (BoundaryFunction, BoundaryJet, Field, NormParams, WhitneyArray,
                        gradient_array, mfact, multiindices, multiindices_upto)
from .geometry import adapted_distance, dist_to_boundary, gauss_legendre, polar_disk_rule
from .norms import ball_average, holder_seminorm, lav_norm, slobodeckij_norm


def _radial_moment(j):
    """int_0^1 (1 - r^2)^4 r^(2j+1) dr."""
    return 0.5 * math.factorial(j) * math.factorial(4) / math.factorial(j + 5)


@dataclass
class InteriorKernel:
    """η(y) = (1 - |y|²)⁴ Σ_l c_l |y|^(2l) on the unit disc, rescaled by r(x) = a δ(x)."""

    m: int
    a: float
    coeffs: np.ndarray
    domain: object = None
    n_r: int = 10
    n_a: int = 24

    def eta(self, y):
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        poly = np.polynomial.polynomial.polyval(r2, self.coeffs)
        return np.where(r2 < 1, (1 - r2) ** 4 * poly, 0.0)

    def rule(self):
        """Polar nodes z_k and weights W_k η(z_k) on the unit disc."""
        pts, w = polar_disk_rule(self.n_r, self.n_a)
        return pts, w * self.eta(pts)

    def moment(self, zeta):
        pts, w = polar_disk_rule(self.n_r + 4, self.n_a + 8)
        return float(np.sum(w * self.eta(pts) * np.prod(pts ** np.asarray(zeta), axis=-1)))

    def radius(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.a * adapted_distance(self.domain, pts)


def build_interior_kernel(m, support_a=0.5, domain=None):
    """Radial kernel with unit mass and vanishing moments of orders 1..m.

    Odd moments vanish by symmetry; the even ones reduce to the radial
    moments of orders 2, 4, ..., which the coefficients c_l cancel.
    """
    if not 0 < support_a <= 0.5:
        raise ValueError("support_a must lie in (0, 1/2]")
    K = m // 2
    A = np.array([[_radial_moment(k + l) for l in range(K + 1)] for k in range(K + 1)])
    rhs = np.zeros(K + 1)
    rhs[0] = 1.0 / (2 * math.pi)
    if abs(np.linalg.det(A)) < 1e-300:
        raise np.linalg.LinAlgError("singular moment system")
    coeffs = np.linalg.solve(A, rhs)
    if domain is None:
        from .geometry import half_plane
        domain = half_plane()
    return InteriorKernel(int(m), float(support_a), coeffs, domain)


def _t_value(phi, kernel, X, T):
    """Tφ at points (X, T): Σ_k W_k η(z_k) P(x, x + r z_k)."""
    pts, w = kernel.rule()
    xy = np.stack([X, T], axis=-1)
    dist = dist_to_boundary(kernel.domain, xy)
    r = kernel.radius(xy)
    if np.any(r >= dist):
        raise ValueError("ball escapes domain")
    YX = X[:, None] + r[:, None] * pts[:, 0]
    YT = T[:, None] + r[:, None] * pts[:, 1]
    dx, dt = -r[:, None] * pts[:, 0], -r[:, None] * pts[:, 1]
    tot = 0.0
    for z in multiindices_upto(kernel.m - 1):
        tot = tot + phi.deriv(z, YX, YT) * dx ** z[0] * dt ** z[1] / mfact(z)
    return np.sum(tot * w, axis=1)


_FD1 = ([-2, -1, 1, 2], [1 / 12, -8 / 12, 8 / 12, -1 / 12])
_FD2 = ([-2, -1, 0, 1, 2], [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12])
_FD3 = ([-3, -2, -1, 1, 2, 3], [1 / 8, -1.0, 13 / 8, -13 / 8, 1.0, -1 / 8])
_STENCIL = {0: ([0], [1.0]), 1: _FD1, 2: _FD2, 3: _FD3}


def smooth_reproject(phi, kernel, x, order=0, rel_step=0.02):
    """Tφ and its derivatives up to ``order`` at interior points.

    Derivatives use fourth-order central differences with step
    ``rel_step * dist``.
    """
    pts = np.asarray(x, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    X, T = pts[:, 0], pts[:, 1]
    h = rel_step * dist_to_boundary(kernel.domain, pts)
    out = {}
    for al in multiindices_upto(order):
        ox, wx = _STENCIL[al[0]]
        ot, wt = _STENCIL[al[1]]
        acc = 0.0
        for i, cx in zip(ox, wx):
            for j, ct in zip(ot, wt):
                acc = acc + cx * ct * _t_value(phi, kernel, X + i * h, T + j * h)
        out[al] = (acc / h ** sum(al)).reshape(shape)
    return out


def smoothed_field(phi, kernel):
    """Tφ as a Field (derivatives by differences)."""
    def fn(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        return smooth_reproject(phi, kernel, np.stack([x, t], -1), 0)[(0, 0)]

    def deriv(al, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        return smooth_reproject(phi, kernel, np.stack([x, t], -1), sum(al))[tuple(al)]

    return Field(fn, deriv, f"T({getattr(phi, 'name', 'phi')})")


def smoothing_bound_constants(phi, kernel, x):
    """Ratios in the two local bounds for Tφ at the points x.

    Returns (C_top, C_low): |∇^m Tφ(x)| / ⨍_B |∇^m φ| and
    |∇^(m-1) Tφ(x) - ⨍_B ∇^(m-1) φ| / (dist ⨍_B |∇^m φ|), with B = B(x, dist/2).
    """
    m = kernel.m
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    dist = dist_to_boundary(kernel.domain, pts)
    jet = smooth_reproject(phi, kernel, pts, m)
    top = np.sqrt(sum(jet[al] ** 2 for al in multiindices(m)))
    avg_top = ball_average(gradient_array(phi, m), pts, dist / 2, 1.0)
    low = 0.0
    for al in multiindices(m - 1):
        comp = Field(lambda X, T, al=al: phi.deriv(al, X, T))
        rule = polar_disk_rule(6, 16)
        pw, ww = rule
        ww = ww / ww.sum()
        Xb = pts[:, 0:1] + (dist / 2)[:, None] * pw[:, 0]
        Tb = pts[:, 1:2] + (dist / 2)[:, None] * pw[:, 1]
        avg = comp(Xb, Tb) @ ww
        low = low + (jet[al] - avg) ** 2
    low = np.sqrt(low)
    with np.errstate(divide="ignore", invalid="ignore"):
        c_top = np.where(avg_top > 0, top / avg_top, 0.0)
        c_low = np.where(avg_top > 0, low / (dist * avg_top), 0.0)
    return c_top, c_low


# --------------------------------------------------------------------------
# numerical trace


@dataclass
class TraceResult:
    grid: np.ndarray
    values: dict
    flags: dict
    levels: tuple
    history: dict = field(default_factory=dict)

    def whitney_array(self, m):
        comps = {g: BoundaryFunction(lambda x, v=v: np.interp(x, self.grid, v), name=f"Tr d{g}u")
                 for g, v in self.values.items()}
        return WhitneyArray(m, comps)

    @property
    def ok(self):
        return not any(np.any(f) for f in self.flags.values())


def trace_whitney_array(u, domain, boundary_grid, m=1, levels=10, first=2, tol=1e-3,
                        richardson=True):
    """Averaged vertical limits of ∂^γ u, |γ| = m - 1, at boundary nodes.

    At level j the average is taken over the disc of radius 2^(-j-2) centred
    2^(-j) above the node; the limit is 2 A_J - A_(J-1) (error linear in the
    height) or A_J.  Components whose last two limit estimates differ by more
    than ``tol`` times their scale are flagged as having no trace.
    """
    xs = np.asarray(boundary_grid, dtype=float)
    base = domain.psi(xs)
    values, flags, hist = {}, {}, {}
    for g in multiindices(m - 1):
        comp = Field(lambda X, T, g=g: u.deriv(g, X, T))
        A = []
        for j in range(first, levels + 1):
            h = 2.0 ** (-j)
            centers = np.stack([xs, base + h], axis=-1)
            A.append(_signed_ball_average(comp, centers, h / 4))
        A = np.array(A)
        seq = 2 * A[1:] - A[:-1] if richardson else A
        scale = max(1.0, float(np.max(np.abs(seq[-1]))))
        values[g] = seq[-1]
        flags[g] = np.abs(seq[-1] - seq[-2]) > tol * scale
        hist[g] = A
    return TraceResult(xs, values, flags, (first, levels), hist)


def _signed_ball_average(f, centers, radius, rule=None):
    pts, w = rule if rule is not None else polar_disk_rule(6, 16)
    w = w / w.sum()
    X = centers[:, 0:1] + radius * pts[:, 0]
    T = centers[:, 1:2] + radius * pts[:, 1]
    return np.asarray(f(X, T)) @ w


def trace_besov_experiment(u, domain, params, interval=(-1.0, 1.0), grid_n=256,
                           levels=10, region=(-1.0, 1.0, 1.0), depth=8, tails=True):
    """Ratio of the boundary norm of the trace to ||∇^m u|| in the averaged norm.

    Finite p uses the double-integral norm of the traced Whitney array
    (data assumed to vanish outside ``interval``); p = inf uses the Hölder
    seminorm.  Returns a dict with both sides and the ratio (0 when both
    vanish).
    """
    m = params.m
    a, b = interval
    h = (b - a) / grid_n
    grid = a + h * (np.arange(grid_n) + 0.5)
    tr = trace_whitney_array(u, domain, grid, m, levels)
    arr = tr.whitney_array(m)
    if math.isinf(params.p):
        top = holder_seminorm(arr, params.theta, grid_n, interval)
    else:
        top = slobodeckij_norm(_grid_array(arr, grid, m), domain, params.p, params.theta,
                               grid_n, interval, tails)
    den = lav_norm(gradient_array(u, m), domain, params, "direct", depth, region,
                   estimate_error=False).value
    if den == 0.0:
        ratio = 0.0 if top <= 1e-12 else math.inf
    else:
        ratio = top / den
    return {"trace_norm": top, "interior_norm": den, "ratio": ratio,
            "flagged": not tr.ok, "params": params.as_dict()}


def _grid_array(arr, grid, m):
    # midpoint samples are exactly the trace nodes; derivative by differences
    comps = {}
    for g, f in arr.comps.items():
        v = f(grid)
        dv = np.gradient(v, grid)
        comps[g] = BoundaryFunction(lambda x, f=f: f(x),
                                    lambda x, dv=dv: np.interp(x, grid, dv), f.name)
    return WhitneyArray(m, comps)
