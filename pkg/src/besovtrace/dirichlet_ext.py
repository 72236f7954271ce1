"""Extension of Dirichlet boundary data into a graph domain.

Eφ(x) = ∫ K(x, y) P(x, y) dσ(y), where P(x, y) is the Taylor polynomial of
the boundary jet at y and K averages over a boundary window of half-width
a·ρ(x) below x.  The window scale ρ = c·δ(x) uses the adapted distance, so it
is smooth in x and equals t on the half-plane.
"""

import math

import numpy as np
from numpy.polynomial import Polynomial

from .funcspace import (ArrayField, BoundaryJet, Field, leq, mbinom, multiindices, multiindices_upto,
                        taylor_polynomial)
from .geometry import adapted_distance, dist_to_boundary, gauss_legendre, mollifier_constant

_ZETA = Polynomial([1.0, 0.0, -1.0]) ** 4
_ZETA_INT = 256.0 / 315.0
_FD_STENCIL = {
    0: ([0], [1.0]),
    1: ([-2, -1, 1, 2], [1 / 12, -8 / 12, 8 / 12, -1 / 12]),
    2: ([-2, -1, 0, 1, 2], [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12]),
    3: ([-3, -2, -1, 1, 2, 3], [1 / 8, -1.0, 13 / 8, -13 / 8, 1.0, -1 / 8]),
    4: ([-3, -2, -1, 0, 1, 2, 3], [-1 / 6, 2.0, -13 / 2, 28 / 3, -13 / 2, 2.0, -1 / 6]),
}


def _zeta(v):
    v = np.asarray(v, dtype=float)
    w = np.maximum(1.0 - v * v, 0.0)
    w2 = w * w
    return w2 * w2


class BoundaryKernel:
    """K(x, y) = ζ((x' - y')/(a ρ(x))) / c(x), with ζ = (1 - v²)⁴ and ∫K dσ = 1."""

    def __init__(self, domain, m=1, a=None, C1=4.0, C2=8.0, margin=0.05):
        M = domain.M
        if a is None:
            a = 1.0 / (2.0 * (1.0 + M))
        if not 0 < a <= 1.0 / (1.0 + M):
            raise ValueError(f"kernel scale a={a} too large for M={M}: need a <= 1/(1+M)")
        self.domain = domain
        self.m = int(m)
        self.a = float(a)
        self.C1, self.C2 = float(C1), float(C2)
        self.margin = 0.0 if domain.is_flat else float(margin)
        self.c = mollifier_constant(domain)

    def rho(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.domain.is_flat:
            return t - self.domain.psi(x)
        pts = np.stack(np.broadcast_arrays(x, t), axis=-1).reshape(-1, 2)
        return (self.c * adapted_distance(self.domain, pts)).reshape(np.broadcast(x, t).shape)

    def nodes(self, x, t, n):
        """Boundary nodes y' (B, n) and arclength weights covering each window."""
        z, w = _reference_rule(n)
        half = self.a * self.rho(x, t) * (1 + self.margin)
        Y = x[:, None] + half[:, None] * z
        W = half[:, None] * w * self.domain.arclength_density(Y)
        return Y, W

    def values(self, x, t, Y, W):
        """K at fixed nodes, normalized on those same nodes (curved case) or exactly (flat)."""
        s = self.a * self.rho(x, t)
        num = _zeta((x[:, None] - Y) / s[:, None])
        if self.domain.is_flat:
            return num / (s * _ZETA_INT)[:, None]
        return num / np.sum(num * W, axis=1, keepdims=True)

    def derivative(self, alpha, x, t, Y, W):
        """∂_x^alpha K(x, y) at the nodes, analytic on the half-plane."""
        if sum(alpha) == 0:
            return self.values(x, t, Y, W)
        if self.domain.is_flat:
            return _flat_kernel_derivative(alpha, x[:, None] - Y, t[:, None], self.a)
        h = 0.01 * self.rho(x, t)
        ox, wx = _FD_STENCIL[alpha[0]]
        ot, wt = _FD_STENCIL[alpha[1]]
        out = 0.0
        for i, cx in zip(ox, wx):
            for j, ct in zip(ot, wt):
                out = out + cx * ct * self.values(x + i * h, t + j * h, Y, W)
        return out / (h ** sum(alpha))[:, None]

    def normalization(self, x, t, n=256):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        Y, W = self.nodes(x, t, n)
        if self.domain.is_flat:
            return np.sum(self.values(x, t, Y, W) * W, axis=1)
        # independent check: a finer rule than the one the kernel normalizes on
        Yf, Wf = self.nodes(x, t, 4 * n)
        s = self.a * self.rho(x, t)
        num = _zeta((x[:, None] - Yf) / s[:, None])
        return np.sum(num * Wf, axis=1) / np.sum(_zeta((x[:, None] - Y) / s[:, None]) * W, axis=1)

    def support_radius(self, x, t):
        """Largest |x - y| over the kernel window, to compare with 2 dist(x, ∂Ω)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        Y, _ = self.nodes(x, t, 512)
        s = self.a * self.rho(x, t)
        inside = np.abs(x[:, None] - Y) < s[:, None]
        d = np.hypot(x[:, None] - Y, t[:, None] - self.domain.psi(Y))
        return np.max(np.where(inside, d, 0.0), axis=1)


def _reference_rule(n):
    """Composite 8-point Gauss-Legendre on [-1, 1] with n // 8 panels."""
    panels = max(1, n // 8)
    z, w = gauss_legendre(8)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    h = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * z
    return nodes.ravel(), (h[:, None] * w).ravel()


_Q_CACHE = {}


def _kernel_poly(i, j):
    """Polynomial Q with ∂_u^i ∂_t^j [ζ(u/(a t))/(a t)] = a^(-1-i) t^(-1-i-j) Q(u/(a t))."""
    if (i, j) not in _Q_CACHE:
        Q = _ZETA
        n = 1  # current power of 1/t, with the a-powers kept separately
        for _ in range(i):
            Q = Q.deriv()
            n += 1
        v = Polynomial([0.0, 1.0])
        for _ in range(j):
            Q = -n * Q - v * Q.deriv()
            n += 1
        _Q_CACHE[i, j] = Q.coef[::-1].copy()
    return _Q_CACHE[i, j]


def _flat_kernel_derivative(alpha, u, t, a):
    """∂_x'^i ∂_t^j of ζ(u/(a t))/(a t Z), evaluated by Horner's rule."""
    i, j = alpha
    v = u / (a * t)
    val = np.polyval(_kernel_poly(i, j), v) * (a ** (-1 - i) / _ZETA_INT) * t ** (-1.0 - i - j)
    return np.where(np.abs(v) < 1, val, 0.0)


def build_boundary_kernel(domain, m=1, a=None, C1=4.0, C2=8.0):
    return BoundaryKernel(domain, m, a, C1, C2)


def node_count(dist, min_nodes=None, max_nodes=4096):
    """max(32, 8/dist) nodes per window, capped (the window shrinks with dist)."""
    n = np.maximum(32, np.ceil(8.0 / np.asarray(dist, dtype=float)))
    if min_nodes is not None:
        n = np.maximum(n, min_nodes)
    n = np.minimum(n, max_nodes)
    return (8 * np.ceil(n / 8)).astype(int)


def extend_dirichlet(jet, kernel, x, order=0, min_nodes=None, max_nodes=4096, strict=False):
    """Jet of the extension of boundary data at interior points.

    Parameters
    ----------
    jet : BoundaryJet
        Boundary data φ_ζ for every |ζ| <= m - 1.
    kernel : BoundaryKernel
    x : array (..., 2)
        Interior points.
    order : int
        Highest derivative order returned.

    Returns
    -------
    dict mapping each multiindex |α| <= order to an array of ∂^α Eφ.
    """
    m = jet.m
    need = set(multiindices_upto(m - 1))
    if not need <= set(jet.comps):
        raise ValueError(f"incomplete jet: missing {sorted(need - set(jet.comps))}")
    pts = np.asarray(x, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    X, T = pts[:, 0], pts[:, 1]
    domain = kernel.domain
    if np.any(T - domain.psi(X) <= 0):
        raise ValueError("not in domain")
    dist = dist_to_boundary(domain, pts)
    if strict and np.any(8.0 / dist > max_nodes):
        raise ValueError(f"point too close to the boundary: reachable minimum distance is "
                         f"{8.0 / max_nodes:.3g}")
    counts = node_count(dist, min_nodes, max_nodes)
    alphas = multiindices_upto(order)
    out = {al: np.empty(len(X)) for al in alphas}
    for n in np.unique(counts):
        idx = np.nonzero(counts == n)[0]
        for i in range(0, len(idx), max(1, 2 ** 20 // n)):
            sel = idx[i:i + max(1, 2 ** 20 // n)]
            vals = _extend_batch(jet, kernel, X[sel], T[sel], alphas, int(n))
            for al in alphas:
                out[al][sel] = vals[al]
    return {al: v.reshape(shape) for al, v in out.items()}


def _extend_batch(jet, kernel, X, T, alphas, n):
    m = jet.m
    Y, W = kernel.nodes(X, T, n)
    ypts = np.stack([Y, kernel.domain.psi(Y)], axis=-1)
    xpts = np.stack([X, T], axis=-1)[:, None, :]
    phi = jet.values(Y)
    P = {d: taylor_polynomial(phi, xpts, ypts, d, m) for d in multiindices_upto(m - 1)}
    dK = {}
    res = {}
    for g in alphas:
        tot = 0.0
        for d in P:
            if not leq(d, g):
                continue
            rest = (g[0] - d[0], g[1] - d[1])
            if rest not in dK:
                dK[rest] = kernel.derivative(rest, X, T, Y, W)
            tot = tot + mbinom(g, d) * np.sum(dK[rest] * P[d] * W, axis=1)
        res[g] = tot if not np.isscalar(tot) else np.zeros(len(X))
    return res


class DirichletExtension(Field):
    """Eφ as a scalar field with derivatives of every order up to m + 1."""

    def __init__(self, jet, kernel, min_nodes=None, max_nodes=4096):
        self.jet = jet
        self.kernel = kernel
        self.min_nodes = min_nodes
        self.max_nodes = max_nodes

        def fn(x, t):
            return self._eval((0, 0), x, t)

        def deriv(alpha, x, t):
            if sum(alpha) > 4:
                return None
            return self._eval(tuple(alpha), x, t)

        super().__init__(fn, deriv, "E(phi)")

    def _eval(self, alpha, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        pts = np.stack([x, t], axis=-1)
        return _single(self.jet, self.kernel, pts, alpha, self.min_nodes, self.max_nodes)

    def gradient(self, k):
        """∇^k Eφ as an array field whose components share one quadrature pass."""
        return ExtensionGradient(self, k)



def _single(jet, kernel, pts, alpha, min_nodes, max_nodes):
    """One derivative of Eφ, skipping the rest of the jet."""
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 2)
    X, T = flat[:, 0], flat[:, 1]
    dist = dist_to_boundary(kernel.domain, flat)
    counts = node_count(dist, min_nodes, max_nodes)
    out = np.empty(len(X))
    for n in np.unique(counts):
        idx = np.nonzero(counts == n)[0]
        step = max(1, 2 ** 20 // int(n))
        for i in range(0, len(idx), step):
            sel = idx[i:i + step]
            out[sel] = _extend_batch(jet, kernel, X[sel], T[sel], [alpha], int(n))[alpha]
    return out.reshape(shape)



class ExtensionGradient(ArrayField):
    def __init__(self, ext, k):
        self.ext = ext
        comps = {al: Field(lambda x, t, al=al: ext.deriv(al, x, t), name=f"d{al}E")
                 for al in multiindices(k)}
        super().__init__(comps, f"grad^{k} E(phi)")

    def evaluate(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        pts = np.stack([x, t], axis=-1)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, 2)
        X, T = flat[:, 0], flat[:, 1]
        ext = self.ext
        dist = dist_to_boundary(ext.kernel.domain, flat)
        counts = node_count(dist, ext.min_nodes, ext.max_nodes)
        out = {al: np.empty(len(X)) for al in self.comps}
        for n in np.unique(counts):
            idx = np.nonzero(counts == n)[0]
            step = max(1, 2 ** 20 // int(n))
            for i in range(0, len(idx), step):
                sel = idx[i:i + step]
                vals = _extend_batch(ext.jet, ext.kernel, X[sel], T[sel], list(self.comps), int(n))
                for al in self.comps:
                    out[al][sel] = vals[al]
        return {al: v.reshape(shape) for al, v in out.items()}

    def magnitude(self, x, t):
        vals = self.evaluate(x, t)
        return np.sqrt(sum(v ** 2 for v in vals.values()))

    def scaled(self, lam):
        raise NotImplementedError("rescale the boundary data instead")


def extension_field(jet, kernel, **kw):
    return DirichletExtension(jet, kernel, **kw)


# --------------------------------------------------------------------------
# diagnostics


def kernel_derivative_constant(kernel, pts, order, n=256):
    """max over |γ| = order and nodes of |∂_x^γ K| dist^(1 + |γ|) (d = 2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    X, T = pts[:, 0], pts[:, 1]
    Y, W = kernel.nodes(X, T, n)
    dist = dist_to_boundary(kernel.domain, pts)
    best = 0.0
    for g in multiindices(order):
        dK = kernel.derivative(g, X, T, Y, W)
        best = max(best, float(np.max(np.abs(dK) * (dist ** (1 + order))[:, None])))
    return best


def pointwise_bound_ratio(jet, kernel, x, q=1.0, n=256):
    """|∇^m Eφ(x)|^q divided by dist^(-(d-1)-q) times the double integral of
    |φ(y) - φ(z)|^q / |y - z|^(d-1) over the enlarged window Δ'(x) (m = 1).

    Δ'(x) is the boundary piece within C1·dist(x) of x.
    """
    if jet.m != 1:
        raise ValueError("pointwise bound check is implemented for m = 1")
    x = np.asarray(x, dtype=float)
    dist = float(dist_to_boundary(kernel.domain, x))
    vals = extend_dirichlet(jet, kernel, x[None], order=1)
    grad = math.hypot(vals[(1, 0)][0], vals[(0, 1)][0])
    R = kernel.C1 * dist
    z, w = _reference_rule(n)
    ys = x[0] + R * z
    ws = R * w * kernel.domain.arclength_density(ys)
    near = np.hypot(ys - x[0], kernel.domain.psi(ys) - x[1]) < R
    f = jet.comps[(0, 0)](ys)
    dy = np.hypot(ys[:, None] - ys[None, :], kernel.domain.psi(ys)[:, None] - kernel.domain.psi(ys)[None, :])
    np.fill_diagonal(dy, np.inf)
    mask = near[:, None] & near[None, :]
    dbl = float(np.sum(np.where(mask, np.abs(f[:, None] - f[None, :]) ** q / dy, 0.0) * np.outer(ws, ws)))
    rhs = dist ** (-1 - q) * dbl
    return grad ** q / rhs if rhs > 0 else (0.0 if grad == 0 else math.inf)


def vertical_holder_slope(ext, f, x0, heights):
    """Fitted exponent s in |Eφ(x0', ψ(x0') + h) - φ(x0')| ~ dist^s along a vertical.

    Returns (slope, dist, deviation).  Hölder-θ data should give s >= θ.
    """
    domain = ext.kernel.domain
    h = np.asarray(heights, dtype=float)
    base = float(domain.psi(np.array(x0)))
    pts = np.stack([np.full_like(h, x0), base + h], axis=-1)
    dev = np.abs(ext(pts[:, 0], pts[:, 1]) - float(f(np.array(x0))))
    dist = dist_to_boundary(domain, pts)
    keep = dev > 0
    if keep.sum() < 2:
        return math.inf, dist, dev
    slope = np.polyfit(np.log(dist[keep]), np.log(dev[keep]), 1)[0]
    return float(slope), dist, dev
