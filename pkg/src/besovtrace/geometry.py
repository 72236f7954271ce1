"""Lipschitz graph domains in the plane, dyadic cubes, tents and quadrature.

A domain is the region ``{(x, t) : t > psi(x)}``.  Points are passed as
arrays whose last axis has length 2 (``x`` then ``t``).
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

_GL_CACHE = {}


def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached)."""
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def composite_gl(a, b, panels, order, breaks=()):
    """Composite Gauss-Legendre rule on [a, b].

    The interval is cut into ``panels`` equal pieces, further split at
    ``breaks`` so that kinks of the integrand fall on panel edges.
    """
    edges = np.linspace(a, b, int(panels) + 1)
    extra = [c for c in breaks if a < c < b]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    return _panels_rule(edges, order)


def graded_gl(a, b, levels, order, panels_top=1):
    """Gauss-Legendre rule on [a, b] graded geometrically toward ``a``.

    Panels are [a + L 2^-k-1, a + L 2^-k] for k < levels plus the
    innermost piece [a, a + L 2^-levels], so singularities at ``a`` that are
    integrable are handled well.
    """
    L = b - a
    edges = [a] + [a + L * 2.0 ** (-k) for k in range(levels, -1, -1)]
    edges = np.asarray(edges)
    if panels_top > 1:
        top = np.linspace(edges[-2], edges[-1], panels_top + 1)
        edges = np.concatenate([edges[:-2], top])
    return _panels_rule(edges, order)


def _panels_rule(edges, order):
    z, w = gauss_legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * z
    weights = half[:, None] * w
    return nodes.ravel(), weights.ravel()


def polar_disk_rule(n_r=6, n_a=16):
    """Rule on the unit disk: Gauss-Legendre in r (weight r dr), uniform angles."""
    z, w = gauss_legendre(n_r)
    r = 0.5 * (z + 1.0)
    wr = 0.5 * w * r
    ang = (np.arange(n_a) + 0.5) * (2 * np.pi / n_a)
    R, A = np.meshgrid(r, ang, indexing="ij")
    W = np.repeat(wr[:, None], n_a, axis=1) * (2 * np.pi / n_a)
    pts = np.stack([R * np.cos(A), R * np.sin(A)], axis=-1).reshape(-1, 2)
    return pts, W.ravel()


# quartic mollifier used for the adapted distance, normalized on [-1, 1]
_MOLL = Polynomial([1.0, 0, -4.0, 0, 6.0, 0, -4.0, 0, 1.0]) * (315.0 / 256.0)
_MOLL_I0 = _MOLL.integ(lbnd=-1.0)
_MOLL_I1 = (_MOLL * Polynomial([0.0, 1.0])).integ(lbnd=-1.0)


_I0_ODD = _MOLL_I0.coef[1::2].copy()


def _moll_i0(z):
    """int_{-1}^z theta; 1/2 plus an odd polynomial."""
    z2 = z * z
    acc = np.full_like(z, _I0_ODD[-1])
    for c in _I0_ODD[-2::-1]:
        acc = acc * z2 + c
    return 0.5 + z * acc


def _moll_i1(z):
    """int_{-1}^z u theta(u) du = (315/2560) (z^2 - 1)^5."""
    w = z * z - 1.0
    w2 = w * w
    return (315.0 / 2560.0) * w2 * w2 * w


def _abs_smoothed(z):
    """int theta(u)|z - u| du for the quartic mollifier theta."""
    z = np.asarray(z, dtype=float)
    out = np.abs(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = 2 * zi * _moll_i0(zi) - 2 * _moll_i1(zi) - zi
    return out


class GraphDomain:
    """The region above the graph of a Lipschitz function psi.

    ``psi`` and ``dpsi`` are vectorized callables.  Piecewise linear graphs
    also carry their kink representation ``psi(x) = c0 + c1 x + sum w |x - b|``
    which lets the adapted distance be computed in closed form.
    """

    def __init__(self, psi, dpsi, M, dim=2, window=(-4.0, 4.0), kind="custom",
                 kinks=None):
        if dim != 2:
            raise ValueError("only dim=2 is implemented")
        self.psi = psi
        self.dpsi = dpsi
        self.M = float(M)
        self.dim = dim
        self.window = tuple(window)
        self.kind = kind
        self.kinks = kinks  # (c0, c1, breakpoints, weights) or None

    @property
    def is_flat(self):
        return self.kind == "zero"

    def __repr__(self):
        return f"GraphDomain(kind={self.kind!r}, M={self.M})"

    def breakpoints(self, a, b):
        if self.kinks is None:
            return []
        bps = self.kinks[2]
        return [float(c) for c in bps if a < c < b]

    def boundary_point(self, xp):
        xp = np.asarray(xp, dtype=float)
        return np.stack([xp, self.psi(xp)], axis=-1)

    def height(self, pts):
        pts = np.asarray(pts, dtype=float)
        return pts[..., 1] - self.psi(pts[..., 0])

    def contains(self, pts):
        return self.height(pts) > 0

    def arclength_density(self, xp):
        return np.sqrt(1.0 + self.dpsi(np.asarray(xp, dtype=float)) ** 2)

    def _kink_tables(self):
        if getattr(self, "_ktab", None) is None:
            c0, c1, bps, wts = self.kinks
            bps = np.asarray(bps, dtype=float)
            wts = np.asarray(wts, dtype=float)
            order = np.argsort(bps)
            bps, wts = bps[order], wts[order]
            cw = np.concatenate([[0.0], np.cumsum(wts)])
            cwb = np.concatenate([[0.0], np.cumsum(wts * bps)])
            self._ktab = (float(c0), float(c1), bps, wts, cw, cwb)
        return self._ktab

    def _smoothed_kinks(self, xp, s, ds=False):
        c0, c1, bps, wts, cw, cwb = self._kink_tables()
        flat_x, flat_s = xp.ravel(), np.asarray(s, dtype=float).ravel()
        # sum w|x - b| by prefix sums over the sorted kinks
        k = np.searchsorted(bps, flat_x)
        below = flat_x * cw[k] - cwb[k]
        above = (cwb[-1] - cwb[k]) - flat_x * (cw[-1] - cw[k])
        out = c0 + c1 * flat_x + below + above
        slope = np.zeros_like(out)
        # only kinks within one mollifier radius differ from |x - b|
        lo = np.searchsorted(bps, flat_x - flat_s, side="right")
        hi = np.searchsorted(bps, flat_x + flat_s, side="left")
        count = hi - lo
        if count.size and count.max() > 0:
            rows = np.nonzero(count > 0)[0]
            K = int(count[rows].max())
            idx = lo[rows, None] + np.arange(K)
            valid = idx < hi[rows, None]
            idx = np.where(valid, idx, 0)
            d = flat_x[rows, None] - bps[idx]
            sv = flat_s[rows, None]
            u = np.clip(d / sv, -1.0, 1.0)
            corr = sv * _abs_smoothed(u) - np.abs(d)
            out[rows] += np.sum(np.where(valid, wts[idx] * corr, 0.0), axis=1)
            # d/ds of s A(d/s) is -2 I1(d/s)
            dcorr = -2.0 * _moll_i1(u)
            slope[rows] = np.sum(np.where(valid, wts[idx] * dcorr, 0.0), axis=1)
        if ds:
            return out.reshape(xp.shape), slope.reshape(xp.shape)
        return out.reshape(xp.shape)

    def smoothed_psi_ds(self, xp, s):
        """The smoothed graph and its derivative in the mollifier radius s."""
        xp = np.asarray(xp, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), xp.shape)
        if self.is_flat:
            return np.zeros_like(xp), np.zeros_like(xp)
        if self.kinks is not None:
            return self._smoothed_kinks(xp, s, ds=True)
        z, w = gauss_legendre(64)
        arg = xp[..., None] - s[..., None] * z
        val = np.sum(self.psi(arg) * _MOLL(z) * w, axis=-1)
        der = -np.sum(self.dpsi(arg) * z * _MOLL(z) * w, axis=-1)
        return val, der

    def smoothed_psi(self, xp, s):
        """(theta_s * psi)(x') for the quartic mollifier theta."""
        xp = np.asarray(xp, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), xp.shape)
        if self.is_flat:
            return np.zeros_like(xp)
        if self.kinks is not None:
            return self._smoothed_kinks(xp, s)
        z, w = gauss_legendre(64)
        vals = self.psi(xp[..., None] - s[..., None] * z)
        return np.sum(vals * _MOLL(z) * w, axis=-1)

    def check_lipschitz(self, n=2001):
        a, b = self.window
        xs = np.linspace(a, b, n)
        ys = self.psi(xs)
        dx = np.abs(xs[:, None] - xs[None, :])
        dy = np.abs(ys[:, None] - ys[None, :])
        return bool(np.all(dy <= self.M * dx * (1 + 1e-12) + 1e-12))


def half_plane(window=(-4.0, 4.0)):
    return GraphDomain(lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                       lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                       0.0, window=window, kind="zero", kinks=(0.0, 0.0, [], []))


def abs_graph(slope=1.0, window=(-4.0, 4.0)):
    slope = float(slope)
    return GraphDomain(lambda x: slope * np.abs(x), lambda x: slope * np.sign(x),
                       abs(slope), window=window, kind="abs",
                       kinks=(0.0, 0.0, [0.0], [slope]))


def sawtooth_graph(slope=0.5, period=1.0, window=(-4.0, 4.0)):
    """Triangle wave with slopes +-slope, zero at multiples of the period."""
    slope, period = float(slope), float(period)
    half = period / 2

    def psi(x):
        r = np.mod(np.asarray(x, dtype=float), period)
        return slope * (half - np.abs(r - half))

    def dpsi(x):
        r = np.mod(np.asarray(x, dtype=float), period)
        return np.where(r < half, slope, -slope)

    a, b = window
    pad = 4 * period
    k0, k1 = math.floor((a - pad) / half), math.ceil((b + pad) / half)
    bps = [k * half for k in range(k0, k1 + 1)]
    # slope changes by -2*slope at odd multiples of half, +2*slope at multiples of period
    wts = [(-slope if (k % 2) else slope) for k in range(k0, k1 + 1)]
    # fix the affine part so the kink sum matches psi on the first tooth
    xs = np.array([bps[0] + 0.25 * half, bps[0] + 0.75 * half])
    kink_sum = sum(w * np.abs(xs - c) for c, w in zip(bps, wts))
    c1 = (psi(xs[1]) - kink_sum[1] - psi(xs[0]) + kink_sum[0]) / (0.5 * half)
    c0 = psi(xs[0]) - kink_sum[0] - c1 * xs[0]
    return GraphDomain(psi, dpsi, abs(slope), window=window, kind="sawtooth",
                       kinks=(float(c0), float(c1), bps, wts))


def sampled_graph(xs, ys, window=None, M=None):
    """Piecewise linear graph through the samples, constant outside them."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("samples must be matching 1-D arrays of length >= 2")
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    slopes = np.diff(ys) / np.diff(xs)
    M_true = float(np.max(np.abs(slopes)))
    if M is None:
        M = M_true
    elif M_true > M * (1 + 1e-12):
        raise ValueError(f"samples have slope {M_true} exceeding M={M}")

    def psi(x):
        return np.interp(x, xs, ys)

    def dpsi(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
        inside = (x >= xs[0]) & (x < xs[-1])
        return np.where(inside, slopes[idx], 0.0)

    full = np.concatenate([[0.0], slopes, [0.0]])
    wts = list(0.5 * np.diff(full))
    bps = list(xs)
    kink_sum = sum(w * abs(xs[0] - c) for c, w in zip(bps, wts))
    c0 = float(ys[0] - kink_sum)
    if window is None:
        window = (float(xs[0]), float(xs[-1]))
    return GraphDomain(psi, dpsi, M, window=window, kind="samples",
                       kinks=(c0, 0.0, bps, wts))


def domain_from_spec(spec):
    """Build a domain from a dict or JSON string.

    ``{"psi": "zero"|"abs"|"sawtooth"|{"samples": [...]}, "M": float, "dim": 2}``.
    Samples are either ``[[x, y], ...]`` pairs or plain heights spread evenly
    over ``"window"``.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    dim = int(spec.get("dim", 2))
    if dim != 2:
        raise ValueError("only dim=2 is implemented")
    window = tuple(spec.get("window", (-4.0, 4.0)))
    psi = spec.get("psi", "zero")
    M = spec.get("M")
    if psi == "zero":
        return half_plane(window)
    if psi == "abs":
        return abs_graph(1.0 if M is None else M, window)
    if psi == "sawtooth":
        return sawtooth_graph(0.5 if M is None else M, spec.get("period", 1.0), window)
    if isinstance(psi, dict) and "samples" in psi:
        s = np.asarray(psi["samples"], dtype=float)
        if s.ndim == 2:
            return sampled_graph(s[:, 0], s[:, 1], window, M)
        xs = np.linspace(window[0], window[1], s.size)
        return sampled_graph(xs, s, window, M)
    raise ValueError(f"unknown psi kind {psi!r}")


def _golden_min(f, lo, hi, iters=80):
    """Vectorized golden-section search; returns (argmin, min)."""
    g = (math.sqrt(5) - 1) / 2
    c = hi - g * (hi - lo)
    d = lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - g * (hi - lo)
        new_d = lo + g * (hi - lo)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, f(new_c), fd)
        fd_next = np.where(left, fc, f(new_d))
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    x = 0.5 * (lo + hi)
    return x, f(x)


def _polyline_distance(domain, xp, t, h):
    """Exact distance to a piecewise linear graph.

    The closest boundary point lies within horizontal distance h of x', so
    only the linear pieces meeting [x' - h, x' + h] are projected onto.
    """
    bps = domain._kink_tables()[2]
    lo = np.searchsorted(bps, xp - h, side="right")
    hi = np.searchsorted(bps, xp + h, side="left")
    count = hi - lo + 1
    out = np.empty_like(xp)
    order = np.argsort(count, kind="stable")
    edges = np.concatenate([[-np.inf], bps, [np.inf]])
    start = 0
    while start < len(order):
        # rows with similar piece counts share one padded block
        K = int(count[order[start]])
        stop = np.searchsorted(count[order], 2 * K, side="left")
        rows = order[start:max(stop, start + 1)]
        K = int(count[rows].max())
        j = lo[rows, None] + np.arange(K)
        valid = j <= hi[rows, None]
        jj = np.minimum(j, len(edges) - 2)
        x = xp[rows, None]
        e0 = np.maximum(edges[jj], x - h[rows, None])
        e1 = np.minimum(edges[jj + 1], x + h[rows, None])
        e1 = np.maximum(e1, e0)
        y0, y1 = domain.psi(e0), domain.psi(e1)
        dx, dy = e1 - e0, y1 - y0
        L2 = dx * dx + dy * dy
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(L2 > 0, ((x - e0) * dx + (t[rows, None] - y0) * dy) / L2, 0.0)
        u = np.clip(u, 0.0, 1.0)
        d2 = (x - e0 - u * dx) ** 2 + (t[rows, None] - y0 - u * dy) ** 2
        out[rows] = np.sqrt(np.min(np.where(valid, d2, np.inf), axis=1))
        start = max(stop, start + 1)
    return out


def dist_to_boundary(domain, x, samples=257):
    """Euclidean distance from points of the domain to its boundary graph.

    Piecewise linear graphs are handled exactly; other graphs by dense
    sampling of the horizontal range that can hold the closest point,
    followed by golden-section refinement.
    """
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    xp, t = pts[:, 0], pts[:, 1]
    h = t - domain.psi(xp)
    if np.any(h < -1e-14 * np.maximum(1.0, np.abs(t))):
        raise ValueError("not in domain")
    h = np.maximum(h, 0.0)
    if domain.is_flat:
        out = h
    elif domain.kinks is not None and domain.kind != "custom":
        out = _polyline_distance(domain, xp, t, h)
    else:
        s = np.linspace(-1.0, 1.0, samples)
        Y = xp[:, None] + h[:, None] * s
        D2 = (Y - xp[:, None]) ** 2 + (domain.psi(Y) - t[:, None]) ** 2
        i = np.argmin(D2, axis=1)
        rows = np.arange(len(xp))
        lo = Y[rows, np.maximum(i - 1, 0)]
        hi = Y[rows, np.minimum(i + 1, samples - 1)]

        def f(y):
            return (y - xp) ** 2 + (domain.psi(y) - t) ** 2

        _, fmin = _golden_min(f, lo, hi)
        out = np.sqrt(np.minimum(fmin, D2[rows, i]))
    return float(out[0]) if scalar else out


def mollifier_constant(domain):
    """The slope c = 2(1 + M) in rho(x', s) = c s + theta_s * psi(x')."""
    return 2.0 * (1.0 + domain.M)


def adapted_distance(domain, x, c=None):
    """Smoothed distance delta solving c*delta + (theta_delta * psi)(x') = t.

    rho(x', s) is strictly increasing in s with slope at least c - M > 1, so
    the root is bracketed by [0, (t - psi(x'))/(c - M)] and found by
    bracketed Newton iteration.
    """
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    xp, t = pts[:, 0], pts[:, 1]
    if c is None:
        c = mollifier_constant(domain)
    if c - domain.M <= 1.0:
        raise ValueError("mollifier slope c must exceed M + 1")
    h = t - domain.psi(xp)
    if np.any(h <= 0):
        raise ValueError("not in domain")
    if domain.is_flat:
        out = t / c
        return float(out[0]) if scalar else out

    def g_at(s, idx):
        val, der = domain.smoothed_psi_ds(xp[idx], s)
        return c * s + val - t[idx], c + der

    def g(s):
        return g_at(s, slice(None))

    lo = np.zeros_like(t)
    hi = h / (c - domain.M) * (1 + 1e-9) + 1e-300
    glo, ghi = g(lo)[0], g(hi)[0]
    if np.any(glo > 0) or np.any(ghi < 0):
        raise RuntimeError("root bracket failure in adapted_distance")
    # Newton, falling back to bisection whenever a step leaves the bracket
    s = 0.5 * (lo + hi)
    todo = np.arange(len(t))
    for _ in range(200):
        gs, dg = g_at(s[todo], todo)
        neg = gs < 0
        lo[todo] = np.where(neg, s[todo], lo[todo])
        hi[todo] = np.where(neg, hi[todo], s[todo])
        new = s[todo] - gs / dg
        ok = (new >= lo[todo]) & (new <= hi[todo])
        new = np.where(ok, new, 0.5 * (lo[todo] + hi[todo]))
        done = (np.abs(new - s[todo]) <= 1e-14 * new) | (gs == 0)
        s[todo] = new
        todo = todo[~done]
        if todo.size == 0:
            break
    out = s
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# dyadic cubes, tents, Whitney cubes


@dataclass(frozen=True)
class DyadicCube:
    """Boundary cube [k 2^j, (k+1) 2^j) in graph coordinates."""

    level: int
    k: int

    @property
    def side(self):
        return 2.0 ** self.level

    @property
    def interval(self):
        s = self.side
        return self.k * s, (self.k + 1) * s

    def children(self):
        return [DyadicCube(self.level - 1, 2 * self.k), DyadicCube(self.level - 1, 2 * self.k + 1)]


def dyadic_cubes(level, a, b):
    """Cubes of side 2^level meeting [a, b)."""
    s = 2.0 ** level
    k0 = math.floor(a / s)
    k1 = math.ceil(b / s)
    return [DyadicCube(level, k) for k in range(k0, k1)]


@dataclass(frozen=True)
class TentRegion:
    """T(Q) (kind "T") or the upper slab W(Q) (kind "W") above a boundary cube."""

    kind: str
    cube: DyadicCube
    domain: GraphDomain

    @property
    def heights(self):
        s = self.cube.side
        return (0.0 if self.kind == "T" else 4.0 * s), 8.0 * s

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        a, b = self.cube.interval
        lo, hi = self.heights
        xp = pts[..., 0]
        h = pts[..., 1] - self.domain.psi(xp)
        return (xp >= a) & (xp < b) & (h > lo) & (h < hi)

    @property
    def area(self):
        lo, hi = self.heights
        return self.cube.side * (hi - lo)


def tent_regions(domain, Q):
    return TentRegion("T", Q, domain), TentRegion("W", Q, domain)


@dataclass(frozen=True)
class WhitneyCube:
    x0: float
    t0: float
    side: float
    dist: float

    @property
    def center(self):
        return np.array([self.x0 + self.side / 2, self.t0 + self.side / 2])


def _cube_boundary_distance(domain, x0, t0, s, samples=129):
    """Distance from axis-aligned squares to the boundary graph (0 if they meet it)."""
    x0, t0, s = map(lambda v: np.asarray(v, dtype=float), (x0, t0, s))
    if domain.is_flat:
        return np.maximum(t0, 0.0)
    # inside check along the bottom edge
    u = np.linspace(0.0, 1.0, samples)
    bottom = x0[:, None] + s[:, None] * u
    gap = t0[:, None] - domain.psi(bottom)
    touching = np.min(gap, axis=1) <= 0
    # the closest boundary point lies within the vertical gap of the square
    R = np.maximum(np.max(gap, axis=1), 0.0) + s
    v = np.linspace(-1.0, 1.0, 2 * samples)
    ys = (x0 + s / 2)[:, None] + (s / 2 + R)[:, None] * v
    ps = domain.psi(ys)
    dx = np.maximum(np.maximum(x0[:, None] - ys, ys - (x0 + s)[:, None]), 0.0)
    dt = np.maximum(np.maximum(t0[:, None] - ps, ps - (t0 + s)[:, None]), 0.0)
    d = np.min(np.hypot(dx, dt), axis=1)
    return np.where(touching, 0.0, d)


def whitney_decompose(domain, region, max_depth, side=None):
    """Dyadic Whitney cubes filling a box ``(a, b, c, d)`` above the boundary.

    Squares are split while their side exceeds their distance to the
    boundary, down to side 2^-max_depth; squares still too close at that
    point form the uncovered collar and are dropped, as are squares below
    the graph.  The starting side defaults to the largest power of two not
    exceeding either box side.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    a, b, c, d = map(float, region)
    s0 = side or 2.0 ** math.floor(math.log2(min(b - a, d - c)))
    nx, nt = (b - a) / s0, (d - c) / s0
    if abs(nx - round(nx)) > 1e-9 or abs(nt - round(nt)) > 1e-9:
        raise ValueError("region sides must be integer multiples of a dyadic side")
    xs = a + s0 * np.arange(round(nx))
    ts = c + s0 * np.arange(round(nt))
    X, T = np.meshgrid(xs, ts, indexing="ij")
    X, T = X.ravel(), T.ravel()
    s = s0
    smin = 2.0 ** (-max_depth)
    out = []
    while X.size:
        dist = _cube_boundary_distance(domain, X, T, np.full(X.shape, s))
        below = domain.psi(X + s / 2) >= T + s
        below &= dist <= 0
        keep = (dist >= s) & ~below
        for x0, t0, dd in zip(X[keep], T[keep], dist[keep]):
            out.append(WhitneyCube(float(x0), float(t0), s, float(dd)))
        split = ~keep & ~below
        if s / 2 < smin * (1 - 1e-12):
            break
        X, T = X[split], T[split]
        h = s / 2
        X = np.concatenate([X, X + h, X, X + h])
        T = np.concatenate([T, T, T + h, T + h])
        s = h
    return out


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class BoundarySegment:
    """The piece of the boundary graph over a <= x' <= b."""

    domain: GraphDomain
    a: float
    b: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle [a, b] x [c, d]."""

    a: float
    b: float
    c: float
    d: float


@dataclass
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    target: object = None

    def integrate(self, f):
        vals = f(self.nodes)
        return float(np.sum(vals * self.weights))

    @property
    def measure(self):
        return float(np.sum(self.weights))


def _order_rule(order):
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= 8:
        raise ValueError(f"unsupported quadrature order {order!r}")
    if order == 1:
        return np.array([0.0]), np.array([2.0])
    return gauss_legendre(int(order))


def _tensor(xa, xb, ya, yb, order, nx=1, ny=1, xbreaks=()):
    z, w = _order_rule(order)
    ex = np.linspace(xa, xb, nx + 1)
    if xbreaks:
        ex = np.unique(np.concatenate([ex, [c for c in xbreaks if xa < c < xb]]))
    ey = np.linspace(ya, yb, ny + 1)
    hx, hy = np.diff(ex) / 2, np.diff(ey) / 2
    px = ((ex[:-1] + ex[1:]) / 2)[:, None] + hx[:, None] * z
    py = ((ey[:-1] + ey[1:]) / 2)[:, None] + hy[:, None] * z
    wx = (hx[:, None] * w).ravel()
    wy = (hy[:, None] * w).ravel()
    X, Y = np.meshgrid(px.ravel(), py.ravel(), indexing="ij")
    W = np.outer(wx, wy)
    return X.ravel(), Y.ravel(), W.ravel()


def quadrature_rule(region, order, subdiv=1):
    """Tensor quadrature on a tent, Whitney cube, box or boundary segment.

    ``order`` 1 is the midpoint rule and 2..8 are Gauss-Legendre with that
    many points per axis (exact for degree 2*order-1 on flat pieces).  Tent
    regions use the shear (x', s) -> (x', psi(x') + s), which has unit
    Jacobian; boundary segments carry the arclength weight.
    """
    n = int(subdiv)
    if isinstance(region, TentRegion):
        a, b = region.cube.interval
        lo, hi = region.heights
        X, S, W = _tensor(a, b, lo, hi, order, n, n * (8 if region.kind == "T" else 4))
        nodes = np.stack([X, region.domain.psi(X) + S], axis=-1)
        return QuadratureRule(nodes, W, region)
    if isinstance(region, WhitneyCube):
        X, T, W = _tensor(region.x0, region.x0 + region.side, region.t0,
                          region.t0 + region.side, order, n, n)
        return QuadratureRule(np.stack([X, T], axis=-1), W, region)
    if isinstance(region, Box):
        X, T, W = _tensor(region.a, region.b, region.c, region.d, order, n, n)
        return QuadratureRule(np.stack([X, T], axis=-1), W, region)
    if isinstance(region, BoundarySegment):
        z, w = _order_rule(order)
        edges = np.linspace(region.a, region.b, n + 1)
        edges = np.unique(np.concatenate([edges, region.domain.breakpoints(region.a, region.b)]))
        h = np.diff(edges) / 2
        xs = (((edges[:-1] + edges[1:]) / 2)[:, None] + h[:, None] * z).ravel()
        ws = (h[:, None] * w).ravel() * region.domain.arclength_density(xs)
        return QuadratureRule(xs, ws, region)
    raise ValueError(f"unsupported region {type(region).__name__}")
