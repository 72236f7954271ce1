"""Neumann problem side: divergence-free extensions of boundary atoms, wavelet
moments of fields on the half-plane and their boundary representatives."""

import math
from dataclasses import dataclass, field

import numpy as np

from .funcspace import BoundaryFunction, Field, WhitneyArray, multiindices
from .geometry import composite_gl, gauss_legendre, half_plane
from .wavelets import build_wavelets

# --------------------------------------------------------------------------
# harmonic functions on the unit disc


class DiskNeumannSolution:
    """u = Re f with f(z) = 2 Σ_{n>=1} c_n z^n / n, so ∂_r u = Σ 2 Re(c_n e^{inφ}) on |z| = 1.

    ``coef[n]`` is the Fourier coefficient c_n of the Neumann data (n >= 0);
    the zero mode is ignored.
    """

    def __init__(self, coef):
        self.coef = np.asarray(coef, dtype=complex)
        self.terms = len(self.coef) - 1

    def _series(self, z, shift):
        # Σ_{n>=1} c_n z^(n - shift) * (1/n if shift == 0 else 1), by Horner
        n = np.arange(1, self.terms + 1)
        c = self.coef[1:] / n if shift == 0 else self.coef[1:]
        acc = np.zeros(np.shape(z), dtype=complex)
        for ck in c[::-1]:
            acc = acc * z + ck
        return acc * z if shift == 0 else acc

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        return 2 * np.real(self._series(z, 0))

    def gradient(self, z):
        """(u_x, u_y) from f' = u_x - i u_y."""
        z = np.asarray(z, dtype=complex)
        fp = 2 * self._series(z, 1)
        return np.real(fp), -np.imag(fp)

    def radial_derivative(self, phi, r=1.0):
        z = r * np.exp(1j * np.asarray(phi, dtype=float))
        ux, uy = self.gradient(z)
        return ux * np.cos(phi) + uy * np.sin(phi)

    def boundary_data(self, phi):
        """The truncated Fourier series of the Neumann data (zero mode dropped)."""
        phi = np.asarray(phi, dtype=float)
        n = np.arange(1, self.terms + 1)
        e = np.exp(1j * np.multiply.outer(phi, n))
        return 2 * np.real(e @ self.coef[1:])


def disk_neumann_solve(g, terms=512, samples=None, mean_tol=1e-2):
    """Solve Δu = 0 in the unit disc with ∂_r u = g on the circle.

    ``g`` is a callable of the angle or an array of Fourier coefficients.
    Data whose mean exceeds ``mean_tol`` times its mean modulus are rejected;
    smaller means are removed.
    """
    if callable(g):
        ns = samples or 16 * terms
        phi = 2 * np.pi * np.arange(ns) / ns
        vals = np.asarray(g(phi), dtype=float)
        coef = np.fft.fft(vals)[: terms + 1] / ns
        scale = float(np.mean(np.abs(vals)))
    else:
        coef = np.asarray(g, dtype=complex)[: terms + 1]
        scale = float(np.sqrt(np.sum(np.abs(coef) ** 2)))
    if abs(coef[0]) > mean_tol * max(scale, 1e-300):
        raise ValueError(f"Neumann data has nonzero mean {coef[0].real:.3g}")
    coef = coef.copy()
    coef[0] = 0.0
    return DiskNeumannSolution(coef)


class KelvinReflection:
    """u(R^2 z / |z|^2) for |z| > R: harmonic outside the disc of radius R, equal to u on its circle.

    ``u`` is a DiskNeumannSolution (or anything with ``value`` and
    ``gradient`` taking complex points) or a plain callable of z.
    """

    def __init__(self, u, radius=1.0):
        self.u = u
        self.radius = float(radius)

    def _invert(self, z):
        z = np.asarray(z, dtype=complex)
        return self.radius ** 2 * z / np.abs(z) ** 2

    def value(self, z):
        w = self._invert(z)
        return self.u.value(w) if hasattr(self.u, "value") else self.u(w)

    def gradient(self, z):
        # z -> R^2/conj(z) is anticonformal: ∇(u∘w) = Dw^T ∇u(w), Dw symmetric
        z = np.asarray(z, dtype=complex)
        ux, uy = self.u.gradient(self._invert(z))
        x, y = np.real(z), np.imag(z)
        r2 = x * x + y * y
        a = self.radius ** 2 * (y * y - x * x) / r2 ** 2
        b = -2 * self.radius ** 2 * x * y / r2 ** 2
        return a * ux + b * uy, b * ux - a * uy


def kelvin_reflect(u, radius=1.0):
    return KelvinReflection(u, radius)


# --------------------------------------------------------------------------
# the cylinder above a boundary patch


class CylinderMap:
    """Bilipschitz map from the unit disc onto the cylinder above a boundary patch.

    The disc is mapped radially onto the rectangle [x0 - 2r, x0 + 2r] x [0, r]
    (star-shaped about its centre p0), the lower semicircle going linearly
    onto the bottom edge; the rectangle is then sheared by the graph,
    (x', s) -> (x', s + psi(x')).  The bottom edge becomes the boundary patch.
    """

    def __init__(self, x0, r, domain=None):
        self.x0 = float(x0)
        self.r = float(r)
        self.domain = domain if domain is not None else half_plane()
        self.p0 = np.array([self.x0, 0.5 * self.r])

    @property
    def box(self):
        """(x_min, x_max, height) of the rectangle before shearing."""
        return self.x0 - 2 * self.r, self.x0 + 2 * self.r, self.r

    def edge(self, phi):
        """Rectangle boundary point c(φ) and its derivative c'(φ)."""
        phi = np.mod(np.asarray(phi, dtype=float), 2 * np.pi)
        r, x0 = self.r, self.x0
        cx, cy = np.empty_like(phi), np.empty_like(phi)
        dx, dy = np.zeros_like(phi), np.zeros_like(phi)
        bottom = phi >= np.pi
        cx[bottom] = x0 - 2 * r + 4 * r * (phi[bottom] - np.pi) / np.pi
        cy[bottom] = 0.0
        dx[bottom] = 4 * r / np.pi
        sig = 6 * r * phi / np.pi
        right = ~bottom & (sig < r)
        top = ~bottom & (sig >= r) & (sig < 5 * r)
        left = ~bottom & (sig >= 5 * r)
        cx[right], cy[right], dy[right] = x0 + 2 * r, sig[right], 6 * r / np.pi
        cx[top], cy[top], dx[top] = x0 + 2 * r - (sig[top] - r), r, -6 * r / np.pi
        cx[left], cy[left], dy[left] = x0 - 2 * r, r - (sig[left] - 5 * r), -6 * r / np.pi
        return np.stack([cx, cy], -1), np.stack([dx, dy], -1)

    def forward(self, z):
        """Disc point(s) -> domain points, plus the Jacobian matrices."""
        z = np.asarray(z, dtype=complex)
        rho, phi = np.abs(z), np.angle(z)
        c, dc = self.edge(phi)
        v = c - self.p0
        q = self.p0 + rho[..., None] * v
        er = np.stack([np.cos(phi), np.sin(phi)], -1)
        ephi = np.stack([-np.sin(phi), np.cos(phi)], -1)
        J0 = v[..., :, None] * er[..., None, :] + dc[..., :, None] * ephi[..., None, :]
        slope = self.domain.dpsi(q[..., 0])
        J = J0.copy()
        J[..., 1, :] += slope[..., None] * J0[..., 0, :]
        y = np.stack([q[..., 0], q[..., 1] + self.domain.psi(q[..., 0])], -1)
        return y, J

    def inverse(self, X, T):
        """Domain points -> (disc point, inside mask)."""
        X = np.asarray(X, dtype=float)
        S = np.asarray(T, dtype=float) - self.domain.psi(X)
        vx, vs = X - self.x0, S - 0.5 * self.r
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.where(vx != 0, 2 * self.r / np.abs(vx), np.inf)
            ls = np.where(vs != 0, 0.5 * self.r / np.abs(vs), np.inf)
            lam = np.minimum(lx, ls)
            fin = np.isfinite(lam)
            rho = np.where(fin, 1.0 / lam, 0.0)
            cx = self.x0 + np.where(fin, lam * vx, 0.0)
            cs = 0.5 * self.r + np.where(fin, lam * vs, 0.0)
        phi = self._angle(cx, cs, lx <= ls, vx, vs)
        inside = (rho < 1.0) & (S > 0)
        return rho * np.exp(1j * phi), inside

    def _angle(self, cx, cs, side_hit, vx, vs):
        r, x0 = self.r, self.x0
        phi = np.empty_like(cx)
        bottom = ~side_hit & (vs < 0)
        top = ~side_hit & (vs >= 0)
        right = side_hit & (vx > 0)
        left = side_hit & (vx <= 0)
        phi[bottom] = np.pi + np.pi * (cx[bottom] - (x0 - 2 * r)) / (4 * r)
        phi[right] = np.pi * cs[right] / (6 * r)
        phi[top] = np.pi * (r + (x0 + 2 * r - cx[top])) / (6 * r)
        phi[left] = np.pi * (5 * r + (r - cs[left])) / (6 * r)
        return phi

    def pullback(self, atom, terms, panels=None, order=8):
        """Fourier coefficients of the pulled-back data ã(φ) = a(X) w(X) dX/dφ."""
        a, b = atom.support
        lo, hi, _ = self.box
        if a < lo or b > hi:
            raise ValueError("atom support leaves the cylinder base")
        panels = panels or max(64, terms // 2)
        breaks = list(atom.breaks) + self.domain.breakpoints(a, b)
        xs, ws = composite_gl(a, b, panels, order, breaks)
        vals = atom(xs) * self.domain.arclength_density(xs) * ws
        phi = np.pi + np.pi * (xs - lo) / (4 * self.r)
        n = np.arange(terms + 1)
        # (1/2π) ∫ ã e^{-inφ} dφ = (1/2π) ∫ a w e^{-inφ(X)} dX
        coef = np.exp(-1j * np.multiply.outer(n, phi)) @ vals / (2 * np.pi)
        return coef, float(np.sum(np.abs(vals))) / (2 * np.pi)


# --------------------------------------------------------------------------
# extension of a negative atom


class NeumannExtension:
    """G = 1_U (J ∇ũ / det J)∘Ψ^-1 placed in the components γ + e_i.

    Satisfies <∇^m F, G> = <a, ∂^γ F> for smooth F and is weakly
    divergence free in the domain.
    """

    def __init__(self, cmap, solution, m, gamma, atom=None):
        self.map = cmap
        self.solution = solution
        self.m = int(m)
        self.gamma = tuple(gamma)
        self.atom = atom
        self.name = f"G[{getattr(atom, 'kind', 'atom')}]"

    @property
    def support_box(self):
        return self.map.box

    @property
    def region(self):
        return self.map.domain.window

    def jump_heights(self, x):
        """Heights above the graph where G jumps on the vertical through x.

        The star map has a corner of its Jacobian along the rays from the
        rectangle centre to its corners, and G vanishes above the top.
        """
        r = self.map.r
        d = 0.25 * np.abs(np.asarray(x, dtype=float) - self.map.x0)
        return np.stack([0.5 * r - d, 0.5 * r + d, np.full_like(d, r)], -1)

    def vector(self, X, T):
        X, T = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(T, dtype=float))
        z, inside = self.map.inverse(X, T)
        out = np.zeros(X.shape + (2,))
        if not np.any(inside):
            return out
        zi = z[inside]
        _, J = self.map.forward(zi)
        ux, uy = self.solution.gradient(zi)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        out[inside, 0] = (J[:, 0, 0] * ux + J[:, 0, 1] * uy) / det
        out[inside, 1] = (J[:, 1, 0] * ux + J[:, 1, 1] * uy) / det
        return out

    def evaluate(self, X, T):
        vec = self.vector(X, T)
        out = {a: np.zeros(vec.shape[:-1]) for a in multiindices(self.m)}
        for i in range(2):
            al = (self.gamma[0] + (i == 0), self.gamma[1] + (i == 1))
            out[al] = vec[..., i]
        return out

    def magnitude(self, X, T):
        return np.linalg.norm(self.vector(X, T), axis=-1)


def extend_neumann_atom(atom, domain=None, m=1, gamma=None, terms=512, mean_tol=1e-2):
    """Divergence-free extension G of a negative atom a with <∇^m F, G> = <a, ∂^γ F>.

    The cylinder has base B(x0, 2r) on the boundary and height r; the
    Neumann problem is solved on the reference disc with ``terms`` Fourier
    modes.  A residual mean of the pulled-back data is removed when it is
    below ``mean_tol`` of the total mass, and rejected otherwise.
    """
    domain = domain if domain is not None else (atom.domain or half_plane())
    gamma = tuple(gamma) if gamma is not None else (m - 1, 0)
    if sum(gamma) != m - 1:
        raise ValueError("|gamma| must equal m - 1")
    cmap = CylinderMap(atom.x0, atom.r, domain)
    coef, mass = cmap.pullback(atom, terms)
    if abs(coef[0]) > mean_tol * max(mass, 1e-300):
        raise ValueError("pulled-back atom has nonzero mean")
    coef[0] = 0.0
    return NeumannExtension(cmap, DiskNeumannSolution(coef), m, gamma, atom)


def column_rule(xs, height, levels, order, breaks=None, top_panels=4):
    """Per-column rules on [0, height], graded toward 0, with per-column extra breaks.

    ``breaks`` has shape (len(xs), k); each column gets the same number of
    nodes (breaks outside the interval give empty panels).
    Returns T, W of shape (len(xs), nodes).
    """
    base = [0.0] + [height * 2.0 ** (-k) for k in range(levels, 0, -1)]
    base += list(np.linspace(0.5 * height, height, top_panels + 1))
    E = np.repeat(np.asarray(base)[None, :], len(xs), 0)
    if breaks is not None:
        E = np.concatenate([E, np.clip(breaks, 0.0, height)], 1)
    E = np.sort(E, axis=1)
    z, w = gauss_legendre(order)
    lo, hi = E[:, :-1], E[:, 1:]
    T = (0.5 * (lo + hi))[..., None] + (0.5 * (hi - lo))[..., None] * z
    W = (0.5 * (hi - lo))[..., None] * w
    return T.reshape(len(xs), -1), W.reshape(len(xs), -1)


def _jumps(G, xs):
    f = getattr(G, "jump_heights", None)
    return f(xs) if f is not None else None


def _components(G, X, T):
    if hasattr(G, "evaluate"):
        return G.evaluate(X, T)
    raise TypeError("G must provide evaluate(x, t)")


def neumann_pairing(F, G, box=None, panels=32, order=8, levels=12, breaks=()):
    """<∇^m F, G> over a box (x_min, x_max, height) above the graph.

    Uses the sheared coordinates (x', s), s = t - psi(x'), which have unit
    Jacobian; s is graded toward the boundary.
    """
    domain = G.map.domain if hasattr(G, "map") else half_plane()
    lo, hi, h = box if box is not None else G.support_box
    brk = list(breaks) + domain.breakpoints(lo, hi)
    if hasattr(G, "kinks"):
        brk += G.kinks(lo, hi)
    if getattr(G, "atom", None) is not None:
        brk += list(G.atom.breaks)
    xs, wx = composite_gl(lo, hi, panels, order, brk)
    S, W = column_rule(xs, h, levels, order, _jumps(G, xs))
    X = np.repeat(xs[:, None], S.shape[1], 1)
    T = S + domain.psi(X)
    W = wx[:, None] * W
    comps = _components(G, X, T)
    tot = 0.0
    for al, g in comps.items():
        if np.any(g):
            tot += float(np.sum(F.deriv(al, X, T) * g * W))
    return tot


def boundary_pairing(atom, F, gamma, domain=None):
    """<a, ∂^γ F> = ∫ a(x') ∂^γ F(x', psi(x')) dσ."""
    domain = domain if domain is not None else (atom.domain or half_plane())
    return _atom_integral(atom, lambda x: F.deriv(tuple(gamma), x, domain.psi(x)), domain)


def _atom_integral(atom, f, domain, panels=256, order=8):
    a, b = atom.support
    brk = list(atom.breaks) + domain.breakpoints(a, b)
    xs, ws = composite_gl(a, b, panels, order, brk)
    return float(np.sum(atom(xs) * domain.arclength_density(xs) * f(xs) * ws))


def weak_divergence_residual(G, phi, box, domain=None, normalized=False, order=8, panels=24):
    """Σ_α ∫ ∂^α φ G_α for φ supported in ``box`` = (x_min, x_max, t_min, t_max).

    The box must lie inside the domain.  With ``normalized`` the value is
    divided by ||∇^m φ||_2 ||G||_2 over the box.
    """
    if domain is None:
        domain = G.map.domain if hasattr(G, "map") else half_plane()
    xa, xb, ta, tb = box
    xs = np.linspace(xa, xb, 257)
    if ta <= float(np.max(domain.psi(xs))):
        raise ValueError("test function support meets the boundary")
    x, wx = composite_gl(xa, xb, panels, order)
    t, wt = composite_gl(ta, tb, panels, order)
    X, T = np.meshgrid(x, t, indexing="ij")
    W = wx[:, None] * wt[None, :]
    comps = _components(G, X, T)
    num, nphi, ng = 0.0, 0.0, 0.0
    for al, g in comps.items():
        d = phi.deriv(al, X, T)
        num += float(np.sum(d * g * W))
        nphi += float(np.sum(d * d * W))
        ng += float(np.sum(g * g * W))
    if not normalized:
        return num
    if nphi == 0.0 or ng == 0.0:
        return 0.0
    return num / math.sqrt(nphi * ng)


class FlattenedField:
    """H(x', s) = J^-1 G(x', s + psi(x')), J = [[1, 0], [psi', 1]] (first order only)."""

    def __init__(self, G, domain):
        self.G = G
        self.domain = domain
        self.m = 1
        self.name = f"flat({getattr(G, 'name', 'G')})"
        self.atom = getattr(G, "atom", None)
        if hasattr(G, "jump_heights"):
            self.jump_heights = G.jump_heights
        if hasattr(G, "support_box"):
            self.support_box = G.support_box  # the sheared rectangle is the same box

    def kinks(self, lo, hi):
        """Vertical lines where H jumps: the graph kinks, now inside the half-plane."""
        return self.domain.breakpoints(lo, hi)

    def evaluate(self, X, S):
        X, S = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(S, dtype=float))
        comps = _components(self.G, X, S + self.domain.psi(X))
        g1, g2 = comps[(1, 0)], comps[(0, 1)]
        return {(1, 0): g1, (0, 1): g2 - self.domain.dpsi(X) * g1}

    def magnitude(self, X, S):
        c = self.evaluate(X, S)
        return np.sqrt(c[(1, 0)] ** 2 + c[(0, 1)] ** 2)


def flatten_test_function(phi, domain):
    """φ̃(x', s) = φ(x', s + psi(x')) with first derivatives by the chain rule."""
    def fn(x, s):
        return phi(x, s + domain.psi(x))

    def deriv(al, x, s):
        t = s + domain.psi(x)
        if al == (0, 0):
            return phi(x, t)
        if al == (0, 1):
            return phi.deriv((0, 1), x, t)
        if al == (1, 0):
            return phi.deriv((1, 0), x, t) + domain.dpsi(x) * phi.deriv((0, 1), x, t)
        return None

    return Field(fn, deriv, f"flat({getattr(phi, 'name', 'phi')})")


def graph_flatten(G, domain):
    """Pull G back to the half-plane so that pairings with gradients are preserved."""
    if getattr(G, "m", 1) != 1:
        raise NotImplementedError("flattening is implemented for m = 1 only")
    if domain.is_flat:
        return G
    return FlattenedField(G, domain)


# --------------------------------------------------------------------------
# wavelet moments


def _smoothstep(v, n=0):
    """S(v) = 10v^3 - 15v^4 + 6v^5 on [0, 1] and its derivatives."""
    c = np.array([0, 0, 0, 10.0, -15.0, 6.0])
    for _ in range(n):
        c = np.polynomial.polynomial.polyder(c)
    inside = np.polynomial.polynomial.polyval(np.clip(v, 0, 1), c)
    if n == 0:
        return np.where(v <= 0, 0.0, np.where(v >= 1, 1.0, inside))
    return np.where((v <= 0) | (v >= 1), 0.0, inside)


def cutoff_weight(t, ell, j, n):
    """∂_t^n [t^j η(t / ℓ) / j!], η = 1 below ℓ and 0 above 2ℓ."""
    t = np.asarray(t, dtype=float)
    u = t / ell
    tot = np.zeros_like(t)
    for k in range(n + 1):
        if n - k > j:
            continue
        pw = t ** (j - (n - k)) / math.factorial(j - (n - k))
        if k == 0:
            eta = 1.0 - _smoothstep(u - 1.0)
        else:
            eta = -_smoothstep(u - 1.0, k) / ell ** k
        tot = tot + math.comb(n, k) * pw * eta
    return tot


@dataclass
class NeumannMoments:
    """Coefficients <Ψ_Q, M_j G> = <∇^m(Ψ_Q(x) t^j η_Q(t) / j!), G>.

    ``detail[(i, k, j)]`` holds wavelet coefficients on level i (side 2^-i),
    ``scaling[(k, j)]`` the scaling-function coefficients on the coarsest
    level i0, used only for reconstruction.
    """

    detail: dict
    scaling: dict
    i0: int
    levels: int
    window: tuple
    m: int
    wavelets: object = None
    meta: dict = field(default_factory=dict)

    def reconstruct(self, j, x):
        ws = self.wavelets
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for (k, jj), c in self.scaling.items():
            if jj == j:
                out += c * ws.scaled("phi", self.i0, k, x)
        for (i, k, jj), c in self.detail.items():
            if jj == j:
                out += c * ws.scaled("psi", i, k, x)
        return out

    def rows(self):
        out = [("phi", self.i0, k, j, c) for (k, j), c in sorted(self.scaling.items())]
        out += [("psi", i, k, j, c) for (i, k, j), c in sorted(self.detail.items())]
        return out

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("kind,level,translate,j,value\n")
            for r in self.rows():
                fh.write(",".join(str(v) for v in r[:4]) + f",{r[4]:.17g}\n")


def neumann_moments(G, wavelets=None, i0=0, levels=5, window=None, m=None, domain=None,
                    jx=6, order=8, t_extra=6):
    """Wavelet coefficients of M_j G, j < m, on levels i0 .. i0 + levels - 1.

    Column integrals in t are taken on one graded rule over [0, 2^(1-i0)]
    and summed in x on the dyadic grid of spacing 2^-(i0 + levels - 1 + jx),
    where the wavelet tables are exact.  Fields on graph domains are
    flattened first.
    """
    ws = wavelets if wavelets is not None else build_wavelets(3)
    m = m if m is not None else getattr(G, "m", 1)
    if ws.max_derivative < m:
        raise ValueError(f"D{2 * ws.N} wavelets are not smooth enough for m = {m}")
    domain = domain if domain is not None else (G.map.domain if hasattr(G, "map") else None)
    H = graph_flatten(G, domain) if domain is not None and not domain.is_flat else G
    if window is None:
        lo, hi, _ = G.support_box
        window = (lo, hi)
    region = getattr(G, "region", None)
    if region is not None and (window[0] < region[0] or window[1] > region[1]):
        raise ValueError("window exceeds the region where the field is defined")
    top = i0 + levels - 1 + jx
    if top - i0 > ws.J:
        raise ValueError("cascade table too coarse for the requested grid")
    hx = 2.0 ** (-top)
    a = math.floor(window[0] / hx) * hx
    b = math.ceil(window[1] / hx) * hx
    nx = int(round((b - a) / hx)) + 1
    xs = a + hx * np.arange(nx)
    tmax = 2.0 ** (1 - i0)
    T, wt = column_rule(xs, tmax, levels + t_extra, order, _jumps(H, xs))
    X = np.repeat(xs[:, None], T.shape[1], 1)
    comps = {al: g * wt for al, g in _components(H, X, T).items() if np.any(g)}
    detail, scaling = {}, {}
    for j in range(m):
        for lev, kind in [(i0, "phi")] + [(i, "psi") for i in range(i0, i0 + levels)]:
            ell = 2.0 ** (-lev)
            cols = {al: np.sum(g * cutoff_weight(T, ell, j, al[1]), axis=1)
                    for al, g in comps.items()}
            for k in ws.translates(lev, a, b):
                c = 0.0
                for al, col in cols.items():
                    c += float(ws.sample_grid(kind, lev, k, a, top, nx, al[0]) @ col) * hx
                if kind == "phi":
                    scaling[(k, j)] = c
                else:
                    detail[(lev, k, j)] = c
    return NeumannMoments(detail, scaling, i0, levels, (a, b), m, ws,
                          {"jx": jx, "order": order, "t_extra": t_extra})


def besov_norm_from_wavelets(moments, p, sigma, j=0, d=2):
    """(Σ_Q |c_Q|^p ℓ(Q)^((d-1)(1-p/2) - p σ))^(1/p) over the detail coefficients."""
    vals, ells = [], []
    for (i, k, jj), c in moments.detail.items():
        if jj == j:
            vals.append(abs(c))
            ells.append(2.0 ** (-i))
    vals, ells = np.array(vals), np.array(ells)
    if math.isinf(p):
        return float(np.max(vals * ells ** (-(d - 1) / 2 - sigma))) if len(vals) else 0.0
    return float(np.sum(vals ** p * ells ** ((d - 1) * (1 - p / 2) - p * sigma)) ** (1 / p))


# --------------------------------------------------------------------------
# boundary representative


def spectral_multiplier(samples, length, power):
    """Apply |ξ|^power to periodic samples; the zero mode goes to zero unless power == 0."""
    v = np.fft.fft(np.asarray(samples, dtype=float))
    xi = 2 * np.pi * np.fft.fftfreq(len(samples), d=length / len(samples))
    if power == 0:
        return np.real(np.fft.ifft(v))
    mult = np.zeros_like(xi)
    nz = xi != 0
    mult[nz] = np.abs(xi[nz]) ** power
    return np.real(np.fft.ifft(v * mult))


def spectral_derivative(samples, length, order):
    v = np.fft.fft(np.asarray(samples, dtype=float))
    xi = 2 * np.pi * np.fft.fftfreq(len(samples), d=length / len(samples))
    return np.real(np.fft.ifft(v * (1j * xi) ** order))


def laplacian_identity_residual(samples, lengths, k):
    """max |Σ_{|β|=k} k!/β! ∂^(2β) f - Δ^k f| / max |Δ^k f| for periodic samples in n dims."""
    f = np.fft.fftn(np.asarray(samples, dtype=float))
    n = f.ndim
    xis = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(s, d=L / s)
                        for s, L in zip(f.shape, lengths)], indexing="ij")
    lap = sum(-x ** 2 for x in xis) ** k
    tot = np.zeros_like(xis[0])
    for beta in multiindices(k, n):
        c = math.factorial(k) / math.prod(math.factorial(b) for b in beta)
        tot = tot + c * np.prod([(-x ** 2) ** b for x, b in zip(xis, beta)], axis=0)
    lhs = np.real(np.fft.ifftn(f * tot))
    rhs = np.real(np.fft.ifftn(f * lap))
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300))


@dataclass
class Representative:
    grid: np.ndarray
    g: dict           # j -> samples of g_j
    array: WhitneyArray
    window_error: float = float("nan")


def _sample_source(source, j, x):
    if isinstance(source, NeumannMoments):
        return source.reconstruct(j, x)
    return np.asarray(source[j](x), dtype=float)


def _representative_samples(source, m, a, b, n, mean_tol):
    L = b - a
    x = a + L * np.arange(n) / n
    out = {}
    for j in range(m):
        M = _sample_source(source, j, x)
        power = 2 * (j - m + 1)
        if power < 0:
            mean = float(np.mean(M))
            if abs(mean) > mean_tol * max(float(np.mean(np.abs(M))), 1e-300):
                raise ValueError(f"incompatible mean for M_{j}: {mean:.3g}")
        out[j] = spectral_multiplier(M, L, power)
    return x, out


def neumann_representative(source, m, window, n=4096, periodize=8, mean_tol=1e-6,
                           check_window=True):
    """Boundary array g with <Tr_(m-1) φ, g> = <∇^m φ, G>.

    g_j = (-Δ)^(j-m+1) M_j G is applied as a Fourier multiplier on a periodic
    window ``periodize`` times the data window; then
    g_γ = ∂^(γ_∥) g_(γ_⊥).  ``source`` is a NeumannMoments or a dict
    j -> callable M_j.
    """
    lo, hi = window
    c, w = 0.5 * (lo + hi), hi - lo
    a, b = c - 0.5 * periodize * w, c + 0.5 * periodize * w
    x, g = _representative_samples(source, m, a, b, n, mean_tol)
    err = float("nan")
    if check_window:
        x2, g2 = _representative_samples(source, m, 2 * a - c, 2 * b - c, 2 * n, mean_tol)
        inside = (x >= lo) & (x <= hi)
        err = max(float(np.max(np.abs(np.interp(x[inside], x2, g2[j]) - g[j][inside])))
                  for j in range(m))
    L = b - a
    comps = {}
    for gam in multiindices(m - 1):
        v = spectral_derivative(g[gam[1]], L, gam[0])
        comps[gam] = BoundaryFunction(lambda t, v=v: np.interp(t, x, v, period=L),
                                      name=f"g{gam}")
    return Representative(x, g, WhitneyArray(m, comps), err)


def representative_pairing(rep, phi, domain=None, panels=128, order=8, window=None):
    """<Tr_(m-1) φ, g> = Σ_γ ∫ ∂^γ φ(x', 0) g_γ(x') dx' on the half-plane."""
    x0, x1 = window if window is not None else (rep.grid[0], rep.grid[-1])
    xs, ws = composite_gl(x0, x1, panels, order)
    tot = 0.0
    for gam, f in rep.array.comps.items():
        tot += float(np.sum(phi.deriv(gam, xs, np.zeros_like(xs)) * f(xs) * ws))
    return tot


def disk_pairing(F, G, radial_levels=12, angular_panels=96, order=8):
    """<∇F, G> computed on the reference disc: ∫ (J^T ∇F∘Ψ) · ∇ũ dz.

    Angular panels break at the rays through the rectangle corners and at
    the pre-images of the atom's breakpoints.  The radius is graded toward
    1, and each ray also breaks where it crosses a vertical line through a
    kink of the graph, since the shear makes J jump there.
    """
    cm = G.map
    lo, hi, _ = cm.box
    r = cm.r
    brk = [0.0, math.pi / 6, 5 * math.pi / 6, math.pi, 2 * math.pi]
    if G.atom is not None:
        brk += [math.pi + math.pi * (b - lo) / (4 * r) for b in G.atom.breaks]
    phis, wp = composite_gl(0.0, 2 * math.pi, angular_panels, order, brk)
    base = [0.0] + [1.0 - 2.0 ** (-k) for k in range(1, radial_levels + 1)] + [1.0]
    c, _ = cm.edge(phis)
    vx = c[:, 0] - cm.x0
    kinks = np.asarray(cm.domain.breakpoints(lo, hi), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (kinks[None, :] - cm.x0) / vx[:, None]
    cross = np.where(np.isfinite(cross) & (cross > 0) & (cross < 1), cross, 1.0)
    E = np.sort(np.concatenate([np.repeat(np.asarray(base)[None, :], len(phis), 0), cross], 1), 1)
    z, w = gauss_legendre(order)
    half = 0.5 * (E[:, 1:] - E[:, :-1])
    R = ((0.5 * (E[:, 1:] + E[:, :-1]))[..., None] + half[..., None] * z).reshape(len(phis), -1)
    WR = (half[..., None] * w).reshape(len(phis), -1)
    PH = np.repeat(phis[:, None], R.shape[1], 1)
    W = WR * wp[:, None] * R
    zz = R * np.exp(1j * PH)
    y, J = cm.forward(zz)
    ux, uy = G.solution.gradient(zz)
    g = tuple(G.gamma)
    dF = [F.deriv((g[0] + 1, g[1]), y[..., 0], y[..., 1]),
          F.deriv((g[0], g[1] + 1), y[..., 0], y[..., 1])]
    # (J^T ∇F) · ∇ũ
    a0 = J[..., 0, 0] * dF[0] + J[..., 1, 0] * dF[1]
    a1 = J[..., 0, 1] * dF[0] + J[..., 1, 1] * dF[1]
    return float(np.sum((a0 * ux + a1 * uy) * W))
