"""Fields on the domain, boundary data, atoms and Taylor machinery."""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from numpy.polynomial import Polynomial

from .geometry import gauss_legendre, TentRegion


@dataclass(frozen=True)
class NormParams:
    """Exponents (p, theta, q) and order m.  ``p`` may be ``math.inf``."""

    p: float
    theta: float
    q: float = 1.0
    m: int = 1
    d: int = 2

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.q < 1:
            raise ValueError("q must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        pmin = (self.d - 1) / (self.d - 1 + self.theta)
        if not self.p > pmin:
            raise ValueError(f"p must exceed (d-1)/(d-1+theta) = {pmin:.6g}")

    @property
    def weight_exponent(self):
        """Exponent p - 1 - p*theta of the distance weight."""
        return self.p - 1 - self.p * self.theta

    def as_dict(self):
        return {"p": self.p, "theta": self.theta, "q": self.q, "m": self.m, "d": self.d}


# --------------------------------------------------------------------------
# multiindices


def multiindices(order, d=2):
    """All multiindices of length ``d`` with |alpha| = order."""
    if d == 1:
        return [(order,)]
    out = []
    for first in range(order, -1, -1):
        for rest in multiindices(order - first, d - 1):
            out.append((first,) + rest)
    return out


def multiindices_upto(order, d=2):
    return [a for k in range(order + 1) for a in multiindices(k, d)]


def mfact(alpha):
    return math.prod(math.factorial(a) for a in alpha)


def mbinom(alpha, beta):
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def leq(beta, alpha):
    return all(b <= a for b, a in zip(beta, alpha))


def split_multiindex(gamma):
    """(tangential part, normal order) of a multiindex."""
    return tuple(gamma[:-1]), gamma[-1]


# --------------------------------------------------------------------------
# finite differences

_FD = {
    0: ([0], [1.0]),
    1: ([-2, -1, 1, 2], [1 / 12, -8 / 12, 8 / 12, -1 / 12]),
    2: ([-2, -1, 0, 1, 2], [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12]),
    3: ([-3, -2, -1, 1, 2, 3], [1 / 8, -1.0, 13 / 8, -13 / 8, 1.0, -1 / 8]),
    4: ([-3, -2, -1, 0, 1, 2, 3], [-1 / 6, 2.0, -13 / 2, 28 / 3, -13 / 2, 2.0, -1 / 6]),
}


def fd_derivative(f, alpha, x, t, h):
    """Fourth-order central difference of f(x, t) for orders up to 4 per axis."""
    a, b = alpha
    if a > 4 or b > 4:
        raise ValueError("finite differences are limited to order 4 per axis")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    ox, wx = _FD[a]
    ot, wt = _FD[b]
    out = 0.0
    for i, cx in zip(ox, wx):
        for j, ct in zip(ot, wt):
            out = out + cx * ct * f(x + i * h, t + j * h)
    return out / h ** (a + b)


# --------------------------------------------------------------------------
# scalar and array fields


class Field:
    """Scalar field with optional analytic partial derivatives.

    ``deriv(alpha, x, t)`` may return None for orders it does not know, in
    which case central differences with step ``fd_step`` are used.
    """

    def __init__(self, fn, deriv=None, name="field", fd_step=1e-3):
        self.fn = fn
        self._deriv = deriv
        self.name = name
        self.fd_step = fd_step

    def __repr__(self):
        return f"Field({self.name})"

    def __call__(self, x, t):
        return self.fn(np.asarray(x, dtype=float), np.asarray(t, dtype=float))

    def at(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self(pts[..., 0], pts[..., 1])

    def deriv(self, alpha, x, t):
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) == 0:
            return self(x, t)
        if self._deriv is not None:
            out = self._deriv(alpha, np.asarray(x, dtype=float), np.asarray(t, dtype=float))
            if out is not None:
                return out
        return fd_derivative(self, alpha, x, t, self.fd_step)

    def magnitude(self, x, t):
        return np.abs(self(x, t))

    def scaled(self, lam):
        """The field x -> F(lam * x)."""
        lam = float(lam)
        base = self
        return Field(lambda x, t: base(lam * x, lam * t),
                     lambda a, x, t: lam ** sum(a) * base.deriv(a, lam * x, lam * t),
                     f"{self.name}({lam}x)", self.fd_step / lam)

    def shifted(self, dx=0.0, dt=0.0):
        base = self
        return Field(lambda x, t: base(x - dx, t - dt),
                     lambda a, x, t: base.deriv(a, x - dx, t - dt),
                     f"{self.name}(x-{dx},t-{dt})", self.fd_step)

    def __add__(self, other):
        if not isinstance(other, Field):
            other = constant(other)
        a, b = self, other
        return Field(lambda x, t: a(x, t) + b(x, t),
                     lambda al, x, t: a.deriv(al, x, t) + b.deriv(al, x, t),
                     f"({a.name}+{b.name})", min(a.fd_step, b.fd_step))

    __radd__ = __add__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * (other if isinstance(other, Field) else constant(other))

    def __mul__(self, other):
        a = self
        if not isinstance(other, Field):
            c = float(other)
            return Field(lambda x, t: c * a(x, t), lambda al, x, t: c * a.deriv(al, x, t),
                         f"{c}*{a.name}", a.fd_step)
        b = other

        def deriv(al, x, t):
            out = 0.0
            for be in product(*(range(k + 1) for k in al)):
                rest = tuple(k - j for k, j in zip(al, be))
                out = out + mbinom(al, be) * a.deriv(be, x, t) * b.deriv(rest, x, t)
            return out

        return Field(lambda x, t: a(x, t) * b(x, t), deriv, f"{a.name}*{b.name}",
                     min(a.fd_step, b.fd_step))

    __rmul__ = __mul__


class ArrayField:
    """Array of scalar fields indexed by the multiindices of one order."""

    def __init__(self, comps, name="array"):
        self.comps = dict(comps)
        orders = {sum(a) for a in self.comps}
        if len(orders) != 1:
            raise ValueError("components must share one order")
        self.order = orders.pop()
        expected = set(multiindices(self.order, len(next(iter(self.comps)))))
        if set(self.comps) != expected:
            raise ValueError("array components must cover each multiindex exactly once")
        self.name = name

    def __repr__(self):
        return f"ArrayField({self.name}, order={self.order})"

    def __getitem__(self, alpha):
        return self.comps[tuple(alpha)]

    def evaluate(self, x, t):
        return {a: np.asarray(c(x, t), dtype=float) for a, c in self.comps.items()}

    def magnitude(self, x, t):
        tot = 0.0
        for c in self.comps.values():
            tot = tot + np.asarray(c(x, t), dtype=float) ** 2
        return np.sqrt(tot)

    def scaled(self, lam):
        return ArrayField({a: _scale_any(c, lam) for a, c in self.comps.items()},
                          f"{self.name}({lam}x)")

    def __add__(self, other):
        return ArrayField({a: _add_any(c, other.comps[a]) for a, c in self.comps.items()},
                          f"({self.name}+{other.name})")


def _scale_any(c, lam):
    if isinstance(c, Field):
        return c.scaled(lam)
    return lambda x, t: c(lam * np.asarray(x), lam * np.asarray(t))


def _add_any(c1, c2):
    if isinstance(c1, Field) and isinstance(c2, Field):
        return c1 + c2
    return lambda x, t: c1(x, t) + c2(x, t)


def gradient_array(u, m, d=2):
    """The array of all order-m partial derivatives of a scalar field."""
    comps = {}
    for a in multiindices(m, d):
        comps[a] = Field(lambda x, t, a=a: u.deriv(a, x, t), name=f"d{a}{u.name}")
    return ArrayField(comps, f"grad^{m} {u.name}")


def magnitude(H, x, t):
    """|H| for scalar fields, arrays, or plain callables."""
    if hasattr(H, "magnitude"):
        return H.magnitude(x, t)
    return np.abs(H(x, t))


class Restricted:
    """H multiplied by the indicator of a region (given by a membership test)."""

    def __init__(self, H, member, name=None):
        self.H = H
        self.member = member
        self.name = name or f"1_region {getattr(H, 'name', 'H')}"

    def magnitude(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        inside = self.member(np.stack(np.broadcast_arrays(x, t), axis=-1))
        return np.where(inside, magnitude(self.H, x, t), 0.0)


# --------------------------------------------------------------------------
# zoo


def constant(c):
    c = float(c)
    return Field(lambda x, t: np.full(np.broadcast(x, t).shape, c),
                 lambda a, x, t: np.zeros(np.broadcast(x, t).shape), f"const({c})")


def _falling(n, k):
    return math.prod(range(n - k + 1, n + 1)) if k <= n else 0


def monomial(gamma, center=(0.0, 0.0)):
    """(x - cx)^a (t - ct)^b."""
    a, b = map(int, gamma)
    cx, ct = map(float, center)

    def fn(x, t):
        return (x - cx) ** a * (t - ct) ** b

    def deriv(al, x, t):
        i, j = al
        if i > a or j > b:
            return np.zeros(np.broadcast(x, t).shape)
        return _falling(a, i) * (x - cx) ** (a - i) * _falling(b, j) * (t - ct) ** (b - j)

    return Field(fn, deriv, f"x^{a}t^{b}")


def _bump_poly(power):
    return Polynomial([1.0, 0.0, -1.0]) ** power


def bump_1d(u, power=5, n=0):
    """n-th derivative of (1 - u^2)^power, zero outside (-1, 1)."""
    P = _bump_poly(power)
    if n:
        P = P.deriv(n)
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1, P(u), 0.0)


def bump(center=(0.0, 0.0), radius=1.0, power=5):
    """Tensor bump (1 - u^2)^k (1 - v^2)^k with u, v the scaled offsets."""
    cx, ct = map(float, center)
    R = float(radius)

    def fn(x, t):
        return bump_1d((x - cx) / R, power) * bump_1d((t - ct) / R, power)

    def deriv(al, x, t):
        i, j = al
        return R ** (-i - j) * bump_1d((x - cx) / R, power, i) * bump_1d((t - ct) / R, power, j)

    return Field(fn, deriv, f"bump({cx},{ct};{R})")


def power_of_height(s):
    """t^s on the upper half-plane (t > 0)."""
    s = float(s)

    def fn(x, t):
        t = np.broadcast_to(t, np.broadcast(x, t).shape)
        return np.where(t > 0, np.abs(t) ** s, 0.0)

    def deriv(al, x, t):
        i, j = al
        shape = np.broadcast(x, t).shape
        if i:
            return np.zeros(shape)
        c = math.prod(s - k for k in range(j))
        tt = np.broadcast_to(t, shape)
        return np.where(tt > 0, c * np.abs(tt) ** (s - j), 0.0)

    return Field(fn, deriv, f"t^{s}")


def radial_power(s, center=(0.0, 0.0)):
    """|x - c|^s, homogeneous of degree s about c."""
    s = float(s)
    cx, ct = map(float, center)

    def fn(x, t):
        return np.hypot(x - cx, t - ct) ** s

    def deriv(al, x, t):
        X, T = x - cx, t - ct
        r2 = X * X + T * T
        if al == (1, 0):
            return s * r2 ** (s / 2 - 1) * X
        if al == (0, 1):
            return s * r2 ** (s / 2 - 1) * T
        if sum(al) == 2:
            xi = {(2, 0): (X, X, 1.0), (1, 1): (X, T, 0.0), (0, 2): (T, T, 1.0)}[al]
            return s * r2 ** (s / 2 - 1) * xi[2] + s * (s - 2) * r2 ** (s / 2 - 2) * xi[0] * xi[1]
        return None

    return Field(fn, deriv, f"|x|^{s}")


def harmonic_log(center=(0.0, -1.0)):
    """log|x - c|, harmonic away from c (place c below the boundary)."""
    cx, ct = map(float, center)

    def fn(x, t):
        return 0.5 * np.log((x - cx) ** 2 + (t - ct) ** 2)

    def deriv(al, x, t):
        n = sum(al)
        z = (x - cx) + 1j * (t - ct)
        val = (1j) ** al[1] * (-1) ** (n - 1) * math.factorial(n - 1) * z ** (-n)
        return np.real(val)

    return Field(fn, deriv, f"log|x-{center}|")


def harmonic_gradient(center=(0.0, -1.0)):
    return gradient_array(harmonic_log(center), 1)


def tent_indicator(domain, Q, kind="T"):
    region = TentRegion(kind, Q, domain)

    def fn(x, t):
        return region.contains(np.stack(np.broadcast_arrays(x, t), axis=-1)).astype(float)

    return Field(fn, lambda a, x, t: np.zeros(np.broadcast(x, t).shape), f"1_{kind}({Q})")


class BoundaryFunction:
    """Function of the graph coordinate x' on the boundary."""

    def __init__(self, f, df=None, name="f", support=None, breaks=()):
        self.f = f
        self.df = df
        self.name = name
        self.support = support
        self.breaks = tuple(breaks)  # kinks and jumps, for quadrature panel edges

    def __repr__(self):
        return f"BoundaryFunction({self.name})"

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    def deriv(self, x, h=1e-6):
        x = np.asarray(x, dtype=float)
        if self.df is not None:
            return self.df(x)
        return (self(x + h) - self(x - h)) / (2 * h)

    def __add__(self, other):
        a, b = self, other
        df = None
        if a.df is not None and b.df is not None:
            df = lambda x: a.df(x) + b.df(x)  # noqa: E731
        sup = None
        if a.support is not None and b.support is not None:
            sup = (min(a.support[0], b.support[0]), max(a.support[1], b.support[1]))
        return BoundaryFunction(lambda x: a(x) + b(x), df, f"{a.name}+{b.name}", sup,
                                a.breaks + b.breaks)

    def __mul__(self, c):
        c = float(c)
        a = self
        df = None if a.df is None else (lambda x: c * a.df(x))
        return BoundaryFunction(lambda x: c * a(x), df, f"{c}*{a.name}", a.support, a.breaks)

    __rmul__ = __mul__


def weierstrass_hoelder(theta, terms):
    """sum_{k=0}^{terms} 2^{-k theta} cos(2^k x)."""
    ks = np.arange(int(terms) + 1)
    amp = 2.0 ** (-ks * theta)
    freq = 2.0 ** ks

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.sum(amp * np.cos(np.multiply.outer(x, freq)), axis=-1)

    def df(x):
        x = np.asarray(x, dtype=float)
        return -np.sum(amp * freq * np.sin(np.multiply.outer(x, freq)), axis=-1)

    return BoundaryFunction(f, df, f"weierstrass({theta},{terms})")


class WhitneyArray:
    """Boundary functions f_gamma for every |gamma| = m - 1."""

    def __init__(self, m, comps, d=2):
        self.m = m
        self.comps = {tuple(g): c for g, c in comps.items()}
        if set(self.comps) != set(multiindices(m - 1, d)):
            raise ValueError("Whitney array must have one component per |gamma| = m-1")

    def __getitem__(self, gamma):
        return self.comps[tuple(gamma)]


class BoundaryJet:
    """Boundary data phi_zeta for all |zeta| <= m - 1 (the Taylor jet)."""

    def __init__(self, m, comps, d=2):
        self.m = m
        self.d = d
        self.comps = {tuple(z): c for z, c in comps.items()}

    def values(self, yprime):
        return {z: np.asarray(c(yprime), dtype=float) for z, c in self.comps.items()}

    @property
    def breaks(self):
        return tuple(sorted({b for c in self.comps.values() for b in getattr(c, "breaks", ())}))

    def whitney_array(self):
        return WhitneyArray(self.m, {g: self.comps[g] for g in multiindices(self.m - 1, self.d)})


def trace_jet(u, domain, m):
    """The jet {d^zeta u restricted to the boundary}_{|zeta| <= m-1} of a field."""
    comps = {}
    for z in multiindices_upto(m - 1):
        comps[z] = BoundaryFunction(lambda y, z=z: u.deriv(z, y, domain.psi(y)),
                                    name=f"Tr d{z}{u.name}")
    return BoundaryJet(m, comps)


def scalar_jet(f):
    """Order-one jet made of a single boundary function."""
    return BoundaryJet(1, {(0, 0): f})


def taylor_polynomial(jet_values, x, y, gamma, m):
    """P_gamma(x, y) = sum_{zeta >= gamma, |zeta| <= m-1} phi_zeta(y) (x-y)^(zeta-gamma)/(zeta-gamma)!.

    ``jet_values`` maps multiindices to arrays of phi_zeta(y) broadcastable
    against ``y[..., 0]``.
    """
    gamma = tuple(gamma)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    need = [z for z in multiindices_upto(m - 1, len(gamma)) if leq(gamma, z)]
    missing = [z for z in need if z not in jet_values]
    if missing:
        raise ValueError(f"incomplete jet: missing {missing}")
    out = 0.0
    for z in need:
        e = tuple(a - b for a, b in zip(z, gamma))
        term = jet_values[z] / mfact(e)
        for k, ek in enumerate(e):
            if ek:
                term = term * diff[..., k] ** ek
        out = out + term
    return out if need else np.zeros(np.broadcast(x[..., 0], y[..., 0]).shape)


@dataclass
class PolynomialRM:
    """Polynomial sum_beta c_beta (x - x0)^beta / beta! of degree <= m - 1."""

    coeffs: dict
    center: tuple = (0.0, 0.0)

    def as_field(self):
        terms = [c * (1.0 / mfact(b)) * monomial(b, self.center) for b, c in self.coeffs.items()]
        out = constant(0.0)
        for t in terms:
            out = out + t
        return out


# --------------------------------------------------------------------------
# atoms


class AtomValidationError(ValueError):
    pass


def hat_profile(height=1.0, slope=None):
    """max(0, height - slope*|u|), slope defaulting to the height."""
    height = float(height)
    slope = height if slope is None else float(slope)
    return BoundaryFunction(lambda u: np.maximum(0.0, height - slope * np.abs(u)),
                            lambda u: np.where(np.abs(u) < height / slope, -slope * np.sign(u), 0.0),
                            f"hat({height})", (-1.0, 1.0), (-height / slope, 0.0, height / slope))


def square_wave_profile():
    """-1 on (-1, 0), +1 on (0, 1)."""
    return BoundaryFunction(lambda u: np.where(np.abs(u) < 1, np.sign(u), 0.0),
                            lambda u: np.zeros_like(u), "square", (-1.0, 1.0), (-1.0, 0.0, 1.0))


def odd_bump_profile():
    """Mean-zero smooth profile u (1 - u^2)^3 rescaled to sup 1."""
    c = 1.0 / (1 / math.sqrt(7) * (6 / 7) ** 3)
    return BoundaryFunction(lambda u: c * np.where(np.abs(u) < 1, u * (1 - u * u) ** 3, 0.0),
                            lambda u: c * np.where(np.abs(u) < 1, (1 - u * u) ** 2 * (1 - 7 * u * u), 0.0),
                            "oddbump", (-1.0, 1.0))


def cosine_wave_profile(k=1):
    """sin(k pi u) on (-1, 1): mean zero for integer k."""
    return BoundaryFunction(lambda u: np.where(np.abs(u) < 1, np.sin(k * np.pi * u), 0.0),
                            lambda u: np.where(np.abs(u) < 1, k * np.pi * np.cos(k * np.pi * u), 0.0),
                            f"sine({k})", (-1.0, 1.0))


def smooth_bump_profile():
    """(1 - u^2)^3, a positive profile with sup 1 and slope below 1.8."""
    return BoundaryFunction(lambda u: np.where(np.abs(u) < 1, (1 - u * u) ** 3, 0.0),
                            lambda u: np.where(np.abs(u) < 1, -6 * u * (1 - u * u) ** 2, 0.0),
                            "bump3", (-1.0, 1.0))


@dataclass
class Atom:
    """Besov atom a(x') = scale * profile((x' - x0)/rho) - correction.

    ``rho`` is the radius in the graph coordinate, ``r / sqrt(1 + M^2)``,
    which keeps the support inside the Euclidean ball of radius r.
    """

    kind: str
    x0: float
    r: float
    profile: BoundaryFunction
    params: NormParams
    domain: object = None
    scale: float = 1.0
    rho: float = 1.0
    correction: float = 0.0
    extra: dict = field(default_factory=dict)

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.x0) / self.rho
        out = self.scale * self.profile(u)
        if self.correction:
            out = out - self.correction * bump_1d(u, 4)
        return out

    def deriv(self, x):
        u = (np.asarray(x, dtype=float) - self.x0) / self.rho
        out = self.scale * self.profile.deriv(u) / self.rho
        if self.correction:
            out = out - self.correction * bump_1d(u, 4, 1) / self.rho
        return out

    @property
    def support(self):
        return self.x0 - self.rho, self.x0 + self.rho

    def as_boundary_function(self):
        return BoundaryFunction(self, self.deriv, f"{self.kind}-atom({self.x0},{self.r})",
                                self.support, self.breaks)

    @property
    def breaks(self):
        return tuple(self.x0 + c * self.rho for c in self.profile.breaks)

    def bounds(self):
        p, th, d = self.params.p, self.params.theta, self.params.d
        e = th - (d - 1) / p
        if self.kind == "positive":
            return {"sup": self.r ** e, "grad": self.r ** (e - 1)}
        return {"sup": self.r ** (e - 1)}


def _arclength(domain, x):
    if domain is None:
        return np.ones_like(x)
    return domain.arclength_density(x)


def validate_atom(atom, n=4097, rtol=1e-9):
    """Check support, size, gradient and mean conditions; raise on failure."""
    a, b = atom.support
    xs = np.linspace(a - 0.05 * (b - a), b + 0.05 * (b - a), n)
    vals = atom(xs)
    failed = []
    outside = (xs < a) | (xs > b)
    if np.any(np.abs(vals[outside]) > 0):
        failed.append("supp a within B(x0, r)")
    bnd = atom.bounds()
    sup = float(np.max(np.abs(vals)))
    if sup > bnd["sup"] * (1 + rtol):
        failed.append(f"||a||_inf = {sup:.6g} <= r^(theta-(d-1)/p{'' if atom.kind == 'positive' else '-1'}) = {bnd['sup']:.6g}")
    w = _arclength(atom.domain, xs)
    if atom.kind == "positive":
        g = float(np.max(np.abs(atom.deriv(xs)) / w))
        if g > bnd["grad"] * (1 + rtol):
            failed.append(f"||grad a||_inf = {g:.6g} <= r^(theta-1-(d-1)/p) = {bnd['grad']:.6g}")
    else:
        mean = atom_integral(atom)
        scale = bnd["sup"] * atom.r ** (atom.params.d - 1)
        if abs(mean) > 1e-8 * scale:
            failed.append(f"integral of a = {mean:.3g} vanishes")
    if failed:
        raise AtomValidationError("atom validation failed: " + "; ".join(failed))
    return True


def atom_integral(atom, f=None, panels=256, order=8):
    """int a f dsigma over the atom support (f defaults to 1)."""
    from .geometry import composite_gl

    a, b = atom.support
    breaks = [atom.x0]
    if atom.domain is not None:
        breaks += atom.domain.breakpoints(a, b)
    breaks += list(atom.breaks)
    xs, ws = composite_gl(a, b, panels, order, breaks)
    vals = atom(xs) * _arclength(atom.domain, xs)
    if f is not None:
        vals = vals * f(xs)
    return float(np.sum(vals * ws))


def make_atom(kind, x0, r, profile, params, domain=None):
    """Scale a profile on the unit interval into a positive or negative atom.

    The amplitude is r^(theta-(d-1)/p) for positive atoms and
    r^(theta-1-(d-1)/p) for negative ones, so the atom bounds hold exactly
    when the profile has sup 1 (and slope at most 1 for positive atoms).
    Negative atoms have any residual mean removed with a bump before the
    final check.
    """
    if kind not in ("positive", "negative"):
        raise ValueError("kind must be 'positive' or 'negative'")
    if r <= 0:
        raise ValueError("radius must be positive")
    p, th, d = params.p, params.theta, params.d
    rho = r / math.sqrt(1.0 + (domain.M ** 2 if domain is not None else 0.0))
    e = th - (d - 1) / p - (0 if kind == "positive" else 1)
    atom = Atom(kind, float(x0), float(r), profile, params, domain, r ** e, rho)
    if kind == "negative":
        mean = atom_integral(atom)
        if mean != 0.0:
            unit = Atom(kind, atom.x0, atom.r, BoundaryFunction(lambda u: bump_1d(u, 4)),
                        params, domain, 1.0, rho)
            atom.correction = mean / atom_integral(unit)
    validate_atom(atom)
    return atom


@dataclass
class AtomicDecomposition:
    terms: list
    c0: float = 0.0

    def as_boundary_function(self):
        def f(x):
            out = np.full(np.shape(x), self.c0, dtype=float)
            for lam, a in self.terms:
                out = out + lam * a(x)
            return out

        return BoundaryFunction(f, name="atom_sum")


def atom_sum(terms, c0=0.0):
    return AtomicDecomposition(list(terms), c0).as_boundary_function()


# --------------------------------------------------------------------------
# mollification

_MOLL_Z, _MOLL_W = gauss_legendre(12)
_ETA1 = (1 - _MOLL_Z ** 2) ** 4 * (315.0 / 256.0)


def mollify(v, eps, domain):
    """v * eta_eps with a tensor quartic mollifier, continued vertically near the boundary.

    On {t - psi(x') > 2 eps sqrt(1 + M^2)} (which lies inside dist > 2 eps)
    this is the plain convolution; below it the value at the lowest point of
    that set on the same vertical is used.
    """
    eps = float(eps)
    lift = 2 * eps * math.sqrt(1 + domain.M ** 2)
    Z1, Z2 = np.meshgrid(_MOLL_Z, _MOLL_Z, indexing="ij")
    W = np.outer(_MOLL_W * _ETA1, _MOLL_W * _ETA1).ravel()
    Z1, Z2 = Z1.ravel(), Z2.ravel()

    def fn(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        floor = domain.psi(x) + lift
        tt = np.maximum(t, floor)
        vals = v(x[..., None] - eps * Z1, tt[..., None] - eps * Z2)
        return np.sum(vals * W, axis=-1)

    return Field(fn, name=f"mollify({getattr(v, 'name', 'v')},{eps})", fd_step=eps * 1e-2)


# --------------------------------------------------------------------------
# zoo dispatch

ZOO = {
    "constant": lambda value=1.0: constant(value),
    "monomial": lambda a=0, b=0: monomial((int(a), int(b))),
    "bump": lambda cx=0.0, ct=0.0, radius=1.0, power=5: bump((cx, ct), radius, int(power)),
    "power_of_height": lambda s=0.5: power_of_height(s),
    "radial_power": lambda s=0.5, cx=0.0, ct=0.0: radial_power(s, (cx, ct)),
    "weierstrass_hoelder": lambda theta=0.5, terms=12: weierstrass_hoelder(theta, int(terms)),
    "harmonic_gradient": lambda cx=0.0, ct=-1.0: harmonic_gradient((cx, ct)),
    "harmonic_log": lambda cx=0.0, ct=-1.0: harmonic_log((cx, ct)),
}


def zoo_field(name, **params):
    """Build a named test function (see ``ZOO``); ``atom_sum`` and
    ``tent_indicator`` need objects and are called directly."""
    if name == "atom_sum":
        return atom_sum(params["terms"], params.get("c0", 0.0))
    if name == "tent_indicator":
        return tent_indicator(params["domain"], params["Q"], params.get("kind", "T"))
    if name not in ZOO:
        raise ValueError(f"unknown zoo field {name!r}")
    return ZOO[name](**params)


def parse_zoo(spec):
    """Parse ``name:key=value,key=value`` into a zoo field."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        params[k.strip()] = float(v)
    return zoo_field(name.strip(), **params)
