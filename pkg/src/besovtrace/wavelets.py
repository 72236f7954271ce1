"""Compactly supported orthonormal Daubechies wavelets by the cascade algorithm."""

import math
import numpy as np


def daubechies_filter(N):
    """Lowpass filter h_0..h_{2N-1} (sum sqrt 2) with N vanishing moments.

    Spectral factorization: |L|^2 = P(sin^2(w/2)) with
    P(y) = sum_{k<N} C(N-1+k, k) y^k; each root y of P gives a root z of
    z + 1/z = 2 - 4y, and the roots inside the unit circle form L.
    """
    if N not in (2, 3, 4):
        raise ValueError("N must be 2, 3 or 4")
    P = [math.comb(N - 1 + k, k) for k in range(N)]
    ys = np.roots(P[::-1]) if N > 1 else np.array([])
    zs = []
    for y in ys:
        b = 2 - 4 * y
        pair = np.roots([1.0, -b, 1.0])
        zs.append(pair[np.argmin(np.abs(pair))])
    h = np.array([1.0])
    for _ in range(N):
        h = np.convolve(h, [0.5, 0.5])
    for z in zs:
        h = np.convolve(h, [1.0, -z])
    h = np.real(h)
    return h * (math.sqrt(2) / h.sum())


def highpass(h):
    """g_l = (-1)^l h_{L-1-l}."""
    L = len(h)
    return np.array([(-1) ** l * h[L - 1 - l] for l in range(L)])


def _integer_values(h, s=0):
    """φ^(s) at the integers 0..L-1 from the refinement eigenproblem."""
    L = len(h)
    n = L
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * i - j
            if 0 <= k < L:
                A[i, j] = math.sqrt(2) * h[k] * 2 ** s
    w, V = np.linalg.eig(A)
    idx = np.argmin(np.abs(w - 1.0))
    if abs(w[idx] - 1.0) > 1e-8:
        raise ValueError("refinement matrix lacks the expected eigenvalue")
    v = np.real(V[:, idx])
    ks = np.arange(n)
    norm = (-1) ** s * np.sum(ks ** s * v) if s else np.sum(v)
    return v * (math.factorial(s) / norm)


def _cascade(h, J, s=0):
    """φ^(s) on the grid k 2^-J, k = 0..(L-1) 2^J."""
    L = len(h)
    table = _integer_values(h, s)
    for lev in range(1, J + 1):
        n_prev = len(table)
        step = 2 ** lev
        new = np.zeros((L - 1) * step + 1)
        new[::2] = table
        odd = np.arange(1, len(new), 2)
        acc = np.zeros(len(odd))
        for k in range(L):
            pos = odd - k * 2 ** (lev - 1)
            ok = (pos >= 0) & (pos < n_prev)
            acc[ok] += h[k] * table[pos[ok]]
        new[1::2] = math.sqrt(2) * 2 ** s * acc
        table = new
    return table


MAX_DERIVATIVE = {2: 0, 3: 1, 4: 1}


class WaveletSystem:
    """Daubechies scaling function φ and wavelet ψ tabulated on a dyadic grid.

    ``phi(x)``, ``psi(x)`` and their first derivatives (N >= 3) interpolate
    linearly between grid points k 2^-J; values at grid points are exact
    cascade values.
    """

    def __init__(self, N=3, cascade_depth=14):
        if N not in (2, 3, 4):
            raise ValueError("N must be 2, 3 or 4")
        self.N = N
        self.J = int(cascade_depth)
        self.h = daubechies_filter(N)
        self.g = highpass(self.h)
        self.L = len(self.h)
        self.support = (0.0, float(self.L - 1))
        self.max_derivative = MAX_DERIVATIVE[N]
        self._phi, self._psi = {}, {}
        for s in range(self.max_derivative + 1):
            self._phi[s] = _cascade(self.h, self.J, s)
            self._psi[s] = self._wavelet_table(s)

    def _wavelet_table(self, s):
        """ψ^(s)(x) = 2^s √2 Σ_l g_l φ^(s)(2x - l) on the grid k 2^-J."""
        phi = self._phi[s]
        k = np.arange(len(phi))
        out = np.zeros(len(phi))
        for l, gl in enumerate(self.g):
            idx = 2 * k - l * 2 ** self.J
            ok = (idx >= 0) & (idx < len(phi))
            out[ok] += gl * phi[idx[ok]]
        return math.sqrt(2) * 2 ** s * out

    def _interp(self, table, x):
        x = np.asarray(x, dtype=float)
        u = x * 2 ** self.J
        i = np.floor(u).astype(np.int64)
        frac = u - i
        n = len(table)
        inside = (i >= 0) & (i < n - 1)
        ic = np.clip(i, 0, n - 2)
        val = table[ic] * (1 - frac) + table[ic + 1] * frac
        exact_end = (i == n - 1) & (frac == 0)
        return np.where(inside, val, np.where(exact_end, table[-1], 0.0))

    def _table(self, which, s):
        if s > self.max_derivative:
            raise ValueError(f"D{2 * self.N} has no derivative of order {s}")
        return (self._phi if which == "phi" else self._psi)[s]

    def phi(self, x, s=0):
        return self._interp(self._table("phi", s), x)

    def psi(self, x, s=0):
        return self._interp(self._table("psi", s), x)

    def scaled(self, which, i, k, x, s=0):
        """2^(i/2) f(2^i x - k) (or its s-th derivative), f = φ or ψ; side ℓ = 2^-i."""
        f = self.phi if which == "phi" else self.psi
        return 2.0 ** (i / 2 + i * s) * f(2.0 ** i * np.asarray(x, dtype=float) - k, s)

    def sample_grid(self, which, i, k, x0, level, n, s=0):
        """Exact table values of the scaled function at x0 + j 2^-level, j < n.

        Requires level - i <= J and x0 a multiple of 2^-level.
        """
        if level - i > self.J:
            raise ValueError("grid finer than the cascade table")
        table = self._table(which, s)
        step = 2 ** (self.J - (level - i))
        # 2^i x - k in units of 2^-J
        start = round((2.0 ** i * x0 - k) * 2 ** self.J)
        idx = start + step * np.arange(n)
        ok = (idx >= 0) & (idx < len(table))
        out = np.zeros(n)
        out[ok] = table[idx[ok]]
        return 2.0 ** (i / 2 + i * s) * out

    def translates(self, i, a, b):
        """k such that the support of f(2^i x - k) meets (a, b)."""
        lo = math.floor(2.0 ** i * a - (self.L - 1))
        hi = math.ceil(2.0 ** i * b)
        return list(range(lo + 1, hi))

    def grid(self):
        return np.arange(len(self._phi[0])) * 2.0 ** (-self.J)


def build_wavelets(N=3, cascade_depth=14):
    return WaveletSystem(N, cascade_depth)


def gram_matrix(ws, count=40, level=0, which="psi"):
    """Inner products of ``count`` neighbouring translates by dyadic Riemann sums."""
    step = 2.0 ** (-ws.J) * 2.0 ** (-level)
    a = -float(ws.L) * 2.0 ** (-level)
    b = (count + ws.L) * 2.0 ** (-level)
    n = int(round((b - a) / step)) + 1
    x = a + step * np.arange(n)
    rows = np.array([ws.scaled(which, level, k, x) for k in range(count)])
    return rows @ rows.T * step


def cross_level_gram(ws, levels=(0, 1), count=20):
    """Inner products between wavelets on two levels (should vanish)."""
    i0, i1 = levels
    step = 2.0 ** (-ws.J - max(levels))
    a, b = -float(ws.L), float(count + ws.L)
    x = a + step * np.arange(int(round((b - a) / step)) + 1)
    A = np.array([ws.scaled("psi", i0, k, x) for k in range(count)])
    B = np.array([ws.scaled("psi", i1, k, x) for k in range(2 * count)])
    return A @ B.T * step


def moments(ws, kmax=None):
    """∫ x^k ψ(x) dx for k < N by dyadic Riemann sums of the table."""
    kmax = ws.N if kmax is None else kmax
    x = ws.grid()
    psi = ws._psi[0]
    dx = 2.0 ** (-ws.J)
    return np.array([np.sum(x ** k * psi) * dx for k in range(kmax)])


def project(ws, f, i0, levels, window, extra=10):
    """Orthogonal projection onto V_(i0 + levels) written as scaling part plus details.

    Inner products and the reconstruction use a common grid of spacing
    2^-(i0 + levels + extra); returns (grid, projection, coefficients).
    """
    a, b = window
    top = i0 + levels + extra
    if top - i0 > ws.J:
        raise ValueError("cascade too shallow for the requested grid")
    h = 2.0 ** (-top)
    a = math.floor(a / h) * h
    b = math.ceil(b / h) * h
    x = a + h * np.arange(int(round((b - a) / h)) + 1)
    fx = f(x)
    out = np.zeros_like(x)
    coeffs = {}
    for k in ws.translates(i0, a, b):
        v = ws.sample_grid("phi", i0, k, a, top, len(x))
        c = float(np.sum(v * fx) * h)
        coeffs[("phi", i0, k)] = c
        out += c * v
    for i in range(i0, i0 + levels):
        for k in ws.translates(i, a, b):
            v = ws.sample_grid("psi", i, k, a, top, len(x))
            c = float(np.sum(v * fx) * h)
            coeffs[("psi", i, k)] = c
            out += c * v
    return x, out, coeffs
