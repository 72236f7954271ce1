"""Negative atom -> divergence-free field -> wavelet moments -> boundary representative."""

import math

import numpy as np

from besovtrace.funcspace import Field, NormParams, bump, make_atom, odd_bump_profile
from besovtrace.geometry import half_plane
from besovtrace.neumann import (besov_norm_from_wavelets, boundary_pairing, extend_neumann_atom,
                                neumann_moments, neumann_pairing, neumann_representative,
                                representative_pairing)
from besovtrace.wavelets import build_wavelets

domain = half_plane((-16, 16))
atom = make_atom("negative", 0.2, 1.0, odd_bump_profile(), NormParams(1.0, 0.5), domain)
G = extend_neumann_atom(atom, domain)

phi = bump((0.1, 0.0), 1.5, 3)
print("<grad phi, G>      ", neumann_pairing(phi, G))
print("<a, phi>           ", boundary_pairing(atom, phi, (0, 0), domain))

i0 = -int(math.ceil(math.log2(atom.r))) - 1
mo = neumann_moments(G, build_wavelets(3), i0=i0, levels=6)
rep = neumann_representative(mo, 1, mo.window)
print("<phi, g0>          ", representative_pairing(rep, phi, domain, window=mo.window))
print("wavelet coefficients", len(mo.detail), " periodization error", f"{rep.window_error:.1e}")
print("Besov norm (p=1)    ", besov_norm_from_wavelets(mo, 1.0, -0.5))

x = np.linspace(-1.5, 1.5, 7)
print("g0 vs atom on a few points:")
for xi, g, a in zip(x, rep.array.comps[(0, 0)](x), atom(x)):
    print(f"  {xi:5.2f} {g:8.4f} {a:8.4f}")
