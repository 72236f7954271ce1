"""Extend a boundary atom into a sawtooth domain and take the trace back."""

import numpy as np

from besovtrace.dirichlet_ext import DirichletExtension, build_boundary_kernel, vertical_holder_slope
from besovtrace.dirichlet_trace import trace_whitney_array
from besovtrace.funcspace import NormParams, hat_profile, make_atom, scalar_jet
from besovtrace.geometry import sawtooth_graph
from besovtrace.harness import cusp_data

domain = sawtooth_graph(0.5, 1.0, (-8, 8))
atom = make_atom("positive", 0.1, 1.0, hat_profile(), NormParams(1.0, 0.5), domain)
ext = DirichletExtension(scalar_jet(atom.as_boundary_function()), build_boundary_kernel(domain),
                         max_nodes=256)

grid = np.linspace(-0.8, 1.0, 10)
tr = trace_whitney_array(ext, domain, grid, 1, levels=8)
print("   x    atom   trace of extension")
for x, a, t in zip(grid, atom(grid), tr.values[(0, 0)]):
    print(f"{x:5.2f} {a:7.4f} {t:9.4f}")

for theta in (0.3, 0.6):
    data = cusp_data(0.3, theta)
    e = DirichletExtension(scalar_jet(data), build_boundary_kernel(domain))
    slope, _, _ = vertical_holder_slope(e, data, 0.3, np.logspace(-3, -1, 7))
    print(f"Hoelder-{theta} cusp: vertical approach slope {slope:.3f}")
