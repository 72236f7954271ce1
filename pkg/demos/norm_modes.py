"""Compare the four discretizations of the weighted averaged norm on a few fields."""

from besovtrace.funcspace import NormParams
from besovtrace.geometry import sawtooth_graph
from besovtrace.harness import parse_field
from besovtrace.norms import lav_norm, tent_functional

domain = sawtooth_graph(0.5, 1.0, (-8, 8))
params = NormParams(1.0, 0.5)
region = (-2.0, 2.0, 2.0)
fields = ["bump:cx=0,ct=0.5,radius=0.4", "power_of_height:s=0.7*bump:radius=1",
          "radial_power:s=0.5,cx=0.3*bump:radius=1"]

print(f"{'field':45s} {'direct':>9s} {'whitney':>9s} {'dyadicW':>9s} {'tent':>9s}")
for spec in fields:
    f = parse_field(spec)
    vals = [lav_norm(f, domain, params, mode, 6, region, estimate_error=False).value
            for mode in ("direct", "whitney", "dyadicW")]
    vals.append(tent_functional(f, domain, params, 6, region, estimate_error=False).value)
    print(f"{spec:45s} " + " ".join(f"{v:9.4f}" for v in vals))
