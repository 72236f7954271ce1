"""Command line front end: ``besovtrace <verb> ...``."""

import argparse
import json
import math
import sys

import numpy as np

from . import harness
from .dirichlet_ext import DirichletExtension, build_boundary_kernel
from .dirichlet_trace import trace_besov_experiment, trace_whitney_array
from .funcspace import NormParams, bump, scalar_jet
from .geometry import domain_from_spec
from .neumann import (besov_norm_from_wavelets, extend_neumann_atom, neumann_moments,
                      neumann_pairing, boundary_pairing, weak_divergence_residual)
from .norms import lav_norm, tent_functional
from .wavelets import build_wavelets


def _num(s):
    return math.inf if s in ("inf", "Inf", "infinity") else float(s)


def _params(args):
    return NormParams(args.p, args.theta, args.q, args.m)


def _domain(args):
    spec = args.domain
    if spec in ("zero", "abs", "sawtooth"):
        spec = {"psi": spec, "window": [-args.window, args.window]}
        if args.slope is not None:
            spec["M"] = args.slope
    return domain_from_spec(spec)


def _emit(obj, args):
    text = json.dumps(harness._jsonable(obj), indent=2, sort_keys=True)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_norm(args):
    D, P = _domain(args), _params(args)
    f = harness.parse_field(args.field)
    region = tuple(args.region)
    if args.mode == "tent":
        r = tent_functional(f, D, P, args.depth, region)
    else:
        r = lav_norm(f, D, P, args.mode, args.depth, region)
    _emit(r.as_dict(), args)
    return 0


def cmd_extend(args):
    D = _domain(args)
    P = NormParams(args.p, args.theta)
    atom = harness.parse_atom(args.data, P, D)
    ext = DirichletExtension(scalar_jet(atom.as_boundary_function()), build_boundary_kernel(D, 1),
                             max_nodes=args.max_nodes)
    pts = np.array(args.at, dtype=float).reshape(-1, 2)
    vals = ext(pts[:, 0], pts[:, 1])
    _emit({"points": pts, "values": vals, "boundary": atom(pts[:, 0])}, args)
    return 0


def cmd_trace(args):
    D, P = _domain(args), _params(args)
    a, b = args.interval
    if args.action == "extract":
        u = harness.parse_field(args.field)
        out = trace_besov_experiment(u, D, P, (a, b), args.grid, args.levels, tuple(args.region),
                                     args.depth)
        _emit(out, args)
        return 0
    atom = harness.parse_atom(args.field, NormParams(1.0, args.theta), D)
    ext = DirichletExtension(scalar_jet(atom.as_boundary_function()), build_boundary_kernel(D, 1),
                             max_nodes=args.max_nodes)
    grid = np.linspace(a, b, args.grid)
    tr = trace_whitney_array(ext, D, grid, 1, args.levels)
    f = atom(grid)
    err = float(np.max(np.abs(tr.values[(0, 0)] - f)) / np.max(np.abs(f)))
    _emit({"sup_error": err, "flagged": not tr.ok}, args)
    return 0


def cmd_neumann(args):
    D = _domain(args)
    P = NormParams(args.p, args.theta)
    atom = harness.parse_atom(args.atom, P, D)
    G = extend_neumann_atom(atom, D)
    if args.action == "extend":
        F = harness.parse_field(args.test_field)
        lo, hi, top = G.support_box
        x0, r = atom.x0, atom.r
        base = float(D.psi(np.array(x0)))
        # a small bump well inside the support tests the weak divergence
        phi = bump((x0, base + 0.6 * r), 0.2 * r)
        box = (x0 - 0.2 * r, x0 + 0.2 * r, base + 0.4 * r, base + 0.8 * r)
        _emit({"pairing": neumann_pairing(F, G), "boundary_pairing": boundary_pairing(atom, F, (0, 0), D),
               "weak_divergence": weak_divergence_residual(G, phi, box, D, normalized=True),
               "support_box": [lo, hi, top]}, args)
        return 0
    ws = build_wavelets(args.wavelet_order)
    i0 = -int(math.ceil(math.log2(atom.r))) - 1
    mo = neumann_moments(G, ws, i0=i0, levels=args.levels)
    if args.csv:
        mo.to_csv(args.csv)
    _emit({"coefficients": len(mo.detail), "window": mo.window,
           "besov_norm": besov_norm_from_wavelets(mo, args.p, args.theta - 1)}, args)
    return 0


def cmd_experiment(args):
    if args.config:
        cfg = harness.ExperimentConfig.from_json(args.config, experiment=args.name, seed=args.seed,
                                                 workers=args.workers)
    else:
        if not args.name:
            raise SystemExit("experiment name or --config required")
        over = {k: v for k, v in (("seed", args.seed), ("workers", args.workers)) if v is not None}
        cfg = harness.preset(args.name, **over)
    outs = dict(cfg.outputs or {})
    for k in ("json", "csv", "dat"):
        if getattr(args, k):
            outs[k] = getattr(args, k)
    cfg.outputs = outs
    rep = harness.run_experiment(cfg)
    for c in rep.cases:
        tag = "PASS" if c["passed"] else "FAIL"
        vals = ", ".join(f"{k}={v:.4g}" for k, v in c["values"].items() if isinstance(v, float))
        print(f"{tag} {c['name']}: {vals} {c.get('error', '')}".rstrip())
    print(f"{rep.experiment}: {'PASS' if rep.passed else 'FAIL'} ({rep.wall_time:.1f} s)")
    return 0 if rep.passed else 1


def cmd_oracle(args):
    inputs = json.loads(args.inputs) if args.inputs else {}
    # functions arrive as polynomial coefficient lists (lowest degree first)
    for key in ("f", "g"):
        v = inputs.get(key)
        if v == "square":
            inputs[key] = lambda x: np.where(np.sin(x) >= 0, 1.0, -1.0)
        elif isinstance(v, list):
            inputs[key] = np.polynomial.Polynomial(v)
    out = harness.oracle(args.name, inputs)
    _emit({k: v for k, v in out.items() if k != "partial_sum"}, args)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="besovtrace", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(sp, m=True):
        sp.add_argument("--domain", default="zero", help="zero, abs, sawtooth or a JSON domain spec")
        sp.add_argument("--slope", type=float, default=None, help="Lipschitz slope for abs/sawtooth")
        sp.add_argument("--window", type=float, default=8.0, help="half width of the graph window")
        sp.add_argument("--p", type=_num, default=1.0)
        sp.add_argument("--theta", type=float, default=0.5)
        if m:
            sp.add_argument("--q", type=_num, default=1.0)
            sp.add_argument("--m", type=int, default=1)
        sp.add_argument("--out", help="also write the JSON result here")

    sp = sub.add_parser("norm", help="weighted averaged norm of a zoo field")
    common(sp)
    sp.add_argument("field")
    sp.add_argument("--mode", default="direct", choices=["direct", "whitney", "dyadicW", "tent"])
    sp.add_argument("--depth", type=int, default=7)
    sp.add_argument("--region", type=float, nargs=3, default=(-2.0, 2.0, 2.0))
    sp.set_defaults(fn=cmd_norm)

    sp = sub.add_parser("extend", help="evaluate the Dirichlet extension of an atom")
    common(sp, m=False)
    sp.add_argument("data", help="atom spec, e.g. atom:kind=positive,profile=hat,x0=0,r=1")
    sp.add_argument("--at", type=float, nargs="+", required=True, help="x t pairs")
    sp.add_argument("--max-nodes", type=int, default=256)
    sp.set_defaults(fn=cmd_extend)

    sp = sub.add_parser("trace", help="numerical trace of a field or extension round trip")
    common(sp)
    sp.add_argument("action", choices=["extract", "roundtrip"])
    sp.add_argument("field", help="zoo field (extract) or atom spec (roundtrip)")
    sp.add_argument("--interval", type=float, nargs=2, default=(-1.5, 1.5))
    sp.add_argument("--grid", type=int, default=256)
    sp.add_argument("--levels", type=int, default=10)
    sp.add_argument("--depth", type=int, default=7)
    sp.add_argument("--region", type=float, nargs=3, default=(-2.0, 2.0, 2.0))
    sp.add_argument("--max-nodes", type=int, default=256)
    sp.set_defaults(fn=cmd_trace)

    sp = sub.add_parser("neumann", help="Neumann extension of a negative atom and its moments")
    common(sp, m=False)
    sp.add_argument("action", choices=["trace", "extend"])
    sp.add_argument("atom", help="atom spec, e.g. atom:profile=square,x0=0,r=1")
    sp.add_argument("--test-field", default="bump:cx=0.2,ct=0.3,radius=1.2")
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--wavelet-order", type=int, default=3)
    sp.add_argument("--csv", help="write the moment coefficients here")
    sp.set_defaults(fn=cmd_neumann)

    sp = sub.add_parser("experiment", help="run a harness experiment; exit 0 iff every case passes")
    sp.add_argument("name", nargs="?", choices=harness.EXPERIMENTS)
    sp.add_argument("--config", help="JSON config file or string; flags override it")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--json")
    sp.add_argument("--csv")
    sp.add_argument("--dat")
    sp.set_defaults(fn=cmd_experiment)

    sp = sub.add_parser("oracle", help="brute-force reference computation")
    sp.add_argument("name", choices=sorted(harness.ORACLES))
    sp.add_argument("--inputs", help="JSON object of oracle inputs")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
