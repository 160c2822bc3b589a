"""Command-line interface.

Every subcommand writes CSV (header row, floats to 17 significant digits) to
stdout or ``--out`` and exits non-zero if an invariant re-check fails.
Options may also come from a JSON file given with ``--config``; keys are the
option names with dashes replaced by underscores, and command-line flags win.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis, brute_force, mcs, path_integral
from .amplitudes import ScatteringAmplitudes, bk_lower_bound, compute_amplitudes
from .errors import DuotocError
from .gate_core import (Gate, du_gate_q2, is_dual_unitary, make_gate, operator_basis, perturb,
                        random_du_gate_q2, random_hermitian, schmidt_spectrum, unitarity_deviation)

ENGINES = ("brute", "mcs", "closed1", "closed2")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows, columns, out):
    fh = sys.stdout if out in (None, "-") else open(out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])
    finally:
        if fh is not sys.stdout:
            fh.close()


def parse_grid(text):
    """'x0:x1,t0:t1' -> (x0, x1, t0, t1), inclusive ranges."""
    try:
        xs, ts = text.split(",")
        x0, x1 = (int(v) for v in xs.split(":"))
        t0, t1 = (int(v) for v in ts.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like x0:x1,t0:t1, got {text!r}") from exc
    if x1 < x0 or t1 < t0 or t0 < 1:
        raise argparse.ArgumentTypeError("grid ranges must be non-empty with t0 >= 1")
    return x0, x1, t0, t1


def parse_floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def pauli(name, q):
    ops = operator_basis(q)
    if q == 2:
        return ops["XYZ".index(name.upper())]
    return ops[int(name)] if name.isdigit() else ops[-1]


def build_gate(args):
    if getattr(args, "gate", None):
        with open(args.gate) as fh:
            g = Gate.from_json(fh.read())
    elif getattr(args, "J", None) is not None:
        g = du_gate_q2(args.J)
    else:
        g = random_du_gate_q2(args.seed)
    eps = getattr(args, "eps", 0.0) or 0.0
    if eps:
        w_seed = args.w_seed if args.w_seed is not None else args.seed + 1
        g = perturb(g, random_hermitian(g.q * g.q, w_seed), eps)
    return g


def get_amplitudes(args, gate=None):
    if getattr(args, "z", None):
        return ScatteringAmplitudes.from_z(parse_floats(args.z), args.q)
    return compute_amplitudes(gate if gate is not None else build_gate(args), args.k_max)


# -- subcommands ---------------------------------------------------------------

def cmd_gate(args):
    g = build_gate(args)
    if args.save:
        with open(args.save, "w") as fh:
            fh.write(g.to_json())
    sp = schmidt_spectrum(g)
    dev = unitarity_deviation(g.elements)
    z1 = compute_amplitudes(g, 1).z1
    row = dict(q=g.q, unitarity_deviation=dev, dual_unitary=is_dual_unitary(g),
               E_lin=sp.E_lin, z1=z1)
    write_csv([row], ("q", "unitarity_deviation", "dual_unitary", "E_lin", "z1"), args.out)
    problems = []
    if dev > 1e-10:
        problems.append("gate is not unitary")
    if abs(sp.sigma.sum() - g.q**2) > 1e-9:
        problems.append("Schmidt values do not sum to q^2")
    if not -1e-12 <= sp.E_lin <= 1 - 1 / g.q**2 + 1e-12:
        problems.append("operator entanglement out of range")
    return problems


def cmd_amplitudes(args):
    amps = get_amplitudes(args)
    rows = []
    below = set(amps.lower_bound_violations())
    above = set(amps.z_bound_violations())
    for k, (b, z) in enumerate(zip(amps.B, amps.z), start=1):
        rows.append(dict(k=k, B=b, z=z, lower_bound=bk_lower_bound(amps.B[0], amps.q, k),
                         below_lower_bound=k in below, z_bound=(1 - amps.z1) ** (k - 1),
                         above_z_bound=k in above))
    write_csv(rows, ("k", "B", "z", "lower_bound", "below_lower_bound", "z_bound", "above_z_bound"),
              args.out)
    if args.save:
        with open(args.save, "w") as fh:
            fh.write(amps.to_json())
    return amps.bound_violations()


def _points(args):
    if args.grid is not None:
        x0, x1, t0, t1 = args.grid
        pts = []
        for t in range(t0, t1 + 1):
            for x in range(x0, x1 + 1):
                n, m, par = brute_force.coords_from_xt(x, t)
                if par == args.parity and n >= 1 and m >= 1:
                    pts.append((n, m))
        return pts
    if args.n is None or args.m is None:
        raise DuotocError("otoc needs either --n and --m or --grid")
    return [(args.n, args.m)]


def _otoc_value(args, ctx, n, m):
    eng, par = args.engine, args.parity
    if eng == "brute":
        return brute_force.otoc_exact(ctx["gate"], ctx["sa"], ctx["sb"], n, m, par)
    if eng == "mcs":
        return mcs.otoc_mcs_nm(ctx["amps"], ctx["q"], n, m, par, U=ctx.get("gate"), sigma_beta=ctx["sb"])
    if par < 0:
        raise DuotocError("closed forms cover the even-parity sublattice only")
    z = ctx["amps"].z
    if eng == "closed1":
        return path_integral.otoc_1step(z[0], ctx["q"], n, m)
    return path_integral.otoc_2step(z[0], z[1] if z.size > 1 else 0.0, ctx["q"], n, m)


def cmd_otoc(args):
    ctx = {}
    if args.engine in ("brute",) or not args.z:
        ctx["gate"] = build_gate(args)
        ctx["q"] = ctx["gate"].q
    else:
        ctx["q"] = args.q
    if args.engine != "brute":
        ctx["amps"] = get_amplitudes(args, ctx.get("gate"))
    if args.engine == "mcs" and args.parity < 0 and "gate" not in ctx:
        raise DuotocError("odd parity with the mcs engine needs a gate (light-cone channel)")
    ctx["sa"] = pauli(args.sigma_alpha, ctx["q"])
    ctx["sb"] = pauli(args.sigma_beta, ctx["q"])
    pts = _points(args)
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        vals = list(pool.map(lambda p: _otoc_value(args, ctx, *p), pts))
    rows = []
    for (n, m), v in zip(pts, vals):
        x, t = brute_force.xt_from_coords(n, m, args.parity)
        rows.append(dict(x=x, t=t, n=n, m=m, parity=args.parity, value=v, engine=args.engine))
    rows.sort(key=lambda r: (r["t"], r["x"]))
    write_csv(rows, ("x", "t", "n", "m", "parity", "value", "engine"), args.out)
    grid = analysis.OtocGrid(parity=args.parity, x=[r["x"] for r in rows], t=[r["t"] for r in rows],
                             values=[r["value"] for r in rows], provenance=args.engine, q=ctx["q"])
    return grid.violations()


FIT_COLUMNS = ("t", "v_B_hat", "D_hat", "v_B_err", "D_err", "n_points", "window_lo", "window_hi",
               "residual_rms", "converged", "v_B_var", "D_var", "v_B1", "D1", "v_B2", "D2")


def _read_grid(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    par = int(rows[0]["parity"])
    prov = rows[0].get("engine", "mcs")
    return analysis.OtocGrid(parity=par, x=[int(r["x"]) for r in rows], t=[int(r["t"]) for r in rows],
                             values=[float(r["value"]) for r in rows], provenance=prov)


def cmd_fit(args):
    ref = None
    if args.input:
        grid = _read_grid(args.input)
        t = args.t if args.t is not None else int(grid.t.max())
        if args.z:
            z = parse_floats(args.z)
            ref = path_integral.front_params(z[0], z[1] if len(z) > 1 else 0.0, args.q)
    else:
        amps = get_amplitudes(args)
        t = args.t if args.t is not None else 256
        grid = analysis.mcs_slice_grid(amps.z, amps.q, t)
        ref = path_integral.front_params(amps.z[0], max(float(amps.z[1]), 0.0) if amps.k_max > 1 else 0.0,
                                         amps.q)
    fit = analysis.fit_front(grid, t, args.window_c, reference=ref)
    nan = float("nan")
    row = dict(t=t, v_B_hat=fit.v_B_hat, D_hat=fit.D_hat, v_B_err=fit.v_B_err, D_err=fit.D_err,
               n_points=fit.n_points, window_lo=fit.window[0], window_hi=fit.window[1],
               residual_rms=fit.residual_rms, converged=fit.converged,
               v_B_var=fit.v_B_var if fit.v_B_var is not None else nan,
               D_var=fit.D_var if fit.D_var is not None else nan,
               v_B1=ref.v_B1 if ref else nan, D1=ref.D1 if ref else nan,
               v_B2=ref.v_B2 if ref else nan, D2=ref.D2 if ref else nan)
    write_csv([row], FIT_COLUMNS, args.out)
    return [] if fit.converged else ["front fit did not converge"]


def cmd_scan(args):
    base = build_gate(argparse.Namespace(**{**vars(args), "eps": 0.0}))
    w_seed = args.w_seed if args.w_seed is not None else args.seed + 1
    rows = analysis.scan_epsilon(base, w_seed, parse_floats(args.eps_list), t_fit=args.t_fit,
                                 k_max=args.k_max, window_c=args.window_c)
    write_csv(rows, analysis.SCAN_COLUMNS, args.out)
    return [f"eps={r['eps']}: {r['flag']}" for r in rows if r["flag"].startswith("AssertionError")]


def cmd_early_time(args):
    g = build_gate(args)
    rows = analysis.early_time_report(g, args.m_max)
    write_csv(rows, analysis.EARLY_COLUMNS, args.out)
    return [f"t={r['t']}: |C| > 1" for r in rows if abs(r["C"]) > 1 + 1e-9]


# -- parser --------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    p.add_argument("--out", default="-", help="CSV output path (default stdout)")


def _gate_opts(p):
    p.add_argument("--gate", help="gate JSON file; default is a random dual-unitary qubit gate")
    p.add_argument("--J", type=float, help="use the dual-unitary qubit gate with this ZZ coupling")
    p.add_argument("--eps", type=float, default=0.0, help="perturbation strength")
    p.add_argument("--w-seed", type=int, help="seed of the Hermitian perturbation (default seed+1)")


def _amp_opts(p):
    p.add_argument("--k-max", type=int, default=12)
    p.add_argument("--z", help="comma-separated z_1,z_2,... instead of computing from a gate")
    p.add_argument("--q", type=int, default=2, help="local dimension when --z is given")


def build_parser():
    parser = argparse.ArgumentParser(prog="duotoc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("gate", help="build, validate and serialise a gate")
    _common(p), _gate_opts(p)
    p.add_argument("--save", help="write the gate as JSON")
    p.set_defaults(func=cmd_gate)
    subs["gate"] = p

    p = sub.add_parser("amplitudes", help="scattering amplitudes B_k, z_k")
    _common(p), _gate_opts(p), _amp_opts(p)
    p.add_argument("--save", help="write amplitudes as JSON")
    p.set_defaults(func=cmd_amplitudes)
    subs["amplitudes"] = p

    p = sub.add_parser("otoc", help="OTOC at a point or on a grid")
    _common(p), _gate_opts(p), _amp_opts(p)
    p.add_argument("--engine", choices=ENGINES, default="mcs")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--parity", type=int, choices=(1, -1), default=1)
    p.add_argument("--grid", type=parse_grid, help="x0:x1,t0:t1 (inclusive)")
    p.add_argument("--sigma-alpha", default="Z")
    p.add_argument("--sigma-beta", default="Z")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_otoc)
    subs["otoc"] = p

    p = sub.add_parser("fit", help="fit the erf front on a fixed-time slice")
    _common(p), _gate_opts(p), _amp_opts(p)
    p.add_argument("--input", help="CSV written by the otoc command")
    p.add_argument("--t", type=int)
    p.add_argument("--window-c", type=float, default=3.0)
    p.set_defaults(func=cmd_fit)
    subs["fit"] = p

    p = sub.add_parser("scan", help="front parameters versus perturbation strength")
    _common(p), _gate_opts(p), _amp_opts(p)
    p.add_argument("--eps-list", default="0,0.1,0.2,0.3")
    p.add_argument("--t-fit", type=int, default=256)
    p.add_argument("--window-c", type=float, default=3.0)
    p.set_defaults(func=cmd_scan)
    subs["scan"] = p

    p = sub.add_parser("early-time", help="exact light-cone OTOC and relaxation timescale")
    _common(p), _gate_opts(p)
    p.add_argument("--m-max", type=int, default=200)
    p.set_defaults(func=cmd_early_time)
    subs["early-time"] = p
    return parser, subs


def _config_defaults(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    with open(known.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise SystemExit("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    cfg = _config_defaults(argv)
    if cfg:
        for p in subs.values():
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    args = parser.parse_args(argv)
    if isinstance(getattr(args, "grid", None), str):
        args.grid = parse_grid(args.grid)
    try:
        problems = args.func(args)
    except DuotocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for msg in problems:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
