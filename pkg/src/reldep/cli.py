"""Command-line interface: ``reldep <subcommand> ...``.

Every subcommand writes CSV and/or JSON files (or JSON to stdout) and every
JSON payload embeds the effective configuration. Stochastic subcommands
require ``--seed``. ``CLD_QUAD_ORDER`` overrides the default quadrature order.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checkerboard as cb
from . import estimation as es
from . import kendall as kd
from . import local_dep as ld
from . import numerics as nm
from .copulas import SampleParseError, SampleSet, fmt, make_copula, model_from_dict, write_csv
from .errors import DomainError, RelDepError, UnsupportedFamilyError

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_FAILURE = 1


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dump(payload, path=None):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _add_model(p, required=True):
    p.add_argument("--family", required=required, help="copula family name")
    p.add_argument("--theta", type=float, help="family parameter")
    p.add_argument("--rho", type=float, help="Gaussian correlation")
    p.add_argument("--resolution", type=int, help="MICS quadrature resolution")


def _model(args):
    return make_copula(args.family, theta=args.theta, rho=args.rho, resolution=args.resolution)


def _base_config(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg["quad_order"] = nm.default_order()
    return cfg


# ---------------------------------------------------------------- eval


def cmd_eval(args):
    model = _model(args)
    if args.points:
        pts = np.array([[float(x) for x in p.split(",")] for p in args.points])
        u, v = pts[:, 0], pts[:, 1]
    else:
        g = np.arange(1, args.grid_size + 1) / (args.grid_size + 1)
        if args.diagonal:
            u, v = g, g
        else:
            uu, vv = np.meshgrid(g, g, indexing="ij")
            u, v = uu.ravel(), vv.ravel()
    C = model.cdf(u, v)
    c = model.pdf(u, v)
    i = ld.local_dependence(model, u, v, method=args.method)
    r = ld.relative_local_dependence(model, u, v, method=args.method)
    rows = list(zip(u, v, C, c, i, r))
    out = args.out
    if out in (None, "-"):
        sys.stdout.write("u,v,C,c,i,r\n")
        for row in rows:
            sys.stdout.write(",".join(fmt(x) for x in row) + "\n")
    else:
        write_csv(out, ["u", "v", "C", "c", "i", "r"], rows)
        _dump({"config": _base_config(args), "model": model.to_dict()}, out + ".json")
    return 0


# ---------------------------------------------------------------- sample


def cmd_sample(args):
    model = _model(args)
    s = model.sample(args.n, nm.RngStream(args.seed, args.stream))
    s.to_csv(args.out)
    return 0


# ---------------------------------------------------------------- estimate / depmap


def _kernel(args, n):
    if args.h1 is not None or args.h2 is not None:
        h1 = args.h1 if args.h1 is not None else args.h2
        h2 = args.h2 if args.h2 is not None else args.h1
        return es.KernelConfig(h1, h2)
    return es.KernelConfig.default(n, scale=args.bandwidth_scale)


def _load_sample(args):
    """Sample from ``--input`` (with its sidecar) or simulated inline."""
    if args.input:
        sample = SampleSet.from_csv(args.input)
        side = Path(args.input + ".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        return sample, meta
    if args.family is None:
        raise DomainError("estimate needs --input or --family/--theta for an inline simulation")
    if args.seed is None:
        raise DomainError("--seed is required to simulate a sample")
    model = _model(args)
    sample = model.sample(args.n, nm.RngStream(args.seed, args.stream))
    return sample, sample.metadata()


def _truth_model(args, meta):
    if getattr(args, "truth_family", None):
        return make_copula(args.truth_family, theta=args.truth_theta)
    fam, par = meta.get("family"), meta.get("parameter")
    if fam and isinstance(par, dict) and fam not in ("unknown", "parabola"):
        try:
            return model_from_dict({"family": fam, **par})
        except RelDepError:
            return None
    return None


def _write_report(report, prefix):
    report.to_csv(prefix + ".csv")
    report.to_json(prefix + ".json")


def cmd_estimate(args):
    sample, meta = _load_sample(args)
    config = _kernel(args, len(sample))
    report = es.estimate_grid(sample, args.grid, config, method=args.method,
                              mask_threshold=args.mask)
    truth = _truth_model(args, meta)
    if truth is not None:
        report.error = es.error_metric(
            report, lambda x, y: ld.relative_local_dependence(truth, x, y))
        report.config["truth"] = truth.to_dict()
    report.config["run"] = _base_config(args)
    report.config["sample"] = meta
    _write_report(report, args.out)
    return 0


def cmd_depmap(args):
    if args.seed is None:
        raise DomainError("--seed is required for dependence maps")
    if args.input:
        sample, meta = _load_sample(args)
    elif args.scenario == "parabola":
        sample = es.simulate_parabola(args.n, nm.RngStream(args.seed, args.stream)).ranks
        meta = sample.metadata()
    else:
        sample, meta = _load_sample(args)
    config = _kernel(args, len(sample))
    report = es.dependence_map(sample, args.grid, config, B=args.B, alpha=args.alpha,
                               rng=nm.RngStream(args.seed, (args.stream, 1)),
                               mask_threshold=args.mask, statistic=args.statistic)
    report.config["run"] = _base_config(args)
    report.config["sample"] = meta
    _write_report(report, args.out)
    return 0


# ---------------------------------------------------------------- kendall


def cmd_kendall(args):
    model = _model(args)
    cfg = _base_config(args)
    if args.shrink is not None:
        sides = args.sides or [0.16, 0.08, 0.04, 0.02, 0.01]
        vals = kd.shrinking_squares(model, args.shrink, sides, modified=args.modified)
        payload = {"model": model.to_dict(), "corner": args.shrink, "sides": sides,
                   "modified": args.modified, "values": vals}
        if args.modified:
            payload["richardson_limit"] = kd.modified_limit(model, args.shrink, sides[-2:]).value
        else:
            payload["slope"] = float(np.polyfit(np.log(sides), np.log(vals), 1)[0])
    elif args.rect is not None:
        payload = kd.kendall_report(model, region=kd.RectRegion(*args.rect))
    elif args.pq is not None:
        payload = kd.kendall_report(model, pq=args.pq)
    else:
        payload = kd.kendall_report(model)
        payload["tau_global"] = kd.tau_global(model)
    payload["config"] = cfg
    _dump(payload, args.out)
    return 0


# ---------------------------------------------------------------- checkerboard


def cmd_checkerboard(args):
    cfg = _base_config(args)
    if args.panel:
        panel = cb.panel_sweep(args.ks, args.zetas, args.n, args.tol, args.max_sweeps,
                               args.convention)
        index = cb.write_panel(panel, args.out)
        _dump({"config": cfg, "cells": index}, str(Path(args.out) / "config.json"))
        return 0
    if args.family:
        matrix = cb.discretize(_model(args), args.n)
        matrix.meta.update(k=args.k, zeta=args.zeta,
                           max_residual=cb.max_residual(matrix, args.k, args.zeta, args.convention))
    else:
        if args.k is None or args.zeta is None:
            raise DomainError("checkerboard needs --k and --zeta (or --family to discretize)")
        spec = cb.PdeSpec(args.k, args.zeta, args.n, args.tol, args.max_sweeps, args.convention,
                          args.schedule, args.relaxation)
        res = cb.greedy_solve(spec)
        matrix = res.matrix
        matrix.meta["residual_trace_tail"] = res.residual_trace[-5:].tolist()
        if res.error:
            matrix.meta["error"] = res.error
    matrix.meta["config"] = cfg
    matrix.to_csv(args.out)
    return 0


# ---------------------------------------------------------------- verify


def cmd_verify(args):
    from . import acceptance

    if args.list:
        for name in acceptance.CRITERIA:
            print(name)
        return 0
    results = acceptance.run(only=args.only)
    for res in results:
        print(res.line())
    if args.out:
        _dump({"config": _base_config(args), "results": [r.to_dict() for r in results]}, args.out)
    return 0 if results and all(r.passed for r in results) else EXIT_FAILURE


# ---------------------------------------------------------------- parser


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="reldep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="C, c, i and r on a grid")
    _add_model(p)
    p.add_argument("--diagonal", action="store_true", help="evaluate on the diagonal u = v")
    p.add_argument("--grid-size", type=int, default=9, help="interior points i/(N+1) per axis")
    p.add_argument("--points", nargs="+", metavar="U,V", help="explicit evaluation points")
    p.add_argument("--method", default="auto",
                   choices=["auto", "closed", "numeric", "generator", "exponent"])
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", help="draw a seeded sample")
    _add_model(p)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    def add_estimation(p):
        p.add_argument("--input", help="sample CSV with a u,v header")
        _add_model(p, required=False)
        p.add_argument("-n", type=int, default=1000)
        p.add_argument("--seed", type=int)
        p.add_argument("--stream", type=int, default=0)
        p.add_argument("--h1", type=float)
        p.add_argument("--h2", type=float)
        p.add_argument("--bandwidth-scale", type=float, default=es.DEFAULT_BANDWIDTH_SCALE)
        p.add_argument("--grid", type=_float_list, default=list(es.DEFAULT_GRID),
                       help="comma-separated coordinates of the square grid")
        p.add_argument("--mask", type=float, default=es.DEFAULT_MASK,
                       help="low-density threshold on g00")
        p.add_argument("--out", required=True, help="output prefix (.csv and .json)")

    p = sub.add_parser("estimate", help="kernel estimates of r on a grid")
    add_estimation(p)
    p.add_argument("--method", default="naive", choices=["naive", "local-frank"])
    p.add_argument("--truth-family")
    p.add_argument("--truth-theta", type=float)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("depmap", help="bootstrap dependence map")
    add_estimation(p)
    p.add_argument("--scenario", choices=["parabola", "copula"], default="copula")
    p.add_argument("-B", "--B", dest="B", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--statistic", choices=["local", "relative"], default="local")
    p.set_defaults(func=cmd_depmap)

    p = sub.add_parser("kendall", help="local Kendall's tau variants")
    _add_model(p)
    p.add_argument("--pq", type=float, nargs=2, metavar=("P", "Q"))
    p.add_argument("--rect", type=float, nargs=4, metavar=("P1", "P2", "Q1", "Q2"))
    p.add_argument("--shrink", type=float, nargs=2, metavar=("U", "V"),
                   help="corner of shrinking squares")
    p.add_argument("--sides", type=_float_list)
    p.add_argument("--modified", action="store_true", help="cubed-mass normalization")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_kendall)

    p = sub.add_parser("checkerboard", help="greedy checkerboard solver")
    p.add_argument("--k", type=float)
    p.add_argument("--zeta", type=float)
    p.add_argument("-n", "--n", dest="n", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=cb.PdeSpec.max_sweeps)
    p.add_argument("--convention", choices=cb.CONVENTIONS, default="density")
    p.add_argument("--schedule", choices=cb.SCHEDULES, default="colour")
    p.add_argument("--relaxation", type=float, default=1.0)
    p.add_argument("--panel", action="store_true", help="solve the whole (k, zeta) lattice")
    p.add_argument("--ks", type=_float_list, default=[-2, -1, 0, 1])
    p.add_argument("--zetas", type=_float_list, default=[1, 2, 4])
    _add_model(p, required=False)
    p.add_argument("--out", default="checkerboard.csv",
                   help="matrix CSV, or output directory with --panel")
    p.set_defaults(func=cmd_checkerboard)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--only", nargs="*", help="criterion names or substrings")
    p.add_argument("--list", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SampleParseError as exc:
        print(f"reldep: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (DomainError, UnsupportedFamilyError) as exc:
        print(f"reldep: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RelDepError as exc:
        print(f"reldep: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
