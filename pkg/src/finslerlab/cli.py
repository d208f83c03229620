"""Command-line front end.

Exit codes: 0 success, 1 a claim or expected verdict failed, 2 bad input,
3 numerical failure.  Errors are printed to stderr as
``{"error": {"code", "message", "context"}}``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as C
from .counterexample import build_paper_metric, verify_paper_claims
from .errors import ConfigError, FinslerError
from .geodesics import integrate_geodesic, isoparametric_function_check
from .hypersurface import isoparametric_verdict, parallel_flow, shape_operator
from .metric import eval_F
from .spray import riemann_ricci_flag

EXIT_OK, EXIT_CLAIM, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


def workers() -> int:
    raw = os.environ.get("FINSLER_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError("FINSLER_THREADS must be a positive integer", value=raw) from None
    if count < 1:
        raise ConfigError("FINSLER_THREADS must be a positive integer", value=raw)
    return count


def pmap(fn, items):
    items = list(items)
    count = min(workers(), len(items))
    if count <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(fn, items))


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as err:
        raise ConfigError("cannot read config file", path=path, reason=err.strerror) from None
    except json.JSONDecodeError as err:
        raise ConfigError("config is not valid JSON", path=path, line=err.lineno, reason=err.msg) from None


def _expect(cfg: dict, verdict: dict) -> bool:
    """True unless the config's ``expect`` block names a verdict that differs."""
    expect = cfg.get("expect") or {}
    C.check_keys(expect, set(), set(verdict), "expect")
    return all(verdict[k] == v for k, v in expect.items())


# ---------------------------------------------------------------------------
# commands; each returns (report, csv text or None, ok)


def cmd_curvature(cfg):
    C.check_keys(cfg, {"metric", "points", "directions"}, {"flags", "density"})
    metric = C.metric_from_dict(cfg["metric"])
    n = metric.dim
    points = C.vectors(cfg["points"], "points", n)
    dirs = C.vectors(cfg["directions"], "directions", n)
    flags = C.vectors(cfg["flags"], "flags", n) if "flags" in cfg else []
    density = cfg.get("density", "auto")
    if density not in ("auto", "quadrature"):
        raise ConfigError("density must be 'auto' or 'quadrature'", density=density)

    def one(pair):
        x, y = pair
        rep = riemann_ricci_flag(metric, x, y, flags, density)
        return {"x": x, "y": y, "F": eval_F(metric, x, y), **rep.to_dict()}

    results = pmap(one, [(x, y) for x in points for y in dirs])
    return {"command": "curvature", "metric": C.metric_to_dict(metric), "results": results}, None, True


def cmd_geodesic(cfg):
    C.check_keys(cfg, {"metric", "x0", "y0", "T"}, {"tol", "samples"})
    metric = C.metric_from_dict(cfg["metric"])
    n = metric.dim
    x0, y0 = C.vector(cfg["x0"], "x0", n), C.vector(cfg["y0"], "y0", n)
    T = C.number(cfg["T"], "T")
    tol = C.number(cfg.get("tol", 1e-10), "tol")
    samples = cfg.get("samples")
    t_eval = None
    if samples is not None:
        if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
            raise ConfigError("samples must be an integer >= 2", samples=samples)
        t_eval = np.linspace(0.0, T, samples)
    tr = integrate_geodesic(metric, x0, y0, T, tol, t_eval)
    report = {"command": "geodesic", "metric": C.metric_to_dict(metric), "steps": len(tr.t),
              "x_end": tr.x[-1], "v_end": tr.v[-1], "F_drift": float(np.ptp(tr.F))}
    return report, tr.to_csv(), True


def _hyp(cfg, metric):
    return C.hypersurface_from_dict(cfg["hypersurface"], metric.dim)


def cmd_hypersurface(cfg):
    C.check_keys(cfg, {"metric", "hypersurface", "points"}, {"verdict", "expect"})
    metric = C.metric_from_dict(cfg["metric"])
    hyp = _hyp(cfg, metric)
    points = C.vectors(cfg["points"], "points", metric.dim)
    shapes = pmap(lambda x: shape_operator(metric, hyp, x).to_dict(), points)
    report = {"command": "hypersurface", "metric": C.metric_to_dict(metric), "shapes": shapes}
    ok = True
    if "verdict" in cfg:
        opts = C.check_keys(cfg["verdict"], set(), {"t_max", "samples", "steps", "threshold", "seed"}, "verdict")
        kwargs = {k: (C.number(v, k) if k in ("t_max", "threshold") else int(v)) for k, v in opts.items()}
        v = isoparametric_verdict(metric, hyp, **kwargs)
        summary = {"is_isoparametric": v.is_isoparametric, "is_dmu_isoparametric": v.is_dmu_isoparametric}
        report["verdict"] = {**summary, "max_spread_aniso": v.max_spread_aniso,
                             "max_spread_mu": v.max_spread_mu}
        ok = _expect(cfg, summary)
    elif "expect" in cfg:
        raise ConfigError("expect needs a verdict block")
    return report, None, ok


def cmd_parallel_flow(cfg):
    C.check_keys(cfg, {"metric", "hypersurface", "seeds", "t_grid"}, {"fd_step"})
    metric = C.metric_from_dict(cfg["metric"])
    hyp = _hyp(cfg, metric)
    seeds = C.vectors(cfg["seeds"], "seeds", metric.dim)
    t_grid = C.vector(cfg["t_grid"], "t_grid")
    rep = parallel_flow(metric, hyp, seeds, t_grid, C.number(cfg.get("fd_step", 1e-4), "fd_step"))
    return {"command": "parallel-flow", "metric": C.metric_to_dict(metric), **rep.to_dict()}, rep.to_csv(), True


def cmd_isofunc(cfg):
    C.check_keys(cfg, {"metric", "f", "region"}, {"samples", "seed", "threshold", "expect"})
    metric = C.metric_from_dict(cfg["metric"])
    region = C.check_keys(cfg["region"], {"lo", "hi"}, where="region")
    lo, hi = C.vector(region["lo"], "lo", metric.dim), C.vector(region["hi"], "hi", metric.dim)
    if not isinstance(cfg["f"], str):
        raise ConfigError("f must be an expression string")
    v = isoparametric_function_check(metric, cfg["f"], (lo, hi), int(cfg.get("samples", 2000)),
                                     int(cfg.get("seed", 0)), C.number(cfg.get("threshold", 1e-6), "threshold"))
    ok = _expect(cfg, {"is_transnormal": v.is_transnormal, "is_isoparametric": v.is_isoparametric})
    return {"command": "isofunc", "metric": C.metric_to_dict(metric), **v.to_dict()}, None, ok


def cmd_verify_paper(cfg, args):
    C.check_keys(cfg, set(), {"tolerances"})
    inst = build_paper_metric(args.dim, args.b, args.x0n)
    rep = verify_paper_claims(inst, cfg.get("tolerances"))
    return {"command": "verify-paper", **rep.to_dict()}, None, rep.overall


COMMANDS = {
    "curvature": cmd_curvature,
    "geodesic": cmd_geodesic,
    "hypersurface": cmd_hypersurface,
    "parallel-flow": cmd_parallel_flow,
    "isofunc": cmd_isofunc,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finslerlab", description="Numerical Finsler geometry toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--csv", help="write the CSV series here (geodesic, parallel-flow)")
    vp = sub.add_parser("verify-paper")
    vp.add_argument("--dim", type=int, default=3)
    vp.add_argument("--b", type=float, default=0.5)
    vp.add_argument("--x0n", type=float, default=0.0)
    vp.add_argument("--config", help="optional JSON with a 'tolerances' block")
    vp.add_argument("--out")
    vp.add_argument("--csv")
    return p


def _write(path, text, stream):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stream.write(text)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return EXIT_INPUT if exit_.code else EXIT_OK
    try:
        if args.command == "verify-paper":
            cfg = load_config(args.config) if args.config else {}
            report, csv_text, ok = cmd_verify_paper(cfg, args)
        else:
            report, csv_text, ok = COMMANDS[args.command](load_config(args.config))
    except FinslerError as err:
        stderr.write(C.dumps({"error": err.to_dict()}))
        return EXIT_INPUT if err.kind == "input" else EXIT_NUMERICAL
    _write(args.out, C.dumps(report), stdout)
    if args.csv and csv_text is not None:
        _write(args.csv, csv_text, stdout)
    return EXIT_OK if ok else EXIT_CLAIM


def main() -> None:
    sys.exit(run())
