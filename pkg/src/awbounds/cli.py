"""``awcli``: command-line access to the distances, bounds, generators and
experiments.  Results are JSON (CSV for ``rate``) and always carry the
resolved configuration and the tolerances they were computed under.

Exit codes: 0 success, 2 validation / parse / I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import adapted, estimators, examples, hfun, ot_exact, smoothing
from .errors import AWError
from .measures import DECIMALS, PROB_TOL, PathMeasure, WeightSpec

EXECUTION_ONLY = {"threads", "out", "config", "command", "emit"}


class ConfigError(AWError):
    pass


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _tolerances() -> dict:
    return {"decimals": DECIMALS, "prob_tol": PROB_TOL, "dual_tol": ot_exact.DUAL_TOL,
            "chain_tol": adapted.CHAIN_TOL, "moment_tol": smoothing.MOMENT_TOL}


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in EXECUTION_ONLY and not callable(v)}


def _emit_text(text: str, out: str):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _emit_json(args, result: dict, extra_tol: dict | None = None):
    doc = {"command": args.command, "config": _resolved(args),
           "tolerances": {**_tolerances(), **(extra_tol or {})}, "result": result}
    _emit_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n", args.out)


def _load_measure(path: str) -> PathMeasure:
    with open(path) as fh:
        return PathMeasure.from_json(fh.read())


def _weight(spec: str, p: float) -> WeightSpec:
    if spec == "one":
        return WeightSpec.one()
    if spec == "ppower":
        return WeightSpec.ppower(p)
    if spec.startswith("file:"):
        spec = spec[5:]
    with open(spec) as fh:
        return WeightSpec.from_dict(json.load(fh))


def _floats(text: str) -> list:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("AWCLI_SEED")
    return int(env) if env else 0


# ---------------------------------------------------------------- commands
def cmd_w(args):
    mu, nu = _load_measure(args.mu), _load_measure(args.nu)
    v = ot_exact.wasserstein_pp(mu, nu, args.p)
    _emit_json(args, {"W_pp": v, "W_p": v ** (1 / args.p)})


def cmd_aw(args):
    mu, nu = _load_measure(args.mu), _load_measure(args.nu)
    v = adapted.adapted_wasserstein_pp(mu, nu, args.p)
    lb = adapted.first_stage_lower_bound(mu, nu, args.p)
    _emit_json(args, {"AW_pp": v, "AW_p": v ** (1 / args.p), "first_stage_lower_bound": lb})


def cmd_tv(args):
    mu, nu = _load_measure(args.mu), _load_measure(args.nu)
    _emit_json(args, {"TV_w": adapted.tv_weighted(mu, nu, _weight(args.weight, args.p))})


def cmd_atv(args):
    mu, nu = _load_measure(args.mu), _load_measure(args.nu)
    w = _weight(args.weight, args.p)
    atv, tv = adapted.atv_weighted(mu, nu, w), adapted.tv_weighted(mu, nu, w)
    _emit_json(args, {"ATV_w": atv, "TV_w": tv, "ratio": atv / tv if tv > 0 else "nan"})


def cmd_report(args):
    mu, nu = _load_measure(args.mu), _load_measure(args.nu)
    rep = adapted.bound_report(mu, nu, args.p)
    res = rep.to_dict()
    res["ratio_ATV_TV"] = rep.ATV / rep.TV if rep.TV > 0 else "nan"
    res["ratio_ATV_TV_pp"] = rep.ATV_pp / rep.TV_pp if rep.TV_pp > 0 else "nan"
    _emit_json(args, res)


def cmd_hfun(args):
    par = hfun.HParams(args.l, args.c, args.lam, args.kappa, args.a, args.b)
    res = {"inf_closed": hfun.h_inf_closed(par), "lower_cor": hfun.h_lower_cor(par),
           "inf_oracle": hfun.h_inf_oracle(par, args.res)}
    if args.y is not None:
        res["H"] = hfun.h_eval(par, args.u, args.y)
    _emit_json(args, res, {"oracle_res": args.res})


def _write_measure(mu: PathMeasure, path: str):
    with open(path, "w") as fh:
        fh.write(mu.to_json())


def cmd_example(args):
    emit = args.emit or []
    if emit and len(emit) != 2:
        raise ConfigError("--emit takes two paths")
    if args.id == "3.5":
        c = tuple(_floats(args.c)) if args.c else ()
        par = examples.Example35Params(args.T, args.eps, c, args.p_rule)
        mu, nu, w = examples.gen_example35(par)
        atv, tv = adapted.atv_weighted(mu, nu, w), adapted.tv_weighted(mu, nu, w)
        res = {"TV": adapted.tv_weighted(mu, nu), "ATV": adapted.atv_weighted(mu, nu), "TV_w": tv, "ATV_w": atv,
               "ratio": adapted.atv_weighted(mu, nu) / adapted.tv_weighted(mu, nu), "ratio_w": atv / tv,
               "closed_form": par.closed_form(), "lambda_limit": par.lambda_limit(), "weight": w.to_dict()}
    elif args.id == "3.6":
        mu, nu = examples.gen_example36(args.eps)
        w1 = WeightSpec.ppower(1)
        res = {"TV_1": adapted.tv_weighted(mu, nu, w1), "ATV_1": adapted.atv_weighted(mu, nu, w1),
               "closed_form": examples.example36_closed_form(args.eps)}
    else:
        mesh = args.mesh if args.mesh is not None else 1.0 / math.ceil(20 / args.eps)
        f, g = examples.gen_example43(args.eps, args.k, mesh)
        res = {"mass_mu": f.total_mass(), "mass_nu": g.total_mass(), "shape": list(f.shape), "mesh": mesh,
               "closed_form": examples.example43_closed_form(args.eps, args.k)}
        if emit:
            f.save(emit[0])
            g.save(emit[1])
        _emit_json(args, res)
        return
    if emit:
        _write_measure(mu, emit[0])
        _write_measure(nu, emit[1])
    _emit_json(args, res)


def _kernel(args, dims):
    fam = args.kernel
    if fam == "shifted_gaussian":
        return smoothing.make_kernel("custom", args.k, dims, smoothing.shifted_gaussian(1.0))
    return smoothing.make_kernel(fam, args.k, dims)


def cmd_smooth(args):
    f = smoothing.GridDensity.load(args.grid)
    K = _kernel(args, f.values.ndim)
    g = smoothing.convolve(f, K, args.h)
    if args.save:
        g.save(args.save)
    _emit_json(args, {"mass_in": f.total_mass(), "mass_out": g.total_mass(),
                      "l1_change": g.with_values(g.values - f.values).l1(), "kernel": K.describe()},
               {"mesh": f.mesh})


def cmd_lemma41(args):
    f = smoothing.GridDensity.load(args.grid)
    K = _kernel(args, f.values.ndim)
    rows = smoothing.lemma41_check(f, K, args.k, _floats(args.hs))
    res = {"rows": rows, "kernel": K.describe()}
    if len(rows) >= 2:
        res["decay_order"] = smoothing.decay_order(rows)
    _emit_json(args, res, {"mesh": f.mesh})


def cmd_thm29(args):
    f, g = smoothing.GridDensity.load(args.mu), smoothing.GridDensity.load(args.nu)
    K = _kernel(args, f.values.ndim)
    rep = smoothing.theorem29_bound(f, g, args.k, K, args.p, args.q)
    _emit_json(args, {**rep.to_dict(), "kernel": K.describe()}, {"mesh": f.mesh, "slack_tol": rep.tol})


def cmd_rate(args):
    if args.target.startswith("grid:"):
        target = smoothing.GridDensity.load(args.target[5:])
    else:
        target = args.target
    cfg = estimators.RateExperimentConfig(ns=tuple(_ints(args.ns)), reps=args.reps, seed=_seed(args),
                                          estimator=args.estimator, target=target, resolution=args.resolution,
                                          h_const=args.h_const, threads=args.threads)
    rows = estimators.rate_experiment(cfg)
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_clean({**_resolved(args), "seed": cfg.seed}), sort_keys=True) + "\n")
    buf.write("# tolerances: " + json.dumps(_clean({**_tolerances(), "resolution": cfg.resolution}),
                                           sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=["n", "mean", "sd", "slope", "slope_se"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if k != "n" else v) for k, v in r.items()})
    _emit_text(buf.getvalue(), args.out)


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="awcli", description="Adapted Wasserstein / total variation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", default="-", help="output path, '-' for stdout")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: logical cores)")
        sp.add_argument("--config", default=None, help="JSON file with option values")
        return sp

    def pair(sp):
        sp.add_argument("mu")
        sp.add_argument("nu")

    sp = add("w", cmd_w, "Wasserstein distance")
    sp.add_argument("--p", type=float, default=1.0)
    pair(sp)
    sp = add("aw", cmd_aw, "adapted Wasserstein distance")
    sp.add_argument("--p", type=float, default=1.0)
    pair(sp)
    for name, fn in (("tv", cmd_tv), ("atv", cmd_atv)):
        sp = add(name, fn, f"weighted {name.upper()}")
        sp.add_argument("--weight", default="one", help="one, ppower, or file:<weight.json>")
        sp.add_argument("--p", type=float, default=1.0)
        pair(sp)
    sp = add("report", cmd_report, "full bound chain")
    sp.add_argument("--p", type=float, default=1.0)
    pair(sp)
    sp = add("hfun", cmd_hfun, "H-function infimum (closed form, relaxed bound, oracle)")
    for k in ("l", "c", "kappa", "a", "b"):
        sp.add_argument(f"--{k}", type=float, required=True)
    sp.add_argument("--lambda", "--lam", dest="lam", type=float, required=True)
    sp.add_argument("--u", type=float, default=0.0)
    sp.add_argument("--y", type=float, default=None)
    sp.add_argument("--oracle-res", "--res", dest="res", type=int, default=400)
    sp = add("example", cmd_example, "generate a counterexample pair")
    sp.add_argument("--id", choices=["3.5", "3.6", "4.3"], required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--T", type=int, default=2)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--c", default=None, help="comma separated c_2..c_T")
    sp.add_argument("--p-rule", dest="p_rule", choices=list(examples.P_RULES), default="minimal")
    sp.add_argument("--mesh", type=float, default=None)
    sp.add_argument("--emit", nargs=2, default=None, metavar=("MU", "NU"))

    def kernel_opts(sp, k_default):
        sp.add_argument("--kernel", default="gaussian_order",
                        choices=["box", "gaussian", "gaussian_order", "shifted_gaussian"])
        sp.add_argument("--k", type=int, default=k_default)

    sp = add("smooth", cmd_smooth, "convolve a grid density with K_h")
    sp.add_argument("grid")
    kernel_opts(sp, 2)
    sp.add_argument("--h", type=float, required=True)
    sp.add_argument("--save", default=None, help="write the smoothed grid here")
    sp = add("lemma41", cmd_lemma41, "smoothing error against the Sobolev bound")
    sp.add_argument("grid")
    kernel_opts(sp, 2)
    sp.add_argument("--hs", default="0.5,0.25,0.125")
    sp = add("thm29", cmd_thm29, "AW bound from W_q and Sobolev norms")
    pair(sp)
    kernel_opts(sp, 2)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--q", type=float, default=2.0)
    sp = add("rate", cmd_rate, "Monte-Carlo convergence experiment (CSV)")
    sp.add_argument("--target", default="uniform2d")
    sp.add_argument("--estimator", choices=list(estimators.ESTIMATORS), default="kde")
    sp.add_argument("--ns", default="250,500,1000,2000,4000")
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--resolution", type=int, default=32)
    sp.add_argument("--h-const", dest="h_const", type=float, default=0.5)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list, args):
    with open(args.config) as fh:
        conf = json.load(fh)
    if not isinstance(conf, dict):
        raise ConfigError("config file must hold a JSON object")
    sp = ap._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sp._actions}
    unknown = sorted(set(conf) - known - {"command"})
    if unknown:
        raise ConfigError(f"unknown config keys for '{args.command}': {unknown}")
    sp.set_defaults(**{k: v for k, v in conf.items() if k != "command"})
    return ap.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            args = _apply_config(ap, argv, args)
        args.func(args)
    except (AWError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"awcli {args.command}: error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
