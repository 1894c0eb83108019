"""Command-line front end: ``localize {gen,bound,meanfield,decompose,check}``.

Every command writes one JSON report; identical flags and seed give
byte-identical output regardless of ``--threads``. Wall time goes to stderr
so it never perturbs the report.
"""
import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__, bounds, generators, localization, meanfield, suites
from ._accel import set_threads
from .measure import covariance, gibbs_measure
from .modelio import dumps, load_measure, load_model, save_model
from .models import DEFAULT_STATE_CAP, ModelError, exact_log_z

log = logging.getLogger("localize")

# flags that do not influence results are left out of the command echo
_NOT_ECHOED = {"threads", "out", "traj_out", "func", "verbose"}


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _emit(args, payload):
    report = {"tool": "localize", "version": __version__, "command": _echo(args),
              "payload": payload}
    text = dumps(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_L(spec, dim):
    if spec.startswith("eps:"):
        eps = float(spec[4:])
        if not eps > 0:
            raise ValueError("--L eps:VALUE needs VALUE > 0")
        return eps * np.eye(dim)
    with open(spec) as fh:
        L = np.asarray(json.load(fh), dtype=np.float64)
    if L.shape != (dim, dim):
        raise ValueError(f"--L matrix has shape {L.shape}, expected ({dim}, {dim})")
    return L


# ------------------------------------------------------------------ commands

def cmd_gen(args):
    if args.kind == "curie-weiss":
        model = generators.gen_curie_weiss(args.n, args.beta)
    elif args.kind == "torus":
        model = generators.gen_torus_heat_kernel(args.k, args.d, args.alpha, args.beta)
    else:
        model = generators.gen_expander(args.n, args.d, args.beta, args.seed)
    save_model(model, args.model_out)
    _emit(args, {"model_file": os.path.basename(args.model_out), "n": model.n,
                 "metadata": model.metadata})
    return 0


def _bound_report(model, S, p_grid, cov):
    J = bounds.lift(model.J, model.n * model.k)
    rep = bounds.best_bound(J, S, cov, p_grid)
    rep.extras["p_grid"] = list(p_grid)
    return rep


def cmd_bound(args):
    model = load_model(args.model)
    cov = None
    if args.exact_cov:
        cov = covariance(gibbs_measure(model, cap=args.cap))
    S = args.S if args.S is not None else (float(np.trace(cov)) if cov is not None
                                          else model.default_budget())
    p_grid = tuple(args.p) if args.p else bounds.DEFAULT_P_GRID
    rep = _bound_report(model, S, p_grid, cov)
    _emit(args, {"bounds": rep.to_dict()})
    return 0


def cmd_meanfield(args):
    model = load_model(args.model)
    sol = meanfield.mf_optimize(model, restarts=args.restarts, tol=args.tol,
                                max_iters=args.max_iters, seed=args.seed)
    payload = {"solution": sol.to_dict()}
    code = 0
    if args.exact:
        logz = exact_log_z(model, cap=args.cap)
        cov = covariance(gibbs_measure(model, cap=args.cap))
        d = logz - sol.value
        rep = _bound_report(model, None, bounds.DEFAULT_P_GRID, cov)
        best_name, best_value = rep.best
        verdicts = [
            {"name": "gibbs_inequality", "deficit": d, "holds": bool(d >= -1e-9)},
            {"name": "deficit_le_best_bound", "deficit": d, "bound": best_value,
             "bound_name": best_name, "holds": bool(d <= best_value + 1e-8)},
        ]
        payload.update({"exact_log_z": logz, "mf_value": sol.value, "deficit": d,
                        "bounds": rep.to_dict(), "verdicts": verdicts})
        code = 0 if all(v["holds"] for v in verdicts) else 1
    _emit(args, payload)
    return code


def _write_trajectory(path, paths):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "trace_QAQ", "entropy", "trace_se", "trials"])
        for t, tr, se, ent, count in localization.trace_profile(paths):
            w.writerow([repr(t), repr(tr), repr(ent), repr(se), count])


def cmd_decompose(args):
    if args.measure:
        mu = load_measure(args.measure)
    else:
        mu = gibbs_measure(load_model(args.model), cap=args.cap)
    L = _parse_L(args.L, mu.dim)
    cfg = localization.LocalizationConfig(dt=args.dt, trials=args.trials, seed=args.seed)
    record = args.traj_every if args.traj_out else 0
    run = localization.decompose(mu, L, cfg, decay_times=args.decay_times or (),
                                 record_every=record)
    if args.traj_out:
        _write_trajectory(args.traj_out, run.paths)
    payload = {"report": run.report.to_dict(), "martingale": run.martingale.to_dict()}
    if run.decay:
        payload["decay"] = [r.to_dict() for r in run.decay]
    _emit(args, payload)
    return 0 if run.report.holds else 1


def cmd_check(args):
    res = suites.run_suite(args.suite, seed=args.seed, cases=args.cases)
    width = max(len(k) for k in ("case", "margin", "passed"))
    sys.stderr.write(f"{'case':>{width}}  {'margin':>14}  passed\n")
    for row in res.rows:
        sys.stderr.write(f"{row['case']:>{width}}  {row['margin']:>14.6g}  {row['passed']}\n")
    sys.stderr.write(f"{args.suite}: {len(res.rows) - res.failures}/{len(res.rows)} passed\n")
    _emit(args, res.to_dict())
    return 0 if res.passed else 1


# -------------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $LOCALIZE_THREADS or all cores)")
    common.add_argument("--out", default=None, help="write the JSON report here (default stdout)")
    common.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP,
                        help="maximum number of enumerated configurations")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="localize", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an example model file")
    gsub = gen.add_subparsers(dest="kind", required=True)
    cw = gsub.add_parser("curie-weiss", parents=[common])
    cw.add_argument("--n", type=int, required=True)
    cw.add_argument("--beta", type=float, required=True)
    tor = gsub.add_parser("torus", parents=[common])
    tor.add_argument("--k", type=int, required=True)
    tor.add_argument("--d", type=int, required=True)
    tor.add_argument("--alpha", type=float, required=True)
    tor.add_argument("--beta", type=float, required=True)
    exp = gsub.add_parser("expander", parents=[common])
    exp.add_argument("--n", type=int, required=True)
    exp.add_argument("--d", type=int, required=True)
    exp.add_argument("--beta", type=float, required=True)
    exp.add_argument("--seed", type=int, default=0)
    for p in (cw, tor, exp):
        p.add_argument("--model-out", required=True, help="path of the model file to write")
        p.set_defaults(func=cmd_gen, command="gen")

    bnd = sub.add_parser("bound", parents=[common], help="evaluate mean-field deficit bounds")
    bnd.add_argument("--model", required=True)
    bnd.add_argument("--S", type=float, default=None, help="trace budget (default n, or D^2 n)")
    bnd.add_argument("--p", type=float, action="append", help="Schatten exponent (repeatable)")
    bnd.add_argument("--exact-cov", action="store_true",
                     help="enumerate the Gibbs measure for the log-det bound")
    bnd.set_defaults(func=cmd_bound)

    mf = sub.add_parser("meanfield", parents=[common], help="optimize the mean-field objective")
    mf.add_argument("--model", required=True)
    mf.add_argument("--restarts", type=int, default=8)
    mf.add_argument("--tol", type=float, default=1e-10)
    mf.add_argument("--max-iters", type=int, default=10_000)
    mf.add_argument("--seed", type=int, default=0)
    mf.add_argument("--exact", action="store_true", help="also compute log Z, deficit and bounds")
    mf.set_defaults(func=cmd_meanfield)

    dec = sub.add_parser("decompose", parents=[common],
                         help="sample the localization decomposition and verify it")
    src = dec.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--measure", help="atomic measure JSON file")
    dec.add_argument("--L", default="eps:1", help="eps:VALUE for VALUE*Id, or a JSON matrix file")
    dec.add_argument("--trials", type=int, default=2000)
    dec.add_argument("--dt", type=float, default=1e-3)
    dec.add_argument("--seed", type=int, default=0)
    dec.add_argument("--decay-times", type=float, nargs="*", default=None)
    dec.add_argument("--traj-out", default=None, help="CSV of t, Tr(QA_tQ), H(mu_t)")
    dec.add_argument("--traj-every", type=int, default=10, help="trajectory cadence in steps")
    dec.set_defaults(func=cmd_decompose)

    chk = sub.add_parser("check", parents=[common], help="run a seeded property suite")
    chk.add_argument("--suite", required=True, choices=suites.SUITES)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--cases", type=int, default=None)
    chk.set_defaults(func=cmd_check)
    return parser


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("LOCALIZE_THREADS")
    return int(env) if env else os.cpu_count()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    set_threads(_threads(args))
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (ModelError, ValueError, OSError, KeyError) as exc:
        parser.exit(2, f"localize: error: {exc}\n")
    sys.stderr.write(f"wall time {time.perf_counter() - start:.3f}s\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
