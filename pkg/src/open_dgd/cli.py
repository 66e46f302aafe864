"""Command-line front end.

Exit codes: 0 success / all checks pass, 1 a check failed, 2 usage or input error.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, io, worstcase
from .dgd import run
from .open_system import envelope_for, simulate_open, stability_radius

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _overrides(inst, args):
    changes = {}
    if args.rho is not None:
        changes["rho"] = args.rho
        changes["eta"] = None
    if args.eta is not None:
        changes["eta"] = args.eta
    return inst.replace(**changes) if changes else inst


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def cmd_simulate(args):
    if args.iters < 0:
        raise UsageError("--iters must be nonnegative")
    inst, extras = io.load_instance(args.instance)
    inst = _overrides(inst, args)
    x0 = extras.get("x0", np.zeros((inst.n, inst.d)))
    schedule = None
    if args.schedule:
        raw = io.load_json(args.schedule)
        if isinstance(raw, dict) and "seed" not in raw:
            raw["seed"] = args.seed
        try:
            schedule = io.parse_schedule(raw)
        except io.ParseError as exc:
            raise io.ParseError(f"{args.schedule}: {exc.where}" if exc.where else args.schedule,
                                exc.msg) from None
    out = _out_dir(args)
    if schedule is None:
        tr = run(inst, x0, args.iters)
        tr.to_csv(out / "trace.csv")
        env = envelope_for(inst)
        norms = tr.norm_x
        hits = np.flatnonzero(norms <= env.R)
        entry = int(hits[0]) if hits.size else None
        tail = norms[entry:] if entry is not None else norms[:0]
        violations = int(np.sum(tail > env.R + 1e-9))
        terminal = {"norm_x": tr.norm_x[-1], "dist_to_min": tr.dist_to_min[-1],
                    "F_rho": tr.F_rho[-1], "consensus_residual": tr.consensus_residual[-1],
                    "gradient_norm": tr.terminal_gradient_norm}
        mode = "none"
    else:
        tr = simulate_open(inst, x0, schedule, args.iters, track_minimizer=not args.no_track)
        tr.to_csv(out / "trace.csv")
        env = tr.envelope
        entry, violations = tr.entry_k, tr.violations
        tail = tr.post_entry_norms
        terminal = {"norm_x": tr.norm_x[-1], "dist_to_min": tr.dist_to_min[-1],
                    "F_rho": tr.F_rho[-1], "consensus_residual": tr.consensus_residual[-1],
                    "inst_min_norm": tr.inst_min_norm[-1]}
        mode = schedule.mode
    summary = {
        "iterations": args.iters, "n": inst.n, "d": inst.d, "rho": inst.rho, "eta": inst.eta,
        "eta_valid": bool(inst.eta_valid), "schedule_mode": mode,
        "alpha": inst.params.alpha, "beta": inst.params.beta,
        "envelope": {"kappa": env.kappa, "kappa_rho": env.kappa_rho, "b": env.b, "R": env.R,
                     "R_kappa": float(bounds.localization_radius(env.kappa))},
        "terminal": {k: _jsonable(v) for k, v in terminal.items()},
        "entry_k": entry,
        "max_post_entry_norm": float(tail.max()) if tail.size else None,
        "inside_ball_violations": violations,
        "stability_pass": entry is not None and violations == 0,
    }
    io.dump_json(summary, out / "summary.json")
    print(f"wrote {out / 'trace.csv'} ({args.iters + 1} rows) and {out / 'summary.json'}")
    print(f"R = {env.R:.6g}, max post-entry norm = {summary['max_post_entry_norm']}, "
          f"violations = {violations}")
    return EXIT_OK if summary["stability_pass"] else EXIT_FAIL


def cmd_verify(args):
    if args.instance:
        inst, extras = io.load_instance(args.instance)
        inst = _overrides(inst, args)
        report = bounds.check_instance(inst, extras.get("swap"))
        report.fingerprint = bounds.fingerprint(io.load_json(args.instance))
    else:
        if args.count < 1:
            raise UsageError("--count must be positive")
        report = bounds.verify_random(args.count, args.seed)
    out = _out_dir(args)
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    failed = [r.check for r in report if not r.passed]
    failed += [k for k, v in report.failures.items() if v and k not in failed]
    for r in report:
        flag = "pass" if r.passed else "FAIL"
        print(f"{flag}  {r.check:32s} observed={r.observed:.6g} bound={r.bound:.6g}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_FAIL
    return EXIT_OK


def _parse_kappas(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--kappas must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise UsageError("--kappas is empty")
    if any(k < 1 for k in vals):
        raise UsageError("every kappa must be >= 1")
    return vals


def cmd_worstcase(args):
    kappas = _parse_kappas(args.kappas)
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    rows = worstcase.scaling_report(args.n, kappas, restarts=args.restarts, budget=args.budget,
                                    seed=args.seed, jobs=args.jobs)
    out = _out_dir(args)
    worstcase.write_scaling_csv(out / "scaling.csv", rows)
    for r in rows:
        print(f"kappa={r['kappa']:g}  best={r['best_value']:.6g}  "
              f"best/sqrt(kappa)={r['ratio_to_sqrt_kappa']:.4f}  bound={r['bound']:.6g}")
    return EXIT_OK


def cmd_localize(args):
    if args.instance:
        inst, _ = io.load_instance(args.instance)
        inst = _overrides(inst, args)
        p = inst.params
        env = stability_radius(p.alpha, p.beta, inst.rho, inst.net.lambda_n, inst.n)
    else:
        alpha = args.alpha
        beta = args.beta if args.beta is not None else (args.kappa * alpha if args.kappa else None)
        if beta is None or args.lambda_n is None or args.n is None:
            raise UsageError("localize needs --instance, or --kappa/--beta with --lambda-n and --n")
        try:
            env = stability_radius(alpha, beta, args.rho or 0.0, args.lambda_n, args.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    result = {"kappa": env.kappa, "R_kappa": float(bounds.localization_radius(env.kappa)),
              "kappa_rho": env.kappa_rho, "b": env.b, "R": env.R, "n": env.n}
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def build_parser():
    default_out = os.environ.get("OPEN_DGD_OUT", "out")
    parser = argparse.ArgumentParser(prog="open-dgd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, instance_required=False):
        p.add_argument("--instance", required=instance_required, help="problem instance JSON")
        p.add_argument("--rho", type=float, help="override the penalty weight")
        p.add_argument("--eta", type=float, help="override the step size")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=default_out, help=f"output directory (default {default_out})")
        p.add_argument("--jobs", type=int, default=1, help="worker cap for batch commands")

    p = sub.add_parser("simulate", help="run DGD, optionally under a schedule of function changes")
    common(p, instance_required=True)
    p.add_argument("--schedule", help="event schedule JSON")
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--no-track", action="store_true",
                   help="skip exact minimizer solves after each function change")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check the closed-form bounds")
    common(p)
    p.add_argument("--count", type=int, default=1000, help="random instances when no --instance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("worstcase", help="search for the worst swap sensitivity")
    common(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--kappas", default="10,100,1000")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--budget", type=int, default=4000, help="evaluations per restart")
    p.set_defaults(func=cmd_worstcase)

    p = sub.add_parser("localize", help="print R_kappa, R and kappa_rho")
    common(p)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--lambda-n", type=float, dest="lambda_n")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_localize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
