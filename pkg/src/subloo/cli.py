"""Command-line interface.

Subcommands::

    simulate    simulated regression data + draws from a posterior (approximation)
    estimate    subsampled (or full) PSIS-LOO elpd report
    compare     paired elpd difference of two draws files on one subsample
    experiment  SE-vs-n table for PPS and SRS subsampling
    validate    check a draws file and print its dimensions

Reports are JSON and echo the resolved configuration under ``"config"``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__, gaussian
from .draws import load_draws, save_draws
from .estimators import compare_models, estimate_elpd, full_elpd
from .experiments import se_sweep, write_table
from .loo import posterior_khat
from .sampling import STRATEGIES, Subsample, build_alias, compute_pi, draw_subsample

_POINT = ("lpd_point", "lpd_at_q_mean", "lpd_at_q_mode")


class CliError(Exception):
    pass


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _emit(text, output):
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _read_vector(path) -> np.ndarray:
    if str(path).endswith(".npy"):
        return np.load(path).astype(np.float64).reshape(-1)
    with open(path) as fh:
        text = fh.read().strip()
    if text.startswith("["):
        return np.asarray(json.loads(text), dtype=np.float64)
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def _point_lpd(args):
    if args.point_lpd:
        return _read_vector(args.point_lpd)
    if args.model:
        with open(args.model) as fh:
            model = gaussian.ConjugateLinearModel.from_json(fh.read())
        kind = "laplace" if args.strategy == "lpd_at_q_mode" else args.approx
        return gaussian.point_lpd(model, gaussian.fit(model, kind).mean)
    raise CliError(f"strategy {args.strategy!r} needs --model or --point-lpd")


def _plan(args, bundle):
    point = _point_lpd(args) if args.strategy in _POINT else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        plan = compute_pi(bundle, args.strategy, point_lpd=point)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return plan


def cmd_simulate(args):
    model = gaussian.simulate_lr(
        args.n, args.d, args.design, args.seed,
        rho=args.rho, noise_sd=args.noise_sd, outlier_fraction=args.outlier_fraction,
    )
    post = gaussian.fit(model, args.approx)
    # independent stream for the draws
    draw_seed = int(np.random.SeedSequence(args.seed).generate_state(1)[0])
    bundle = gaussian.make_bundle(model, post, args.s, draw_seed)
    os.makedirs(args.output, exist_ok=True)
    doc = model.to_dict()
    doc["approximation"] = {"kind": post.kind, "mean": post.mean.tolist(), "cov": post.cov.tolist()}
    doc["config"] = _config(args)
    with open(os.path.join(args.output, "model.json"), "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    draws_path = os.path.join(args.output, f"draws.{args.format}")
    save_draws(bundle, draws_path, args.format)
    print(draws_path)


def cmd_estimate(args):
    bundle = load_draws(args.draws, args.format)
    if args.full:
        report = full_elpd(bundle)
    else:
        if args.subsample is None and args.seed is None:
            raise CliError("--seed is required unless --full or --subsample is given")
        if args.subsample is None and args.m is None:
            raise CliError("--m is required unless --full or --subsample is given")
        plan = _plan(args, bundle)
        subsample = None
        if args.subsample:
            with open(args.subsample) as fh:
                subsample = Subsample.from_json(fh.read())
        report, subsample = estimate_elpd(bundle, plan, args.m, args.seed, subsample=subsample)
        if args.save_subsample:
            with open(args.save_subsample, "w") as fh:
                fh.write(subsample.to_json() + "\n")
    report.posterior_khat = posterior_khat(bundle) if bundle.n_draws >= 25 else float("nan")
    report.config = _config(args)
    _emit(report.to_json(indent=2), args.output)


def cmd_compare(args):
    bundle_a = load_draws(args.draws_a, args.format)
    bundle_b = load_draws(args.draws_b, args.format)
    if bundle_a.n_obs != bundle_b.n_obs:
        raise CliError(f"draws files cover different data: n={bundle_a.n_obs} vs n={bundle_b.n_obs}")
    plan = _plan(args, bundle_a)
    subsample = draw_subsample(build_alias(plan), args.m, args.seed)
    report = compare_models(bundle_a, bundle_b, plan, subsample)
    report.config = _config(args)
    _emit(report.to_json(indent=2), args.output)


def cmd_experiment(args):
    n_grid = [int(tok) for tok in args.n_grid.split(",") if tok.strip()]
    if args.replicates == 1:
        print("warning: --replicates 1 gives single-draw SE values", file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        rows = se_sweep(
            n_grid, args.m, args.replicates, args.seed, D=args.d, design=args.design, S=args.s, approx=args.approx
        )
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_table(rows, fh)
        with open(args.output + ".config.json", "w") as fh:
            json.dump(_config(args), fh, indent=2)
            fh.write("\n")
    else:
        write_table(rows, sys.stdout)


def cmd_validate(args):
    bundle = load_draws(args.draws, args.format)
    summary = {
        "valid": True,
        "n_draws": bundle.n_draws,
        "n_obs": bundle.n_obs,
        "exact_posterior_draws": bool(np.ptp(bundle.log_ratio) == 0.0),
        "config": _config(args),
    }
    _emit(json.dumps(summary, indent=2), args.output)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subloo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def draws_format(p):
        p.add_argument("--format", choices=("csv", "ndjson"), default=None,
                       help="draws file format (default: from extension)")

    def plan_args(p):
        p.add_argument("--strategy", choices=STRATEGIES, default="lpd_full")
        p.add_argument("--model", help="model JSON, used to compute point lpd at the posterior mean")
        p.add_argument("--point-lpd", help="file with precomputed log p(y_i | theta_hat), one value per observation")
        p.add_argument("--approx", choices=("exact", "laplace", "mean_field"), default="exact",
                       help="approximation whose mean is the point for --model")

    p = sub.add_parser("simulate", help="simulate regression data and posterior draws")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--design", choices=("correlated", "independent"), required=True)
    p.add_argument("--s", type=_positive_int, required=True, help="number of draws")
    p.add_argument("--approx", choices=("exact", "laplace", "mean_field"), default="exact")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--format", choices=("csv", "ndjson"), default="csv")
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate elpd_loo from a draws file")
    p.add_argument("--draws", required=True)
    draws_format(p)
    plan_args(p)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--full", action="store_true", help="PSIS-LOO on every observation instead of subsampling")
    p.add_argument("--subsample", help="reuse a subsample JSON instead of drawing one")
    p.add_argument("--save-subsample", help="write the drawn subsample JSON here")
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="paired elpd difference of two models")
    p.add_argument("--draws-a", required=True)
    p.add_argument("--draws-b", required=True)
    draws_format(p)
    plan_args(p)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="SE vs n for PPS and SRS subsampling")
    p.add_argument("--n-grid", default="100,1000,10000")
    p.add_argument("--m", type=_positive_int, default=100)
    p.add_argument("--replicates", type=_positive_int, default=200)
    p.add_argument("--d", type=_positive_int, default=5)
    p.add_argument("--design", choices=("correlated", "independent"), default="independent")
    p.add_argument("--s", type=_positive_int, default=4000)
    p.add_argument("--approx", choices=("exact", "laplace", "mean_field"), default="exact")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--output", help="CSV path (config goes to PATH.config.json)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="validate a draws file")
    p.add_argument("--draws", required=True)
    draws_format(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, OSError, IndexError, np.linalg.LinAlgError) as err:
        print(f"subloo {args.command}: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
