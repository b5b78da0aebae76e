"""
Command-line entry point for the sparse EWA toolkit.

    python cli.py [--seed N] [--verbose] <command> ...

    gen example1|example2     write a simulated dataset (CSV + JSON sidecar)
    fit ewa|lasso|lasso-gauss fit one estimator on a dataset CSV
    bench example1|example2   replicate an experiment, write the loss table
    noise check|threshold     verify a noise coupling / print the beta rule
    bound soi|corollary1      evaluate a risk bound
    prior compare             heavy-tail quantile summary of three priors

Payloads go to stdout (or --out) as JSON/CSV; tagged diagnostics go to stderr.
Exit codes: 0 success, 2 usage or input error, 3 estimator diverged.
"""

import sys
import json
import math
import argparse

import settings
from regression_data import load_dataset, save_dataset, build_gram
from estimators import EwaConfig, LassoConfig, resolve_tuning, ewa_fit, lasso_fit, lasso_gauss_ideal
from langevin_sampler import SamplerConfig, write_trace_csv
from noise_models import NoiseModel, FAMILIES, BOUNDED_BASES, beta_threshold, temperature_for_dictionary, check_assumption_n
from oracle_bounds import SoiInputs, soi_terms, soi_rhs, soi_preconditions, corollary1_rhs
from sparsity_prior import heavy_tail_comparison, write_heavy_tail_csv
from datagen import example_spec, example2_sample, generate, write_image_csv, write_sample_csv
from bench import ESTIMATORS, BenchSpec, table_cells, run_bench, write_report_csv, write_report_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


class CliError(Exception):
    """Bad input detected after argument parsing; reported with exit code 2."""


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit(payload, out):
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as f:
            f.write(text)
        print(f"[CLI] wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _floats(values):
    return [float(v) for v in values]


# ── gen ──

def cmd_gen(args):
    if args.experiment == "example1":
        spec = example_spec("example1", n=args.n, seed=args.seed, M=args.m, S=args.s)
    else:
        spec = example_spec("example2", n=args.n, seed=args.seed, sigma=args.sigma, k=args.k)
    if args.sample_csv and args.experiment != "example2":
        raise CliError("--sample-csv needs example2 (sample points on the unit square)")
    if args.sample_csv:
        points, dataset = example2_sample(spec)
        write_sample_csv(args.sample_csv, points, dataset.responses)
        print(f"[CLI] wrote {args.sample_csv}", file=sys.stderr)
    else:
        dataset = generate(spec)
    save_dataset(dataset, args.out)
    print(f"[CLI] {args.experiment}: n={dataset.n} M={dataset.M} sigma={dataset.noise_level:.6g} -> {args.out}",
          file=sys.stderr)
    return EXIT_OK


# ── fit ──

def _image_side(dataset):
    k = math.isqrt(dataset.M)
    if k * k != dataset.M:
        raise CliError(f"--image-csv needs a k*k rectangle dictionary, got M={dataset.M}")
    return k


def _load(args):
    try:
        return load_dataset(args.data, sigma=args.sigma)
    except (OSError, UnicodeDecodeError) as e:
        raise CliError(f"cannot read {args.data}: {e}")


def cmd_fit(args):
    dataset = _load(args)
    k = _image_side(dataset) if args.image_csv else None
    gram = build_gram(dataset)
    payload = {"estimate": None, "diagnostics": {}, "config": {"data": args.data, "sigma": dataset.noise_level}}
    code = EXIT_OK

    if args.estimator == "ewa":
        sampler = SamplerConfig(
            step=args.step,
            horizon=args.horizon,
            burn_in=args.burn_in,
            seed=args.seed,
            max_restarts=args.max_restarts,
            antithetic=args.antithetic,
            thin=(args.thin or int(settings.section("sampler")["thin"])) if args.trace else 0,
        )
        config = resolve_tuning(dataset, EwaConfig(beta=args.beta, tau=args.tau, alpha=args.alpha, sampler=sampler), gram)
        estimate, report = ewa_fit(dataset, config, gram=gram, verbose=args.verbose)
        payload["diagnostics"] = report.to_dict()
        payload["config"].update(config.to_dict())
        payload["config"]["antithetic"] = args.antithetic
        if args.trace and not report.diverged:
            write_trace_csv(report, args.trace)
        if report.diverged:
            print(f"[CLI] EWA diverged after {report.restarts_used} restarts", file=sys.stderr)
            code = EXIT_DIVERGED
    elif args.estimator == "lasso":
        config = LassoConfig(reg_level=args.reg_level, max_sweeps=args.max_sweeps, tol=args.tol)
        estimate, info = lasso_fit(dataset, config, gram=gram, verbose=args.verbose)
        payload["diagnostics"] = {"sweeps": info["sweeps"], "converged": info["converged"],
                                  "objective": info["objective"][-1] if info["objective"] else None}
        payload["config"].update({"reg_level": info["reg_level"], "max_sweeps": config.max_sweeps, "tol": config.tol})
    else:
        if dataset.truth is None:
            raise CliError("lasso-gauss is an oracle estimator: the dataset sidecar must carry the truth")
        estimate, info = lasso_gauss_ideal(dataset, grid_size=args.grid_size, gram=gram)
        payload["diagnostics"] = {"support": info["support"], "loss": info["loss"]}
        payload["config"].update({"reg_level": info["reg_level"], "grid_size": info["grid_size"]})

    payload["estimate"] = _floats(estimate)
    if args.image_csv:
        write_image_csv(args.image_csv, estimate, k, resolution=args.image_resolution, truth=dataset.truth)
        print(f"[CLI] wrote {args.image_csv} ({args.image_resolution}x{args.image_resolution} pixels)", file=sys.stderr)
    _emit(payload, args.out)
    return code


# ── bench ──

def cmd_bench(args):
    if args.experiment == "example1":
        grid = {"n": args.n, "M": args.m, "S": args.s}
    else:
        grid = {"n": args.n, "sigma": args.sigma, "k": [args.k]}
    cells = table_cells(args.experiment, grid)
    if not cells:
        raise CliError("the parameter grid has no valid cell")
    spec = BenchSpec(
        experiment=args.experiment,
        cells=cells,
        estimators=tuple(e.replace("-", "_") for e in args.estimators.split(",")),
        replications=args.reps,
        base_seed=args.seed,
        workers=args.workers,
        timing=args.timing,
    )
    report = run_bench(spec, progress=args.verbose)
    if args.out:
        write_report_csv(report, args.out)
        print(f"[CLI] wrote {args.out}", file=sys.stderr)
    else:
        report.to_frame().to_csv(sys.stdout, index=False, float_format="%.10g", lineterminator="\n")
    if args.json:
        write_report_json(report, args.json)
    return EXIT_OK


# ── noise ──

def _noise_model(args):
    return NoiseModel(args.family, args.scale, base=args.base)


def cmd_noise(args):
    model = _noise_model(args)
    if args.action == "check":
        payload = check_assumption_n(model, args.gamma, draws=args.draws, seed=args.seed, bins=args.bins,
                                     verbose=args.verbose)
    else:
        beta_min, t0 = beta_threshold(model)
        payload = {"family": model.family, "scale": model.scale, "beta_min": beta_min,
                   "t0": None if math.isinf(t0) else t0}
        if args.L is not None:
            payload["L"] = args.L
            payload["beta"] = temperature_for_dictionary(model, args.L)
    _emit(payload, args.out)
    return EXIT_OK


# ── bound ──

def cmd_bound(args):
    if args.kind == "soi":
        try:
            with open(args.config, "r") as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read {args.config}: {e}")
        try:
            inputs = SoiInputs.from_dict(raw)
        except TypeError as e:
            raise CliError(f"bad SOI config: {e}")
        payload = {"terms": soi_terms(inputs), "rhs": soi_rhs(inputs), "preconditions": soi_preconditions(inputs)}
    else:
        payload = {"rhs": corollary1_rhs(args.losses, args.beta, args.n),
                   "M": len(args.losses), "beta": args.beta, "n": args.n}
    _emit(payload, args.out)
    return EXIT_OK


def cmd_prior(args):
    payload = heavy_tail_comparison(args.count, args.seed, density_at_origin=args.density)
    if args.csv:
        write_heavy_tail_csv(args.csv, args.count, args.seed, density_at_origin=args.density)
        print(f"[CLI] wrote {args.csv}", file=sys.stderr)
    _emit(payload, args.out)
    return EXIT_OK


# ═══════════════════════════════════════════════════════════
#  Argument parser
# ═══════════════════════════════════════════════════════════

def build_parser():
    parser = argparse.ArgumentParser(prog="cli.py", description="Sparse EWA toolkit")
    parser.add_argument("--seed", type=int, default=0, help="Root seed for every random stream (default 0)")
    parser.add_argument("--verbose", action="store_true", help="Tagged diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    # gen
    p = sub.add_parser("gen", help="Write a simulated dataset")
    p.add_argument("experiment", choices=["example1", "example2"])
    p.add_argument("--n", type=int, default=100, help="Sample size")
    p.add_argument("--m", type=int, default=100, help="Dictionary size (example1)")
    p.add_argument("--s", type=int, default=5, help="Sparsity (example1)")
    p.add_argument("--sigma", type=float, default=1.0, help="Noise level (example2)")
    p.add_argument("--k", type=int, default=15, help="Grid side, M = k^2 (example2)")
    p.add_argument("--out", required=True, help="CSV path; the sidecar goes to <stem>.json")
    p.add_argument("--sample-csv", default=None, help="Also write the sample points z1,z2,y (example2)")
    p.set_defaults(func=cmd_gen)

    # fit
    p = sub.add_parser("fit", help="Fit one estimator")
    p.add_argument("estimator", choices=["ewa", "lasso", "lasso-gauss"])
    p.add_argument("--data", required=True, help="Dataset CSV (y, x1..xM)")
    p.add_argument("--sigma", type=float, default=None, help="Noise level; overrides the sidecar")
    p.add_argument("--beta", type=float, default=None, help="Temperature (default 4 sigma^2)")
    p.add_argument("--tau", type=float, default=None, help="Prior scale (default 4 sigma / sqrt(Tr X'X))")
    p.add_argument("--alpha", type=float, default=0.0, help="Huber damping (default 0)")
    p.add_argument("--step", type=float, default=None, help="Euler step h (default beta / Tr X'X)")
    p.add_argument("--horizon", type=float, default=None, help="Horizon T (default n)")
    p.add_argument("--burn-in", type=float, default=0.0, help="Discarded initial time")
    p.add_argument("--max-restarts", type=int, default=None, help="Step halvings after divergence")
    p.add_argument("--antithetic", action="store_true", help="Negate the Gaussian stream")
    p.add_argument("--trace", default=None, help="Write the thinned chain trace to this CSV")
    p.add_argument("--thin", type=int, default=None, help="Trace thinning interval")
    p.add_argument("--reg-level", type=float, default=None, help="Lasso level (penalty 2r|l|_1, default sigma sqrt(2 log M / n))")
    p.add_argument("--max-sweeps", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=None, help="Ideal Lasso-Gauss grid size")
    p.add_argument("--image-csv", default=None, help="Write the fitted (and true) function on a pixel grid (k*k dictionary)")
    p.add_argument("--image-resolution", type=int, default=100, help="Pixels per side for --image-csv")
    p.add_argument("--out", default=None, help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_fit)

    # bench
    p = sub.add_parser("bench", help="Replicate an experiment")
    p.add_argument("experiment", choices=["example1", "example2"])
    p.add_argument("--n", type=_int_list, default=[100], help="Sample sizes, comma-separated")
    p.add_argument("--m", type=_int_list, default=[100], help="Dictionary sizes (example1)")
    p.add_argument("--s", type=_int_list, default=[5], help="Sparsities (example1)")
    p.add_argument("--sigma", type=_float_list, default=[1.0], help="Noise levels (example2)")
    p.add_argument("--k", type=int, default=15, help="Grid side (example2)")
    p.add_argument("--estimators", default=",".join(ESTIMATORS), help="Subset of ewa,lasso,lasso_gauss")
    p.add_argument("--reps", type=int, default=None, help="Replications per cell")
    p.add_argument("--workers", type=int, default=None, help="Worker processes")
    p.add_argument("--timing", action="store_true", help="Fill the seconds column")
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.add_argument("--json", default=None, help="Also write a JSON report here")
    p.set_defaults(func=cmd_bench)

    # noise
    p = sub.add_parser("noise", help="Noise couplings")
    p.add_argument("action", choices=["check", "threshold"])
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--scale", type=float, default=1.0, help="sigma, or B for bounded")
    p.add_argument("--base", choices=BOUNDED_BASES, default=None, help="Base law for bounded noise")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--L", type=float, default=None, help="Dictionary bound for the temperature rule")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_noise)

    # bound
    p = sub.add_parser("bound", help="Risk-bound calculators")
    p.add_argument("kind", choices=["soi", "corollary1"])
    p.add_argument("--config", default=None, help="SOI inputs JSON (soi)")
    p.add_argument("--losses", type=_float_list, default=None, help="Candidate losses (corollary1)")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bound)

    # prior
    p = sub.add_parser("prior", help="Prior diagnostics")
    p.add_argument("action", choices=["compare"])
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--density", type=float, default=100.0, help="Common density at the origin")
    p.add_argument("--csv", default=None, help="Also write the raw draws, one column per law")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_prior)

    return parser


def _check_args(parser, args):
    if args.command == "bound" and args.kind == "soi" and not args.config:
        parser.error("bound soi needs --config")
    if args.command == "bound" and args.kind == "corollary1" and (
            args.losses is None or args.beta is None or args.n is None):
        parser.error("bound corollary1 needs --losses, --beta and --n")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_args(parser, args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        return args.func(args)
    except CliError as e:
        print(f"[CLI] error: {e}", file=sys.stderr)
    except FileNotFoundError as e:
        print(f"[CLI] error: {e}", file=sys.stderr)
    except ValueError as e:
        print(f"[CLI] error: {e}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
