"""Batch command-line interface.

Subcommands: ``simulate`` writes seeded synthetic datasets, ``fit``
estimates a discriminant from a labeled CSV, ``predict`` applies a saved
model to new curves, and ``bench`` runs the Monte Carlo comparison.

Exit codes: 0 on success, 1 for validation or usage errors, 2 for
numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .discriminant import error_rate, gplda_fit, mle_lda_fit, pca_lda_fit, pda_fit, predict
from .exceptions import NumericError, ValidationError
from .io import (
    RunConfig,
    atomic_write_text,
    format_config,
    load_config,
    load_csv,
    load_model,
    read_labeled_csv,
    save_dataset_csv,
    save_model,
)
from .linalg import FIRST_DIFF, LAPLACIAN_2D, SECOND_DIFF, build_penalty
from .model import FitConfig
from .simulate import SimSpec, generate, normalize_method, run_benchmark, select_pda_alpha

UNLABELED = "?"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exit code 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="gplda", add_help=True)
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument(
        "--print-config",
        action="store_true",
        help="print the effective configuration and exit",
    )
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="generate a seeded synthetic dataset pair")
    sim.add_argument("--which", choices=("sim1", "sim2"))
    sim.add_argument("--n-train", type=int, default=50)
    sim.add_argument("--n-test", type=int, default=200)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", help="output path prefix for the two CSV files")

    fit_cmd = sub.add_parser("fit", help="fit a discriminant model from a CSV")
    fit_cmd.add_argument("--data", help="labeled-curve CSV path")
    fit_cmd.add_argument("--header", action="store_true", help="CSV has a header row")
    fit_cmd.add_argument("--method", choices=("gplda", "pda", "mle", "pca-lda"))
    fit_cmd.add_argument("--penalty", help="d1, d2, or lap2d:ROWSxCOLS")
    fit_cmd.add_argument("--alpha", help="penalty weight for pda, or 'cv'")
    fit_cmd.add_argument("--k", type=int, help="number of discriminant directions")
    fit_cmd.add_argument("--seed", type=int)
    fit_cmd.add_argument("--out", help="model file path")

    pred = sub.add_parser("predict", help="apply a saved model to curves in a CSV")
    pred.add_argument("--model", help="model file written by fit")
    pred.add_argument("--data", help="labeled-curve CSV path; labels '?' mean unknown")
    pred.add_argument("--header", action="store_true", help="CSV has a header row")
    pred.add_argument("--out", help="output CSV of predicted labels")

    bench = sub.add_parser("bench", help="run the simulation benchmark")
    bench.add_argument("--reps", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--out", help="report CSV path")
    return parser


def _effective_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "method", None):
        overrides["method"] = args.method
    if getattr(args, "k", None) is not None:
        overrides["k"] = args.k
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "data", None):
        overrides["data"] = args.data
    if getattr(args, "out", None):
        overrides["out"] = args.out
    if getattr(args, "alpha", None):
        overrides["pda_alpha"] = (
            "cv" if args.alpha == "cv" else float(args.alpha)
        )
    if getattr(args, "reps", None) is not None:
        overrides["bench_reps"] = args.reps
    penalty_arg = getattr(args, "penalty", None)
    if penalty_arg:
        kind, grid = _parse_penalty_flag(penalty_arg)
        overrides["penalty_kind"] = kind
        overrides["penalty_grid"] = grid
    return replace(config, **overrides) if overrides else config


def _parse_penalty_flag(value: str):
    if value in (FIRST_DIFF, SECOND_DIFF):
        return value, None
    if value.startswith(LAPLACIAN_2D + ":"):
        spec = value[len(LAPLACIAN_2D) + 1 :]
        parts = spec.lower().split("x")
        if len(parts) != 2:
            raise ValidationError(
                f"--penalty {value!r}: expected {LAPLACIAN_2D}:ROWSxCOLS"
            )
        try:
            return LAPLACIAN_2D, (int(parts[0]), int(parts[1]))
        except ValueError:
            raise ValidationError(
                f"--penalty {value!r}: grid dimensions must be integers"
            ) from None
    raise ValidationError(
        f"--penalty {value!r}: expected d1, d2, or {LAPLACIAN_2D}:ROWSxCOLS"
    )


def _resolve_penalty(config: RunConfig, method: str, p: int):
    kind = config.penalty_kind
    if kind == "auto":
        kind = SECOND_DIFF if method == "pda" else FIRST_DIFF
    if kind == LAPLACIAN_2D:
        if config.penalty_grid is None:
            raise ValidationError(
                "penalty.kind lap2d needs penalty.grid = ROWSxCOLS"
            )
        rows, cols = config.penalty_grid
        if rows * cols != p:
            raise ValidationError(
                f"penalty grid {rows}x{cols} covers {rows * cols} points, data has p={p}"
            )
        return build_penalty(kind, (rows, cols))
    return build_penalty(kind, p)


def _cmd_simulate(args) -> int:
    config = _effective_config(args)
    which = args.which or config.bench_which
    prefix = config.out or f"{which}_seed{config.seed}"
    spec = SimSpec(
        which=which,
        n_train=args.n_train,
        n_test=args.n_test,
        seed=config.seed,
    )
    train, test = generate(spec)
    train_path = f"{prefix}_train.csv"
    test_path = f"{prefix}_test.csv"
    save_dataset_csv(train_path, train)
    save_dataset_csv(test_path, test)
    print(f"wrote {train_path} ({train.n} curves) and {test_path} ({test.n} curves)")
    return 0


def _trace_payload(trace) -> dict:
    return {
        "sweeps_run": trace.sweeps_run,
        "converged": trace.converged,
        "log_posterior_initial": trace.log_posterior_per_sweep[0],
        "log_posterior_final": trace.log_posterior_per_sweep[-1],
        "final_residuals": trace.final_residuals.as_dict(),
    }


def _cmd_fit(args) -> int:
    config = _effective_config(args)
    if not config.data:
        raise ValidationError("fit needs --data (or data = ... in the config)")
    if not config.out:
        raise ValidationError("fit needs --out (or out = ... in the config)")
    dataset = load_csv(config.data, has_header=args.header)
    method = config.method
    trace = None
    if method == "gplda":
        penalty = _resolve_penalty(config, method, dataset.p)
        fit_config = FitConfig(
            penalty=penalty,
            max_sweeps=config.max_sweeps,
            rel_tol=config.rel_tol,
            jitter_scale=config.jitter_scale,
        )
        model, trace = gplda_fit(
            dataset, hyper=config.hyper, config=fit_config, k=config.k
        )
    elif method == "pda":
        penalty = _resolve_penalty(config, method, dataset.p)
        alpha = config.pda_alpha
        if alpha == "cv":
            alpha = select_pda_alpha(dataset, penalty, seed=config.seed)
            print(f"cross-validated alpha = {alpha}")
        model = pda_fit(dataset, penalty, float(alpha), k=config.k)
    elif method == "mle":
        ridge = None if config.mle_ridge == "auto" else float(config.mle_ridge)
        model = mle_lda_fit(dataset, k=config.k, ridge=ridge)
    elif method == "pca-lda":
        ridge = None if config.mle_ridge == "auto" else float(config.mle_ridge)
        model = pca_lda_fit(dataset, q=config.pca_q, k=config.k, ridge=ridge)
    else:
        raise ValidationError(
            f"unknown method {method!r}; expected gplda, pda, mle, or pca-lda"
        )
    save_model(config.out, model)
    for note in model.warnings:
        print(f"note: {note}")
    if trace is not None:
        atomic_write_text(
            config.out + ".trace", json.dumps(_trace_payload(trace), indent=1) + "\n"
        )
        status = "converged" if trace.converged else "stopped"
        print(
            f"{status} after {trace.sweeps_run} sweeps, "
            f"objective {trace.log_posterior_per_sweep[-1]:.6f}"
        )
    print(f"wrote {config.out} ({model.method_tag}, k={model.k})")
    return 0


def _cmd_predict(args) -> int:
    if not args.model:
        raise ValidationError("predict needs --model")
    if not args.data:
        raise ValidationError("predict needs --data")
    model = load_model(args.model)
    labels, values = read_labeled_csv(args.data, has_header=args.header)
    predicted = predict(model, values)
    predicted_text = [str(p) for p in np.atleast_1d(predicted)]
    if args.out:
        atomic_write_text(args.out, "\n".join(predicted_text) + "\n")
        print(f"wrote {args.out} ({len(predicted_text)} labels)")
    else:
        for label in predicted_text:
            print(label)
    if all(label != UNLABELED and label != "" for label in labels):
        truth = [str(label) for label in labels]
        rate = error_rate(np.asarray(predicted_text), np.asarray(truth))
        print(f"error rate: {rate:.6f}")
    return 0


def _cmd_bench(args) -> int:
    config = _effective_config(args)
    options = {
        "GPLDA": {
            "hyper": config.hyper,
            "max_sweeps": config.max_sweeps,
            "rel_tol": config.rel_tol,
            "jitter_scale": config.jitter_scale,
            "k": config.k,
        },
        "PDA": {"alpha": config.pda_alpha, "k": config.k},
        "MLE_LDA": {
            "ridge": None if config.mle_ridge == "auto" else float(config.mle_ridge),
            "k": config.k,
        },
        "PCA_LDA": {"q": config.pca_q, "k": config.k},
    }
    report = run_benchmark(
        which=config.bench_which,
        methods=[normalize_method(m) for m in config.bench_methods],
        n_values=config.bench_n_values,
        reps=config.bench_reps,
        base_seed=config.seed,
        n_test=config.bench_n_test,
        options=options,
    )
    table = report.to_csv()
    out = config.out or "report.csv"
    atomic_write_text(out, table)
    atomic_write_text(
        out + ".summary.json", json.dumps(report.to_summary(), indent=1) + "\n"
    )
    sys.stdout.write(table)
    print(f"wrote {out} and {out}.summary.json")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "bench": _cmd_bench,
}


def cli_dispatch(argv) -> int:
    """Run one CLI invocation and return its exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:
        # argparse exits directly for --help; preserve its code.
        return int(exc.code or 0)
    try:
        if args.print_config:
            print(format_config(_effective_config(args)), end="")
            return 0
        if args.command is None:
            print(parser.format_usage(), file=sys.stderr, end="")
            return 1
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
