"""Command line front end.

Verbs: sample, eval, kernels, variance, bound, experiment rate, report.
Configuration comes from a single JSON document (--config); the remaining
flags override individual fields.  Exit codes: 0 on success, 2 on a
configuration or usage error, 3 when a variance degenerates and the
normalized quantity does not exist.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

from .applications import kernel_summaries
from .clt_bounds import BoundReport, geometric_bound, local_bound, wasserstein_bound
from .errors import (
    AssumptionViolationError,
    ConfigError,
    DegenerateFunctionalError,
    LocalityError,
    WindowError,
)
from .harness import (
    ExperimentConfig,
    default_window,
    emit_csv,
    emit_report,
    moment_table,
    rate_experiment,
    run_replicates,
)
from .point_process import LineWindow, sample_lines, sample_points, write_points_csv
from ._streams import spawn_rng
from .ustat_core import evaluate

_CONFIG_FLAGS = ("config", "out", "seed", "replicates", "lam_list", "kernel")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--out", help="output path (CSV or JSON by verb)")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--replicates", type=int, help="override replicates per lambda")
    parser.add_argument("--lambda", dest="lam_list", help="override the lambda grid, e.g. 2,4,8")
    parser.add_argument("--kernel", help="override the kernel name")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poisson-ustats",
        description="Poisson U-statistics: simulation, variances, normal-approximation bounds.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (
        ("sample", "draw one Poisson configuration and write it as CSV"),
        ("eval", "sample a configuration and evaluate the kernel sum on it"),
        ("variance", "formula mean and variance per lambda"),
        ("bound", "normal-approximation bound report at a single lambda"),
    ):
        _add_common(sub.add_parser(verb, help=text))
    sub.add_parser("kernels", help="list registered kernels")
    experiment = sub.add_parser("experiment", help="multi-lambda studies")
    exp_sub = experiment.add_subparsers(dest="experiment_kind", required=True)
    _add_common(exp_sub.add_parser("rate", help="distances, bounds and a log-log rate fit"))
    report = sub.add_parser("report", help="validate and summarize a saved bound report")
    report.add_argument("path", help="path to a bound-report JSON file")
    return parser


def _parse_lambdas(text: str) -> tuple:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad lambda list {text!r}: {exc}") from exc


def _load_config(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        config = ExperimentConfig.from_json(text)
    else:
        if not args.kernel:
            raise ConfigError("need --config or --kernel")
        config = ExperimentConfig(
            kernel=args.kernel,
            window=default_window(args.kernel),
            lambdas=(1.0,),
            replicates=200,
        )
    updates = {}
    if args.kernel:
        updates["kernel"] = args.kernel
        if not args.config:
            updates["window"] = default_window(args.kernel)
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.replicates is not None:
        updates["replicates"] = args.replicates
    if args.lam_list:
        updates["lambdas"] = _parse_lambdas(args.lam_list)
    return replace(config, **updates) if updates else config


def _draw(config: ExperimentConfig, lam: float):
    rng = spawn_rng(config.seed, 0, 0)
    intensity = config.intensity(lam)
    if isinstance(config.window, LineWindow):
        return sample_lines(intensity, rng)
    return sample_points(intensity, rng)


def _cmd_sample(args) -> int:
    config = _load_config(args)
    sample = _draw(config, config.lambdas[0])
    if args.out:
        write_points_csv(sample, args.out)
        print(f"wrote {sample.size} points to {args.out}")
    else:
        header = "phi,p" if sample.kind == "lines" else ",".join(
            f"x{i + 1}" for i in range(sample.dim)
        )
        print(header)
        for row in sample.points:
            print(",".join(f"{v:.17g}" for v in row))
    return 0


def _cmd_eval(args) -> int:
    config = _load_config(args)
    kernel = config.resolve_kernel()
    lam = config.lambdas[0]
    kern = kernel if kernel.intensity_factor is None else kernel.at_intensity(lam)
    sample = _draw(config, lam)
    value = evaluate(kern, sample)
    print(f"lambda={lam:g} points={sample.size} value={value:.17g}")
    return 0


def _cmd_kernels(_args) -> int:
    for name, text in kernel_summaries().items():
        print(f"{name}: {text}")
    return 0


def _cmd_variance(args) -> int:
    config = _load_config(args)
    rows = moment_table(config)
    lines = ["lambda,mean,variance,variance_se"]
    for lam, mean, var in rows:
        lines.append(f"{lam:.17g},{mean:.17g},{var.value:.17g},{var.se:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"writing {args.out}: {exc}") from exc
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_bound(args) -> int:
    config = _load_config(args)
    if len(config.lambdas) != 1:
        raise ConfigError(f"bound needs exactly one lambda, got {len(config.lambdas)}")
    kernel = config.resolve_kernel()
    intensity = config.intensity(config.lambdas[0])
    if kernel.locality is not None:
        report = local_bound(kernel, intensity, config.integrator, c_k=config.c_k)
    elif kernel.geometric:
        report = geometric_bound(kernel, intensity, config.integrator)
    else:
        report = wasserstein_bound(kernel, intensity, config.integrator)
    if args.out:
        emit_report(report, args.out)
        print(f"wrote {report.mode} report to {args.out}")
    else:
        print(report.to_json())
    return 0


def _cmd_rate(args) -> int:
    config = _load_config(args)
    fit = rate_experiment(config)
    out = args.out or config.rates_path
    if out:
        emit_csv(fit, out)
        print(f"wrote {len(fit.lambdas)} rows to {out}")
    else:
        print("lambda,d_w,d_k,bound,ratio")
        for lam, dw, dk, b, ratio in zip(fit.lambdas, fit.d_w, fit.d_k, fit.bounds, fit.ratios):
            print(f"{lam:.17g},{dw:.17g},{dk:.17g},{b:.17g},{ratio:.17g}")
    if config.records_path:
        emit_csv(run_replicates(config), config.records_path)
        print(f"wrote records to {config.records_path}")
    print(f"slope={fit.slope:.6g} se={fit.slope_se:.6g} intercept={fit.intercept:.6g}")
    return 0


def _cmd_report(args) -> int:
    try:
        with open(args.path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read report {args.path}: {exc}") from exc
    report = BoundReport.from_json(text)
    print(f"mode: {report.mode}")
    print(f"order k: {report.k}")
    print(f"lambda: {report.lam:g}")
    print(f"variance: {report.variance:.6g} (se {report.variance_se:.3g})")
    for term in report.m:
        print(f"M[{term.i},{term.j}]: {term.value:.6g} (se {term.se:.3g})")
    if report.vtilde is not None:
        print(f"vtilde: {report.vtilde:.6g}")
    if report.b_delta is not None:
        print(f"b(delta): {report.b_delta:.6g}")
    if report.c_k is not None:
        print(f"c_k: {report.c_k:.6g}")
    print(f"bound: {report.bound:.6g}")
    print("report is valid")
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "sample": _cmd_sample,
        "eval": _cmd_eval,
        "kernels": _cmd_kernels,
        "variance": _cmd_variance,
        "bound": _cmd_bound,
        "experiment": _cmd_rate,
        "report": _cmd_report,
    }
    try:
        return handlers[args.verb](args)
    except (ConfigError, WindowError, LocalityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateFunctionalError, AssumptionViolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
