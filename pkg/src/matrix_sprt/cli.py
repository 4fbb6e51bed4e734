"""Command line: ``matrix-sprt run`` and ``matrix-sprt predict``.

Exit status: 0 ok, 1 a bound check failed or a trial was invalid, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Any, Sequence

import numpy as np

from .asymptotics import PsiSpec, SeparabilityError, predict_ess, worst_point
from .config import ConfigError, build_layout, build_model, build_plan, dump_normalized, load_config
from .core import ConfigurationError
from .models import ArMeanModel, UnknownVarianceModel
from .montecarlo import ERROR_COLUMNS, MOMENT_COLUMNS, bound_check, default_workers, run_experiment

EXIT_OK, EXIT_BOUND, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matrix-sprt", description="Matrix sequential tests and their Monte Carlo checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="experiment configuration (YAML or JSON)")
        p.add_argument("--dump-normalized", action="store_true", help="print the validated configuration and exit")

    run = sub.add_parser("run", help="run the Monte Carlo experiment and check the error bounds")
    common(run)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--workers", type=int, help="worker processes (default: $MATRIX_SPRT_WORKERS or 1)")
    run.add_argument("--out-dir")
    run.add_argument("--format", choices=("csv", "json"))

    predict = sub.add_parser("predict", help="print first-order sample-size predictions")
    common(predict)
    predict.add_argument("--theta", action="append", default=[],
                         help="parameter point, comma-separated for vectors; repeatable (default: the config's truths)")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for flag, path in (("seed", "experiment.seed"), ("trials", "experiment.trials"), ("workers", "experiment.workers"),
                       ("out_dir", "output.dir"), ("format", "output.format")):
        value = getattr(args, flag, None)
        if value is not None:
            out[path] = value
    return out


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_tables(report, cfg: dict) -> list[str]:
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    name = cfg["name"]
    written = []
    path = os.path.join(out_dir, f"{name}_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, allow_nan=True)
    written.append(path)
    if cfg["output"]["format"] == "csv":
        for suffix, columns, rows in (("errors", ERROR_COLUMNS, report.error_rows()),
                                      ("moments", MOMENT_COLUMNS, report.moment_rows())):
            path = os.path.join(out_dir, f"{name}_{suffix}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=columns)
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
            written.append(path)
    else:
        path = os.path.join(out_dir, f"{name}_table.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"errors": report.error_rows(), "moments": report.moment_rows()}, fh, indent=2)
        written.append(path)
    return written


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.dump_normalized:
        sys.stdout.write(dump_normalized(cfg))
        return EXIT_OK
    plan = build_plan(cfg, workers=default_workers())
    report = run_experiment(plan)
    cells = bound_check(report)
    for cell in cells:
        status = "pass" if cell.passed else "FAIL"
        print(f"{status} point {cell.point_id} theta={list(cell.theta)} alpha[{cell.i}][{cell.j}]: "
              f"hat={cell.alpha_hat:.5f} wilson=[{cell.wilson_lo:.5f}, {cell.wilson_hi:.5f}] bound={cell.bound:.5f}")
    for p in report.points:
        ess = p.moments[plan.orders[0]]
        print(f"point {p.index} theta={list(p.theta)} ({p.location}): E[T]={_fmt(ess[0])} se={_fmt(ess[1])} "
              f"predicted={_fmt(p.predicted[plan.orders[0]])} censored={p.censored} invalid={p.invalid}")
    for path in _write_tables(report, cfg):
        print(f"wrote {path}")
    ok = all(c.passed for c in cells) and report.invalid == 0
    return EXIT_OK if ok else EXIT_BOUND


def _parse_theta(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError("--theta", f"cannot parse {text!r} as numbers") from None


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.dump_normalized:
        sys.stdout.write(dump_normalized(cfg))
        return EXIT_OK
    plan = build_plan(cfg)
    model = build_model(cfg)
    layout = build_layout(cfg, model)
    psi = plan.psi or model.psi
    thetas = [_parse_theta(t) for t in args.theta] or [list(t) for t in plan.truths]
    orders = plan.orders
    print("theta\tregion\t" + "\t".join(f"r={r}" for r in orders))
    status = EXIT_OK
    for th in thetas:
        try:
            model.check_parameter(th)
            pred = predict_ess(layout, plan.error_budget, model, psi, th, orders)
            cols = [f"{pred.moments[r]:.6g}" for r in orders]
            print(f"{th}\t{pred.location}\t" + "\t".join(cols))
        except (SeparabilityError, ValueError) as exc:
            print(f"{th}\t{layout.label(th) if len(th) == layout.dim else '-'}\tseparability: {exc}")
            status = EXIT_BOUND
    _print_worst_point(cfg, model, plan.error_budget.alpha, psi)
    return status


def _print_worst_point(cfg: dict, model, alpha: np.ndarray, psi: PsiSpec) -> None:
    if "two_sided" not in cfg["hypotheses"]:
        return
    lower, upper = cfg["hypotheses"]["two_sided"]
    a0, a1 = float(alpha[0, 1]), float(alpha[1, 0])
    if isinstance(model, ArMeanModel):
        print(f"theta* = {worst_point('ar_mean', lower, upper, a0, a1):.10g}")
    elif isinstance(model, UnknownVarianceModel):
        # q = mu / sigma; the q-boundaries are mu0, mu1 at unit scale
        print(f"q* = {worst_point('unknown_variance', lower, upper, a0, a1):.10g} (sigma = 1)")


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_predict(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
