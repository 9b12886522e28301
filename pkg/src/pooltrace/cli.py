"""Command-line front end.

Subcommands:

* ``design``   - optimal pool sizes and analytic expectations for a scenario.
* ``evaluate`` - analytic expectations for an explicitly given design.
* ``simulate`` - paired Monte-Carlo comparison against the baseline.
* ``sweep``    - batches of paired experiments over parameter axes, emitted
  as CSV (or JSON) with one row per (sweep point, method).

Sweep points are independent; the ``POOLTRACE_THREADS`` environment variable
caps how many worker processes evaluate them (0 or unset picks the CPU
count). Rows are buffered and written in sweep-definition order, so output
is byte-identical regardless of worker count.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .cost import (
    ModelParams,
    PenaltyWeights,
    build_cost_table_from_prior,
    build_cost_table_independent,
)
from .dist import build_truncated_prior
from .errors import ParameterError, PoolTraceError
from .optimizer import PoolDesign, optimal_design
from .sim import SAVINGS_PERCENTILES, ExperimentSummary, paired_designs, run_paired_experiment

DEFAULT_REPLICATES = 100_000
DEFAULT_SEED = 1

CSV_COLUMNS = (
    "N",
    "r",
    "k",
    "s_e",
    "s_p",
    "lambda1",
    "lambda2",
    "method",
    "mean_tests_per_contact",
    "mean_pool_size",
    "fn_rate",
    "fp_rate",
    *[f"savings_p{p}" for p in SAVINGS_PERCENTILES],
    "replicates",
    "seed",
)


def format_real(value: float) -> str:
    """Canonical serialization of reals: 17 significant digits, '.' decimal
    separator, lossless for doubles."""
    return format(float(value), ".17g")


def _fmt(value: float) -> str:
    """Human-oriented number formatting for terminal output."""
    return format(float(value), ".6g")


# ---------------------------------------------------------------------------
# sweep configuration


@dataclass(frozen=True)
class SweepPoint:
    params: ModelParams
    weights: PenaltyWeights


@dataclass(frozen=True)
class ExperimentConfig:
    """A product sweep parsed from a flat key=value config file."""

    n_values: tuple[int, ...]
    r_values: tuple[float, ...]
    k_values: tuple[float, ...]
    lambda1_values: tuple[float, ...]
    lambda2_values: tuple[float, ...]
    s_e: float
    s_p: float
    replicates: int = DEFAULT_REPLICATES
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        for name in ("n_values", "r_values", "k_values", "lambda1_values", "lambda2_values"):
            if not getattr(self, name):
                raise ParameterError(f"sweep axis {name} must be non-empty")
        if self.replicates < 1:
            raise ParameterError(f"replicates must be >= 1, got {self.replicates}")

    def points(self) -> list[SweepPoint]:
        out = []
        for n, r, k, lam1, lam2 in itertools.product(
            self.n_values, self.r_values, self.k_values, self.lambda1_values, self.lambda2_values
        ):
            out.append(
                SweepPoint(
                    params=ModelParams(n=n, r=r, k=k, s_e=self.s_e, s_p=self.s_p),
                    weights=PenaltyWeights(lambda1=lam1, lambda2=lam2),
                )
            )
        return out


_CONFIG_KEYS = {
    "n": ("n_values", int),
    "r": ("r_values", float),
    "k": ("k_values", float),
    "lambda1": ("lambda1_values", float),
    "lambda2": ("lambda2_values", float),
    "se": ("s_e", float),
    "sp": ("s_p", float),
    "replicates": ("replicates", int),
    "seed": ("seed", int),
}
_LIST_KEYS = {"n", "r", "k", "lambda1", "lambda2"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat key=value sweep config; list axes are comma-separated."""
    values: dict = {
        "lambda1_values": (0.0,),
        "lambda2_values": (0.0,),
        "s_e": 0.95,
        "s_p": 0.95,
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, payload = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        field, cast = _CONFIG_KEYS[key]
        tokens = [tok.strip() for tok in payload.split(",")] if key in _LIST_KEYS else [payload.strip()]
        try:
            parsed = tuple(cast(tok) for tok in tokens)
        except ValueError as exc:
            raise ParameterError(f"config line {lineno}: {exc}") from exc
        values[field] = parsed if key in _LIST_KEYS else parsed[0]
    for required in ("n_values", "r_values", "k_values"):
        if required not in values:
            raise ParameterError(f"config is missing the {required.split('_')[0]!r} axis")
    return ExperimentConfig(**values)


def preset_points(name: str) -> list[SweepPoint]:
    """The three built-in experiment families.

    ``fig1`` varies the contact count at the early-pandemic estimates
    r = 2.5, k = 0.1; ``fig2`` spans a reproduction/dispersion grid at three
    contact counts; ``fig3`` traces the penalty trade-offs at N = 100,
    varying one penalty weight at a time. Axis values for fig2/fig3 are
    representative choices, not externally mandated.
    """
    se = sp = 0.95
    if name == "fig1":
        return ExperimentConfig(
            n_values=(5, 10, 20, 50, 100, 200),
            r_values=(2.5,),
            k_values=(0.1,),
            lambda1_values=(0.0,),
            lambda2_values=(0.0,),
            s_e=se,
            s_p=sp,
        ).points()
    if name == "fig2":
        return ExperimentConfig(
            n_values=(20, 100, 200),
            r_values=(0.5, 1.0, 2.5, 5.0),
            k_values=(0.05, 0.1, 0.5, 1.0, 10.0),
            lambda1_values=(0.0,),
            lambda2_values=(0.0,),
            s_e=se,
            s_p=sp,
        ).points()
    if name == "fig3":
        params = ModelParams(n=100, r=2.5, k=0.1, s_e=se, s_p=sp)
        lam1_axis = [PenaltyWeights(lambda1=v, lambda2=0.0) for v in (0.0, 1.0, 5.0, 25.0, 125.0)]
        lam2_axis = [PenaltyWeights(lambda1=0.0, lambda2=v) for v in (1.0, 5.0, 25.0, 125.0, 625.0)]
        return [SweepPoint(params=params, weights=w) for w in lam1_axis + lam2_axis]
    raise ParameterError(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# sweep execution


def _summary_rows(summary: ExperimentSummary) -> list[dict]:
    params, weights = summary.params, summary.weights
    rows = []
    for method, stats in (("ours", summary.ours), ("baseline", summary.baseline)):
        row = {
            "N": params.n,
            "r": params.r,
            "k": params.k,
            "s_e": params.s_e,
            "s_p": params.s_p,
            "lambda1": weights.lambda1,
            "lambda2": weights.lambda2,
            "method": method,
            "mean_tests_per_contact": stats.mean_tests_per_contact,
            "mean_pool_size": stats.mean_pool_size,
            "fn_rate": stats.fn_rate,
            "fp_rate": stats.fp_rate,
            "replicates": summary.replicates,
            "seed": summary.seed,
        }
        for p in SAVINGS_PERCENTILES:
            row[f"savings_p{p}"] = summary.savings_quantiles[p]
        rows.append(row)
    return rows


def _point_rows(task: tuple[SweepPoint, int, int]) -> list[dict]:
    point, replicates, seed = task
    _, summary = run_paired_experiment(point.params, point.weights, replicates, seed)
    return _summary_rows(summary)


def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get("POOLTRACE_THREADS", "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError as exc:
        raise ParameterError(f"POOLTRACE_THREADS must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise ParameterError(f"POOLTRACE_THREADS must be >= 0, got {requested}")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, n_tasks))


def run_sweep(points: Sequence[SweepPoint], replicates: int, seed: int) -> list[dict]:
    """Evaluate sweep points (possibly in parallel) and return ordered rows."""
    tasks = [(point, replicates, seed) for point in points]
    workers = _worker_count(len(tasks))
    if workers == 1:
        results = [_point_rows(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point_rows, tasks))
    return [row for rows in results for row in rows]


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        raise ParameterError("boolean cells are not part of the schema")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    return str(value)


def write_rows_csv(rows: Iterable[dict], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_csv_cell(row[col]) for col in CSV_COLUMNS])


def write_rows_json(rows: list[dict], stream: TextIO) -> None:
    json.dump(rows, stream, indent=2)
    stream.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def _design_block(
    label: str, sizes: tuple[int, ...], tests: float, fneg: float, fpos: float, objective: float
) -> str:
    lines = [
        f"{label}:",
        f"  pools: {' '.join(str(s) for s in sizes)}",
        f"  expected tests: {_fmt(tests)}",
        f"  expected false negatives: {_fmt(fneg)}",
        f"  expected false positives: {_fmt(fpos)}",
        f"  objective: {_fmt(objective)}",
    ]
    return "\n".join(lines)


def _design_payload(params: ModelParams, weights: PenaltyWeights, compare: bool) -> list[dict]:
    """Analytic design report; expectations and objective are always evaluated
    under the overdispersed contact model, including for the baseline design,
    so the two blocks are directly comparable."""
    prior = build_truncated_prior(params.negbin(), params.n)
    tc = params.tc()
    table = build_cost_table_from_prior(prior, tc, weights)
    ours = optimal_design(table)
    entries = [("ours", ours)]
    if compare:
        baseline = optimal_design(
            build_cost_table_independent(params.n, prior.mean / params.n, tc, weights)
        )
        entries.append(("baseline", baseline))
    payload = []
    for method, design in entries:
        payload.append(
            {
                "method": method,
                "pools": list(design.sizes),
                "expected_tests": float(sum(table.tests[s] for s in design.sizes)),
                "expected_false_negatives": float(sum(table.fneg[s] for s in design.sizes)),
                "expected_false_positives": float(sum(table.fpos[s] for s in design.sizes)),
                "objective": float(sum(table.objective[s] for s in design.sizes)),
            }
        )
    return payload


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_design(args: argparse.Namespace) -> int:
    params = ModelParams(n=args.n, r=args.r, k=args.k, s_e=args.se, s_p=args.sp)
    weights = PenaltyWeights(lambda1=args.lambda1, lambda2=args.lambda2)
    payload = _design_payload(params, weights, args.compare)
    if args.format == "json":
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        blocks = [
            _design_block(
                entry["method"],
                tuple(entry["pools"]),
                entry["expected_tests"],
                entry["expected_false_negatives"],
                entry["expected_false_positives"],
                entry["objective"],
            )
            for entry in payload
        ]
        _emit("\n".join(blocks) + "\n", args.out)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        sizes = tuple(sorted((int(tok) for tok in args.pools.split(",")), reverse=True))
    except ValueError as exc:
        raise ParameterError(f"--pools must be comma-separated integers: {exc}") from exc
    total = sum(sizes)
    params = ModelParams(n=total, r=args.r, k=args.k, s_e=args.se, s_p=args.sp)
    weights = PenaltyWeights(lambda1=args.lambda1, lambda2=args.lambda2)
    prior = build_truncated_prior(params.negbin(), total)
    table = build_cost_table_from_prior(prior, params.tc(), weights)
    tests = float(sum(table.tests[s] for s in sizes))
    fneg = float(sum(table.fneg[s] for s in sizes))
    fpos = float(sum(table.fpos[s] for s in sizes))
    objective = float(sum(table.objective[s] for s in sizes))
    PoolDesign(sizes=sizes, total=total, objective_value=objective)  # validates the sizes
    if args.format == "json":
        payload = {
            "pools": list(sizes),
            "n": total,
            "expected_tests": tests,
            "expected_false_negatives": fneg,
            "expected_false_positives": fpos,
            "objective": objective,
        }
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _emit(_design_block("design", sizes, tests, fneg, fpos, objective) + "\n", args.out)
    return 0


def _summary_text(summary: ExperimentSummary) -> str:
    lines = [f"replicates: {summary.replicates}", f"seed: {summary.seed}"]
    for label, stats in (("ours", summary.ours), ("baseline", summary.baseline)):
        lines += [
            f"{label}:",
            f"  pools: {' '.join(str(s) for s in stats.design.sizes)}",
            f"  mean tests per contact: {_fmt(stats.mean_tests_per_contact)}",
            f"  mean pool size: {_fmt(stats.mean_pool_size)}",
            f"  fn rate: {_fmt(stats.fn_rate)}",
            f"  fp rate: {_fmt(stats.fp_rate)}",
        ]
    lines.append(f"savings mean: {_fmt(summary.savings_mean)}")
    quantiles = " ".join(
        f"p{p}={_fmt(summary.savings_quantiles[p])}" for p in SAVINGS_PERCENTILES
    )
    lines.append(f"savings quantiles: {quantiles}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args: argparse.Namespace) -> int:
    params = ModelParams(n=args.n, r=args.r, k=args.k, s_e=args.se, s_p=args.sp)
    weights = PenaltyWeights(lambda1=args.lambda1, lambda2=args.lambda2)
    _, summary = run_paired_experiment(params, weights, args.replicates, args.seed)
    if args.format == "json":
        rows = _summary_rows(summary)
        payload = {
            "rows": rows,
            "savings_mean": summary.savings_mean,
            "ours_pools": list(summary.ours.design.sizes),
            "baseline_pools": list(summary.baseline.design.sizes),
        }
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _emit(_summary_text(summary), args.out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if (args.preset is None) == (args.config is None):
        raise ParameterError("sweep needs exactly one of --preset or --config")
    replicates = args.replicates if args.replicates is not None else DEFAULT_REPLICATES
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    if args.preset is not None:
        points = preset_points(args.preset)
    else:
        config = parse_config(Path(args.config).read_text())
        points = config.points()
        if args.replicates is None:
            replicates = config.replicates
        if args.seed is None:
            seed = config.seed
    rows = run_sweep(points, replicates, seed)
    if args.out is None:
        if args.format == "json":
            write_rows_json(rows, sys.stdout)
        else:
            write_rows_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as stream:
            if args.format == "json":
                write_rows_json(rows, stream)
            else:
                write_rows_csv(rows, stream)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_model_flags(parser: argparse.ArgumentParser, with_n: bool = True) -> None:
    if with_n:
        parser.add_argument("--n", type=int, required=True, help="number of contacts")
    parser.add_argument("--r", type=float, required=True, help="mean secondary infections")
    parser.add_argument("--k", type=float, required=True, help="dispersion parameter")
    parser.add_argument("--se", type=float, default=0.95, help="test sensitivity")
    parser.add_argument("--sp", type=float, default=0.95, help="test specificity")
    parser.add_argument("--lambda1", type=float, default=0.0, help="false-negative penalty")
    parser.add_argument("--lambda2", type=float, default=0.0, help="false-positive penalty")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pooltrace",
        description="Optimal pooled-testing designs for traced contacts under overdispersion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="compute the optimal design and expectations")
    _add_model_flags(p_design)
    p_design.add_argument("--compare", action="store_true", help="also show the baseline design")
    p_design.add_argument("--format", choices=("text", "json"), default="text")
    p_design.add_argument("--out", default=None, help="write output to this path")
    p_design.set_defaults(func=cmd_design)

    p_eval = sub.add_parser("evaluate", help="expectations for an explicit design")
    p_eval.add_argument("--pools", required=True, help="comma-separated pool sizes, e.g. 5,5,5,5")
    _add_model_flags(p_eval, with_n=False)
    p_eval.add_argument("--format", choices=("text", "json"), default="text")
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sim = sub.add_parser("simulate", help="paired Monte-Carlo comparison")
    _add_model_flags(p_sim)
    p_sim.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    p_sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sim.add_argument("--format", choices=("text", "json"), default="text")
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run an experiment family, emit CSV/JSON")
    p_sweep.add_argument("--preset", choices=("fig1", "fig2", "fig3"), default=None)
    p_sweep.add_argument("--config", default=None, help="key=value sweep config file")
    p_sweep.add_argument("--replicates", type=int, default=None, help="override replicate count")
    p_sweep.add_argument("--seed", type=int, default=None, help="override master seed")
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.add_argument("--out", default=None, help="output path (stdout when omitted)")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PoolTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
