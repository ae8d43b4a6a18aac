"""Command-line harness: measure-costs, falsify, validate, report.

Exit codes: 0 on success, 2 on configuration/validation errors, 3 on runtime
failures. Log verbosity comes from the MFFALSIFY_LOG environment variable.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from .cost_model import save_cost_table
from .errors import FalsifyError, InvalidInputError, SimulationError
from .experiment import (
    build_stack,
    load_experiment_config,
    run_cost_measurement,
    run_matrix,
    validate_runs,
)
from .report import build_report, load_summaries, write_report_csvs

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _setup_logging():
    level = os.environ.get("MFFALSIFY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(message)s")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Multi-fidelity falsification experiment harness."""
    _setup_logging()


@main.command("measure-costs")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_measure_costs(config_path, out_dir):
    """Measure the simulator cost table and write costs.json."""
    try:
        doc = load_experiment_config(config_path)
        stack = build_stack(doc["environment"])
    except InvalidInputError as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        table = run_cost_measurement(doc, stack)
    except SimulationError as exc:
        _fail(EXIT_RUNTIME, f"simulator failure (fidelity {exc.fidelity}): {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_cost_table(table, out / "costs.json")
    click.echo(f"wrote {out / 'costs.json'}")
    for i, (lam, t) in enumerate(zip(table.lambdas, table.timing_stats), start=1):
        sim = table.similarity_stats[i - 1]
        click.echo(f"  fidelity {i}: lambda={lam:.4g}  mean_time={t * 1e3:.3f} ms  similarity={sim:.4f}")
    if table.ordering_warning:
        click.echo("  warning: measured costs are not monotone in fidelity", err=True)


@main.command("falsify")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jobs", default=1, show_default=True, type=int, help="Parallel (method, seed) cells.")
@click.option("--seed-offset", default=0, show_default=True, type=int, help="Shift every seed by K.")
def cmd_falsify(config_path, out_dir, jobs, seed_offset):
    """Run the (method x seed) experiment matrix; one JSONL + summary per cell."""
    try:
        doc = load_experiment_config(config_path)
    except InvalidInputError as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        names = run_matrix(doc, Path(out_dir), jobs=jobs, seed_offset=seed_offset)
    except FalsifyError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    click.echo(f"wrote {len(names)} runs under {Path(out_dir) / 'runs'}")


@main.command("validate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(exists=True))
def cmd_validate(config_path, out_dir):
    """Re-check recorded counterexamples on the top-fidelity simulator."""
    try:
        doc = load_experiment_config(config_path)
    except InvalidInputError as exc:
        _fail(EXIT_CONFIG, str(exc))
    runs_dir = Path(out_dir) / "runs"
    if not runs_dir.exists() or not any(runs_dir.glob("*.summary.json")):
        _fail(EXIT_CONFIG, f"no run summaries under {runs_dir}")
    try:
        outcome = validate_runs(doc, Path(out_dir))
    except FalsifyError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    for row in outcome["runs"]:
        rel = "NA" if row["reliability_percent"] is None else f"{row['reliability_percent']:.1f}%"
        click.echo(f"  {row['run']}: {row['validated']}/{row['total']} validated ({rel})")


@main.command("report")
@click.option("--out", "out_dir", required=True, type=click.Path(exists=True))
def cmd_report(out_dir):
    """Aggregate run summaries into CSV tables under <out>/report/."""
    try:
        summaries = load_summaries(Path(out_dir) / "runs")
        report = build_report(summaries)
        written = write_report_csvs(report, Path(out_dir) / "report")
    except InvalidInputError as exc:
        _fail(EXIT_CONFIG, str(exc))
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
