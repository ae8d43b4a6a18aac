"""Aggregate run summaries into plot-ready CSV tables and a summary JSON."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

NA = "NA"


def load_summaries(runs_dir: str | Path) -> list[dict]:
    paths = sorted(Path(runs_dir).glob("*.summary.json"))
    if not paths:
        raise InvalidInputError(f"no run summaries found under {runs_dir}")
    out = []
    for path in paths:
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed summary {path}: {exc}") from exc
        for key in ("method", "seed", "counterexamples", "cumulative_cost", "fidelity_counts"):
            if key not in doc:
                raise InvalidInputError(f"summary {path} missing field {key!r}")
        out.append(doc)
    return out


def _per_method(summaries: list[dict]) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = defaultdict(list)
    for doc in summaries:
        grouped[doc["method"]].append(doc)
    return dict(sorted(grouped.items()))


def _mean_std(values: list[float]) -> tuple[float | str, float | str]:
    if not values:
        return NA, NA
    return float(np.mean(values)), float(np.std(values))


def build_report(summaries: list[dict]) -> dict:
    """Per-method aggregates: reliability, cost per counterexample, counts,
    and per-fidelity execution percentages (each row summing to 100)."""
    report: dict = {"methods": {}}
    for method, docs in _per_method(summaries).items():
        totals = [len(d["counterexamples"]) for d in docs]
        validated_known = all(
            all(ce.get("validated") is not None for ce in d["counterexamples"]) for d in docs
        )
        validated = (
            sum(sum(1 for ce in d["counterexamples"] if ce.get("validated")) for d in docs)
            if validated_known
            else None
        )
        total_ce = sum(totals)
        reliability = (
            (100.0 * validated / total_ce) if (validated_known and total_ce > 0) else None
        )

        cost_per_ce = [
            d["cumulative_cost"] / len(d["counterexamples"]) for d in docs if d["counterexamples"]
        ]
        cost_per_valid = []
        if validated_known:
            for d in docs:
                n_valid = sum(1 for ce in d["counterexamples"] if ce.get("validated"))
                if n_valid:
                    cost_per_valid.append(d["cumulative_cost"] / n_valid)

        exec_pct: dict[str, list[float]] = defaultdict(list)
        for d in docs:
            counts = {int(k): int(v) for k, v in d["fidelity_counts"].items()}
            total_q = sum(counts.values())
            if total_q:
                for level, count in counts.items():
                    exec_pct[str(level)].append(100.0 * count / total_q)
                # levels a run never used still contribute 0 to its average
                for level in d.get("levels", []):
                    if int(level) not in counts:
                        exec_pct[str(level)].append(0.0)

        mean_cost, std_cost = _mean_std(cost_per_ce)
        mean_cost_v, std_cost_v = _mean_std(cost_per_valid)
        report["methods"][method] = {
            "runs": len(docs),
            "counterexamples_total": total_ce,
            "counterexamples_mean": float(np.mean(totals)),
            "counterexamples_std": float(np.std(totals)),
            "validated_total": validated,
            "reliability_percent": reliability,
            "cost_per_counterexample_mean": mean_cost,
            "cost_per_counterexample_std": std_cost,
            "cost_per_validated_mean": mean_cost_v,
            "cost_per_validated_std": std_cost_v,
            "fidelity_execution_percent": {
                level: float(np.mean(vals)) for level, vals in sorted(exec_pct.items())
            },
        }
    return report


def _fmt(value) -> str:
    if value is None or value == NA:
        return NA
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_report_csvs(report: dict, report_dir: str | Path) -> list[Path]:
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = report_dir / "reliability.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "runs", "counterexamples", "validated", "reliability_percent"])
        for method, agg in report["methods"].items():
            w.writerow(
                [
                    method,
                    agg["runs"],
                    agg["counterexamples_total"],
                    _fmt(agg["validated_total"]),
                    _fmt(agg["reliability_percent"]),
                ]
            )
    written.append(path)

    path = report_dir / "cost_per_counterexample.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "mean", "std", "validated_only_mean", "validated_only_std"])
        for method, agg in report["methods"].items():
            w.writerow(
                [
                    method,
                    _fmt(agg["cost_per_counterexample_mean"]),
                    _fmt(agg["cost_per_counterexample_std"]),
                    _fmt(agg["cost_per_validated_mean"]),
                    _fmt(agg["cost_per_validated_std"]),
                ]
            )
    written.append(path)

    path = report_dir / "counterexample_counts.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "mean", "std", "total"])
        for method, agg in report["methods"].items():
            w.writerow(
                [
                    method,
                    _fmt(agg["counterexamples_mean"]),
                    _fmt(agg["counterexamples_std"]),
                    agg["counterexamples_total"],
                ]
            )
    written.append(path)

    path = report_dir / "fidelity_execution.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "fidelity_level", "mean_percent"])
        for method, agg in report["methods"].items():
            for level, pct in agg["fidelity_execution_percent"].items():
                w.writerow([method, level, _fmt(pct)])
    written.append(path)

    (report_dir / "summary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    written.append(report_dir / "summary.json")
    return written
