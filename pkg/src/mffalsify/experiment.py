"""Experiment-matrix execution: config parsing, stack/spec registries, run cells.

An experiment config names an environment (with its fidelity levels), a safety
specification, a list of methods, seeds, a budget, and a cost source. Each
(method, seed) cell is an independent deterministic run producing one JSONL
iteration log and one summary JSON.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .cost_model import CostTable, configured_costs, measure_costs
from .envs.cartpole import make_cartpole_stack, pd_balance_controller
from .envs.idm import make_idm_stack
from .envs.synthetic import make_synthetic_stack, synthetic_value_spec
from .errors import InvalidInputError
from .falsifier import (
    AcquisitionSettings,
    FalsifierConfig,
    RunRecord,
    run_bo_single,
    run_mfbo,
    run_pibo,
    run_turbo1,
    validate_counterexamples,
)
from .schemas import EXPERIMENT_SCHEMA
from .specs import cartpole_spec, idm_chain_spec

log = logging.getLogger("mffalsify")


def build_stack(env_cfg: dict):
    env_id = env_cfg["id"]
    levels = tuple(env_cfg["fidelities"])
    if env_id == "cartpole":
        controller = None
        if "controller_gains" in env_cfg:
            controller = pd_balance_controller(tuple(env_cfg["controller_gains"]))
        return make_cartpole_stack(levels, controller=controller)
    if env_id == "idm_chain":
        return make_idm_stack(levels)
    if env_id == "synthetic_forrester":
        return make_synthetic_stack(levels)
    raise InvalidInputError(f"unknown environment {env_id!r}")


def build_spec(spec_id: str):
    if spec_id == "cartpole_default":
        return cartpole_spec()
    if spec_id == "idm_min_gap":
        return idm_chain_spec()
    if spec_id == "synthetic_value":
        return synthetic_value_spec()
    raise InvalidInputError(f"unknown spec {spec_id!r}")


def load_experiment_config(path: str | Path) -> dict:
    """Parse and schema-validate an experiment config file."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    validate_experiment_config(doc)
    return doc


def validate_experiment_config(doc: dict) -> None:
    try:
        jsonschema.validate(doc, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidInputError(f"config does not match schema: {exc.message}") from exc
    stack = build_stack(doc["environment"])  # also checks fidelity names
    q = stack.q
    cost = doc["cost_source"]
    if cost["mode"] == "table":
        if "lambdas" not in cost:
            raise InvalidInputError("cost_source.mode 'table' requires 'lambdas'")
        if len(cost["lambdas"]) != q:
            raise InvalidInputError(
                f"cost table has {len(cost['lambdas'])} entries for {q} fidelities"
            )
    if "init_design_sizes" in doc:
        for method in doc["methods"]:
            if parse_method(method, q)[0] == "mfbo" and len(doc["init_design_sizes"]) != q:
                raise InvalidInputError("init_design_sizes must have one entry per fidelity")
    for method in doc["methods"]:
        parse_method(method, q)


def parse_method(method: str, q: int) -> tuple[str, int | None]:
    """Split 'name[:level]' and range-check the level."""
    name, _, suffix = method.partition(":")
    if name not in ("mfbo", "bo_single", "turbo1", "pibo"):
        raise InvalidInputError(f"unknown method {method!r}")
    level: int | None = None
    if suffix:
        try:
            level = int(suffix)
        except ValueError as exc:
            raise InvalidInputError(f"bad fidelity suffix in {method!r}") from exc
        if not 1 <= level <= q:
            raise InvalidInputError(f"method {method!r} level out of range 1..{q}")
    if name == "mfbo" and level is not None:
        raise InvalidInputError("mfbo always uses every fidelity; drop the suffix")
    return name, level


def resolve_costs(doc: dict, out_dir: Path, stack) -> CostTable:
    """Table mode reads the config; measure mode reuses or creates costs.json."""
    cost = doc["cost_source"]
    if cost["mode"] == "table":
        return configured_costs(cost["lambdas"])
    costs_path = out_dir / "costs.json"
    if costs_path.exists():
        from .cost_model import load_cost_table

        return load_cost_table(costs_path)
    table = run_cost_measurement(doc, stack)
    out_dir.mkdir(parents=True, exist_ok=True)
    from .cost_model import save_cost_table

    save_cost_table(table, costs_path)
    return table


def run_cost_measurement(doc: dict, stack) -> CostTable:
    cost = doc["cost_source"]
    n_trials = cost.get("n_trials", 10)
    n_probes = cost.get("n_probes", 10)
    probes = stack.space.sample_lhs(n_probes, seed=doc["seeds"][0])
    return measure_costs(stack, probes, n_trials=n_trials, seed=doc["seeds"][0])


def falsifier_config(doc: dict, method: str, seed: int) -> FalsifierConfig:
    name, level = parse_method(method, build_stack(doc["environment"]).q)
    acq = doc.get("acquisition", {})
    return FalsifierConfig(
        method=name,
        budget_iterations=doc["budget_iterations"],
        seed=seed,
        fidelity=level,
        init_design_sizes=(
            tuple(doc["init_design_sizes"]) if "init_design_sizes" in doc and name == "mfbo" else None
        ),
        acquisition=AcquisitionSettings(
            n_candidates=acq.get("n_candidates", 500),
            n_posterior_samples=acq.get("n_posterior_samples", 256),
            n_fantasies=acq.get("n_fantasies", 16),
        ),
        refit_every=doc.get("refit_every", 10),
        fit_restarts=doc.get("fit_restarts", 2),
        noise_variance=doc.get("noise_variance", 1e-6),
    )


def cell_name(method: str, seed: int) -> str:
    return f"{method.replace(':', '_')}_seed{seed}"


def run_cell(doc: dict, method: str, seed: int, lambdas: list[float]) -> RunRecord:
    """Execute one (method, seed) run; deterministic given its arguments."""
    stack = build_stack(doc["environment"])
    spec = build_spec(doc["spec"])
    cfg = falsifier_config(doc, method, seed)
    name, level = parse_method(method, stack.q)
    costs = np.asarray(lambdas, dtype=float)
    if name == "mfbo":
        return run_mfbo(cfg, stack, spec, costs)
    if name == "bo_single":
        return run_bo_single(cfg, stack, spec, costs, fidelity=level)
    if name == "turbo1":
        return run_turbo1(cfg, stack, spec, costs, fidelity=level)
    if name == "pibo":
        return run_pibo(cfg, stack, spec, costs, fidelity=level)
    raise InvalidInputError(f"unknown method {method!r}")


def write_record(record: RunRecord, runs_dir: Path, name: str) -> None:
    runs_dir.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(line, sort_keys=True) for line in record.jsonl_lines()]
    (runs_dir / f"{name}.jsonl").write_text("\n".join(lines) + "\n")
    (runs_dir / f"{name}.summary.json").write_text(
        json.dumps(record.summary_dict(), indent=2, sort_keys=True) + "\n"
    )


def _cell_worker(args) -> str:
    doc, method, seed, lambdas, runs_dir = args
    record = run_cell(doc, method, seed, lambdas)
    write_record(record, Path(runs_dir), cell_name(method, seed))
    return cell_name(method, seed)


def run_matrix(doc: dict, out_dir: Path, jobs: int = 1, seed_offset: int = 0) -> list[str]:
    """Run every (method, seed) cell, optionally in parallel processes."""
    stack = build_stack(doc["environment"])
    table = resolve_costs(doc, out_dir, stack)
    lambdas = list(table.lambdas)
    runs_dir = out_dir / "runs"
    cells = [
        (doc, method, seed + seed_offset, lambdas, str(runs_dir))
        for method in doc["methods"]
        for seed in doc["seeds"]
    ]
    names = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for name in pool.map(_cell_worker, cells):
                names.append(name)
                log.info("finished %s", name)
    else:
        for cell in cells:
            names.append(_cell_worker(cell))
            log.info("finished %s", names[-1])
    return names


def validate_runs(doc: dict, out_dir: Path) -> dict:
    """Re-check every recorded counterexample at the top fidelity.

    Updates each run summary in place with per-counterexample validation and a
    per-run reliability block, and returns the aggregate validation document.
    """
    from .falsifier import Counterexample

    stack = build_stack(doc["environment"])
    spec = build_spec(doc["spec"])
    runs_dir = out_dir / "runs"
    results = []
    for summary_path in sorted(runs_dir.glob("*.summary.json")):
        summary = json.loads(summary_path.read_text())
        record = RunRecord(
            method=summary["method"],
            seed=summary["seed"],
            levels=tuple(summary["levels"]),
            lambdas=tuple(summary["lambdas"]),
            config=summary["config"],
            counterexamples=[
                Counterexample(
                    e=np.asarray(ce["e"]),
                    found_at_fidelity=ce["found_at_fidelity"],
                    rho=ce["rho"],
                    iteration=ce["iteration"],
                    entry_index=ce["entry_index"],
                )
                for ce in summary["counterexamples"]
            ],
        )
        outcome = validate_counterexamples(record, stack, spec)
        summary["counterexamples"] = [ce.to_dict() for ce in record.counterexamples]
        summary["validation"] = {
            "reliability_percent": outcome.reliability_percent,
            "total": outcome.total,
            "validated": outcome.validated,
        }
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        results.append(
            {
                "run": summary_path.stem.replace(".summary", ""),
                "total": outcome.total,
                "validated": outcome.validated,
                "reliability_percent": outcome.reliability_percent,
            }
        )
    doc_out = {"runs": results}
    (out_dir / "validation.json").write_text(json.dumps(doc_out, indent=2, sort_keys=True) + "\n")
    return doc_out
