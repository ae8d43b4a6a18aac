"""JSON schemas for the experiment config and every file the harness emits."""

EXPERIMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["environment", "spec", "methods", "seeds", "budget_iterations", "cost_source"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "environment": {
            "type": "object",
            "required": ["id", "fidelities"],
            "additionalProperties": False,
            "properties": {
                "id": {"enum": ["cartpole", "idm_chain", "synthetic_forrester"]},
                "fidelities": {
                    "type": "array",
                    "items": {"type": "string"},
                    "minItems": 1,
                    "maxItems": 3,
                },
                "controller_gains": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 4,
                    "maxItems": 4,
                },
            },
        },
        "spec": {"enum": ["cartpole_default", "idm_min_gap", "synthetic_value"]},
        "methods": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "budget_iterations": {"type": "integer", "minimum": 1},
        "init_design_sizes": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
        },
        "acquisition": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_candidates": {"type": "integer", "minimum": 2},
                "n_posterior_samples": {"type": "integer", "minimum": 2},
                "n_fantasies": {"type": "integer", "minimum": 1},
            },
        },
        "refit_every": {"type": "integer", "minimum": 1},
        "fit_restarts": {"type": "integer", "minimum": 1},
        "noise_variance": {"type": "number", "exclusiveMinimum": 0},
        "cost_source": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["table", "measure"]},
                "lambdas": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                },
                "n_trials": {"type": "integer", "minimum": 1},
                "n_probes": {"type": "integer", "minimum": 1},
            },
        },
    },
}

COST_TABLE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["lambdas", "provenance"],
    "additionalProperties": False,
    "properties": {
        "lambdas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "provenance": {"enum": ["measured", "configured"]},
        "timing_seconds": {"type": "array", "items": {"type": "number"}},
        "similarity_to_top": {"type": "array", "items": {"type": "number"}},
        "ordering_warning": {"type": "boolean"},
    },
}

RUN_LINE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "kind",
        "index",
        "iteration",
        "e",
        "fidelity",
        "rho",
        "sim_seed",
        "cost",
        "cumulative_cost",
        "counterexample",
    ],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["init", "query"]},
        "index": {"type": "integer", "minimum": 0},
        "iteration": {"type": ["integer", "null"], "minimum": 1},
        "e": {"type": "array", "items": {"type": "number"}},
        "fidelity": {"type": "integer", "minimum": 1},
        "rho": {"type": "number"},
        "sim_seed": {"type": "integer"},
        "cost": {"type": "number", "exclusiveMinimum": 0},
        "cumulative_cost": {"type": "number", "exclusiveMinimum": 0},
        "counterexample": {"type": "boolean"},
        "acq": {"type": "object"},
    },
}

COUNTEREXAMPLE_SCHEMA = {
    "type": "object",
    "required": ["e", "found_at_fidelity", "rho", "iteration", "entry_index"],
    "additionalProperties": False,
    "properties": {
        "e": {"type": "array", "items": {"type": "number"}},
        "found_at_fidelity": {"type": "integer", "minimum": 1},
        "rho": {"type": "number", "exclusiveMaximum": 0},
        "iteration": {"type": "integer", "minimum": 1},
        "entry_index": {"type": "integer", "minimum": 0},
        "validated": {"type": ["boolean", "null"]},
        "rho_at_q": {"type": ["number", "null"]},
        "validation_seed": {"type": ["integer", "null"]},
    },
}

RUN_SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "method",
        "seed",
        "levels",
        "lambdas",
        "config",
        "n_init",
        "n_iterations",
        "cumulative_cost",
        "counterexamples",
        "fidelity_counts",
    ],
    "properties": {
        "method": {"type": "string"},
        "seed": {"type": "integer"},
        "levels": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "lambdas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "config": {"type": "object"},
        "n_init": {"type": "integer", "minimum": 0},
        "n_iterations": {"type": "integer", "minimum": 0},
        "cumulative_cost": {"type": "number", "minimum": 0},
        "counterexamples": {"type": "array", "items": COUNTEREXAMPLE_SCHEMA},
        "model_snapshots": {"type": "array", "items": {"type": "object"}},
        "fidelity_counts": {"type": "object"},
        "aborted_reason": {"type": ["string", "null"]},
        "validation": {
            "type": ["object", "null"],
            "properties": {
                "reliability_percent": {"type": ["number", "null"]},
                "total": {"type": "integer", "minimum": 0},
                "validated": {"type": "integer", "minimum": 0},
            },
        },
    },
}

VALIDATION_FILE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["runs"],
    "additionalProperties": False,
    "properties": {
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["run", "total", "validated", "reliability_percent"],
                "additionalProperties": False,
                "properties": {
                    "run": {"type": "string"},
                    "total": {"type": "integer", "minimum": 0},
                    "validated": {"type": "integer", "minimum": 0},
                    "reliability_percent": {"type": ["number", "null"]},
                },
            },
        }
    },
}
