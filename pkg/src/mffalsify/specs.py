"""Safety specifications as formula trees with signed robustness semantics.

A specification is a finite tree of predicates combined with not/and/or. Each
predicate maps a whole trajectory to a real margin (positive iff satisfied);
the "always" temporal scope is baked into the predicate as a min over time, so
the connectives operate on scalar margins: negation flips the sign,
conjunction takes the min, disjunction the max. A trajectory violates the
specification exactly when the root robustness value is negative, and more
negative values identify more severe failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import InvalidInputError
from .trajectory import Trajectory

MarginFn = Callable[[Trajectory], float]


@dataclass(frozen=True)
class Predicate:
    """Named trajectory-to-margin function; positive margin means satisfied.

    ``state_dim``, when set, is checked against the trajectory at evaluation
    time so a formula built for one environment cannot silently be applied to
    another.
    """

    name: str
    margin_fn: MarginFn
    state_dim: int | None = None

    def __call__(self, traj: Trajectory) -> float:
        if self.state_dim is not None and traj.state_dim != self.state_dim:
            raise InvalidInputError(
                f"predicate {self.name!r} expects state dim {self.state_dim}, "
                f"trajectory has {traj.state_dim}"
            )
        return float(self.margin_fn(traj))


@dataclass(frozen=True)
class Pred:
    predicate: Predicate


@dataclass(frozen=True)
class Not:
    child: "SpecFormula"


@dataclass(frozen=True)
class And:
    left: "SpecFormula"
    right: "SpecFormula"


@dataclass(frozen=True)
class Or:
    left: "SpecFormula"
    right: "SpecFormula"


SpecFormula = Union[Pred, Not, And, Or]


@dataclass(frozen=True)
class RobustnessValue:
    """Signed satisfaction margin of a formula over one trajectory."""

    value: float
    fidelity_index: int


def eval_robustness(formula: SpecFormula, traj: Trajectory) -> RobustnessValue:
    """Recursively evaluate the quantitative semantics of ``formula`` on ``traj``."""
    if len(traj) < 1:
        raise InvalidInputError("cannot evaluate robustness of an empty trajectory")
    value = _eval(formula, traj)
    if not math.isfinite(value):
        raise InvalidInputError(f"robustness value is not finite: {value}")
    return RobustnessValue(value=value, fidelity_index=traj.fidelity_index)


def _eval(node: SpecFormula, traj: Trajectory) -> float:
    if isinstance(node, Pred):
        return node.predicate(traj)
    if isinstance(node, Not):
        return -_eval(node.child, traj)
    if isinstance(node, And):
        return min(_eval(node.left, traj), _eval(node.right, traj))
    if isinstance(node, Or):
        return max(_eval(node.left, traj), _eval(node.right, traj))
    raise InvalidInputError(f"unknown formula node: {node!r}")


def is_falsified(rho: RobustnessValue) -> bool:
    """True iff the specification is violated; the boundary 0 counts as satisfied."""
    return rho.value < 0


def iter_predicates(formula: SpecFormula):
    """Yield every predicate leaf in the tree."""
    if isinstance(formula, Pred):
        yield formula.predicate
    elif isinstance(formula, Not):
        yield from iter_predicates(formula.child)
    elif isinstance(formula, (And, Or)):
        yield from iter_predicates(formula.left)
        yield from iter_predicates(formula.right)


# --- serialization -----------------------------------------------------------

def formula_to_json(formula: SpecFormula) -> dict:
    """Encode a formula tree as ``{"op": ..., "args": [...]}`` with named leaves."""
    if isinstance(formula, Pred):
        return {"pred": formula.predicate.name}
    if isinstance(formula, Not):
        return {"op": "not", "args": [formula_to_json(formula.child)]}
    if isinstance(formula, And):
        return {"op": "and", "args": [formula_to_json(formula.left), formula_to_json(formula.right)]}
    if isinstance(formula, Or):
        return {"op": "or", "args": [formula_to_json(formula.left), formula_to_json(formula.right)]}
    raise InvalidInputError(f"unknown formula node: {formula!r}")


def formula_from_json(doc: dict, predicates: Mapping[str, Predicate]) -> SpecFormula:
    """Decode a formula document; ``predicates`` maps leaf names to built-ins.

    n-ary and/or documents are accepted and folded left-associatively.
    """
    if "pred" in doc:
        name = doc["pred"]
        if name not in predicates:
            raise InvalidInputError(f"unknown predicate {name!r}")
        return Pred(predicates[name])
    op = doc.get("op")
    args = doc.get("args", [])
    if op == "not":
        if len(args) != 1:
            raise InvalidInputError("'not' takes exactly one argument")
        return Not(formula_from_json(args[0], predicates))
    if op in ("and", "or"):
        if len(args) < 2:
            raise InvalidInputError(f"{op!r} takes at least two arguments")
        ctor = And if op == "and" else Or
        node = ctor(formula_from_json(args[0], predicates), formula_from_json(args[1], predicates))
        for extra in args[2:]:
            node = ctor(node, formula_from_json(extra, predicates))
        return node
    raise InvalidInputError(f"malformed formula document: {doc!r}")


# --- built-in environment specifications -------------------------------------

CARTPOLE_STATE_DIM = 4  # (x, v, theta, theta_dot)
IDM_CHAIN_STATE_DIM = 4  # (x_ego, v_ego, x_lead, v_lead)

POSITION_BOUND_M = 1.0
MOMENTUM_BOUND = 1.0
ANGLE_BOUND_RAD = 9.0 * math.pi / 180.0
MIN_GAP_M = 5.0


def cartpole_predicates(cart_mass: float = 1.0) -> dict[str, Predicate]:
    """The three cart-pole safety margins, each a min over the trajectory."""

    def position_margin(traj: Trajectory) -> float:
        return float(np.min(POSITION_BOUND_M - np.abs(traj.states[:, 0])))

    def momentum_margin(traj: Trajectory) -> float:
        return float(np.min(MOMENTUM_BOUND - np.abs(cart_mass * traj.states[:, 1])))

    def angle_margin(traj: Trajectory) -> float:
        return float(np.min(ANGLE_BOUND_RAD - np.abs(traj.states[:, 2])))

    dim = CARTPOLE_STATE_DIM
    return {
        "cartpole_position": Predicate("cartpole_position", position_margin, dim),
        "cartpole_momentum": Predicate("cartpole_momentum", momentum_margin, dim),
        "cartpole_angle": Predicate("cartpole_angle", angle_margin, dim),
    }


def cartpole_spec(cart_mass: float = 1.0) -> SpecFormula:
    """Conjunction of the position, momentum, and angle margins."""
    preds = cartpole_predicates(cart_mass)
    return And(
        And(Pred(preds["cartpole_position"]), Pred(preds["cartpole_momentum"])),
        Pred(preds["cartpole_angle"]),
    )


def idm_predicates(min_gap: float = MIN_GAP_M) -> dict[str, Predicate]:
    def gap_margin(traj: Trajectory) -> float:
        gap = traj.states[:, 2] - traj.states[:, 0]
        return float(np.min(gap - min_gap))

    return {"idm_min_gap": Predicate("idm_min_gap", gap_margin, IDM_CHAIN_STATE_DIM)}


def idm_chain_spec(min_gap: float = MIN_GAP_M) -> SpecFormula:
    """Ego keeps at least ``min_gap`` meters of bumper distance to its leader."""
    return Pred(idm_predicates(min_gap)["idm_min_gap"])


def severity_order(entries: list[tuple[object, RobustnessValue]]) -> list[object]:
    """Rank cases most-severe-first: lower robustness means a worse failure."""
    return [key for key, rho in sorted(entries, key=lambda kv: kv[1].value)]
