import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mffalsify.errors import InvalidInputError
from mffalsify.specs import (
    And,
    Not,
    Or,
    Pred,
    Predicate,
    RobustnessValue,
    cartpole_predicates,
    cartpole_spec,
    eval_robustness,
    formula_from_json,
    formula_to_json,
    idm_chain_spec,
    is_falsified,
    iter_predicates,
    severity_order,
)
from mffalsify.trajectory import Trajectory


def traj(states, dim=None, fidelity=1):
    states = np.atleast_2d(np.asarray(states, dtype=float))
    return Trajectory(
        times=np.arange(len(states), dtype=float),
        states=states,
        fidelity_index=fidelity,
        env_params=np.zeros(1),
        seed=0,
    )


def const_pred(name, value):
    return Predicate(name, lambda _t, v=value: v)


def leaf(value):
    return Pred(const_pred(f"c{value}", value))


class TestConnectives:
    def test_and_takes_min(self):
        formula = And(leaf(0.3), leaf(-0.2))
        assert eval_robustness(formula, traj([[0.0]])).value == -0.2

    def test_not_flips_sign(self):
        assert eval_robustness(Not(leaf(0.7)), traj([[0.0]])).value == -0.7

    def test_or_takes_max(self):
        formula = Or(leaf(-0.3), leaf(-0.1))
        assert eval_robustness(formula, traj([[0.0]])).value == -0.1

    def test_fidelity_index_carried_from_trajectory(self):
        rho = eval_robustness(leaf(1.0), traj([[0.0]], fidelity=3))
        assert rho.fidelity_index == 3

    def test_dimension_mismatch_raises(self):
        pred = Predicate("x_bound", lambda t: float(t.states[:, 0].min()), state_dim=4)
        with pytest.raises(InvalidInputError):
            eval_robustness(Pred(pred), traj([[0.0, 1.0]]))


class TestIsFalsified:
    def test_negative_is_falsified(self):
        assert is_falsified(RobustnessValue(-0.1, 1))

    def test_zero_boundary_is_satisfied(self):
        assert not is_falsified(RobustnessValue(0.0, 1))

    def test_positive_margin_is_satisfied(self):
        assert not is_falsified(RobustnessValue(2.5, 1))


class TestCartpoleSpec:
    def test_three_margin_minimum(self):
        # max |x| = 0.4, max momentum = 0.5, max angle = 0.05 rad
        states = [
            [0.4, 0.5, 0.05, 0.0],
            [-0.2, -0.1, 0.01, 0.0],
            [0.1, 0.2, -0.03, 0.0],
        ]
        rho = eval_robustness(cartpole_spec(), traj(states))
        assert rho.value == pytest.approx(9 * math.pi / 180 - 0.05, abs=1e-12)
        assert rho.value == pytest.approx(0.1071, abs=1e-4)

    def test_position_dominates_single_step(self):
        rho = eval_robustness(cartpole_spec(), traj([[1.2, 0.0, 0.0, 0.0]]))
        assert rho.value == pytest.approx(-0.2)

    def test_exact_boundary_is_zero(self):
        rho = eval_robustness(cartpole_spec(), traj([[1.0, 0.0, 0.0, 0.0]]))
        assert rho.value == 0.0
        assert not is_falsified(rho)

    def test_cart_mass_scales_momentum(self):
        heavy = cartpole_predicates(cart_mass=2.0)["cartpole_momentum"]
        assert heavy(traj([[0.0, 0.4, 0.0, 0.0]])) == pytest.approx(1 - 0.8)


class TestIdmChainSpec:
    def test_constant_gap(self):
        states = [[0.0, 10.0, 12.0, 10.0], [1.0, 10.0, 13.0, 10.0]]
        assert eval_robustness(idm_chain_spec(), traj(states)).value == pytest.approx(7.0)

    def test_min_gap_violation(self):
        states = [[0.0, 10.0, 12.0, 10.0], [5.0, 10.0, 9.2, 10.0]]
        assert eval_robustness(idm_chain_spec(), traj(states)).value == pytest.approx(-0.8)

    def test_boundary_gap(self):
        states = [[0.0, 10.0, 5.0, 10.0]]
        assert eval_robustness(idm_chain_spec(), traj(states)).value == 0.0


# --- random formula trees ------------------------------------------------------

CHANNELS = 3


def _channel_pred(idx, threshold):
    name = f"ch{idx}_lt_{threshold:.3f}"
    return Predicate(name, lambda t, i=idx, c=threshold: float(np.min(c - t.states[:, i])))


def random_formula(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return Pred(_channel_pred(int(rng.integers(CHANNELS)), float(rng.normal())))
    kind = rng.integers(3)
    if kind == 0:
        return Not(random_formula(rng, depth - 1))
    ctor = And if kind == 1 else Or
    return ctor(random_formula(rng, depth - 1), random_formula(rng, depth - 1))


def oracle_eval(node, t):
    """Independent straight-line recursive evaluator used as the semantics oracle."""
    if isinstance(node, Pred):
        return node.predicate(t)
    if isinstance(node, Not):
        return -oracle_eval(node.child, t)
    if isinstance(node, And):
        left, right = oracle_eval(node.left, t), oracle_eval(node.right, t)
        return left if left < right else right
    left, right = oracle_eval(node.left, t), oracle_eval(node.right, t)
    return left if left > right else right


def random_trajectory(rng):
    n = int(rng.integers(1, 8))
    return traj(rng.normal(size=(n, CHANNELS)))


def test_matches_recursive_oracle_bit_for_bit():
    rng = np.random.default_rng(7)
    for _ in range(200):
        formula = random_formula(rng, depth=4)
        t = random_trajectory(rng)
        assert eval_robustness(formula, t).value == oracle_eval(formula, t)


@given(st.integers(0, 2**31 - 1))
def test_de_morgan_exact(seed):
    rng = np.random.default_rng(seed)
    phi = random_formula(rng, 2)
    psi = random_formula(rng, 2)
    t = random_trajectory(rng)
    lhs = eval_robustness(Not(And(phi, psi)), t).value
    rhs = eval_robustness(Or(Not(phi), Not(psi)), t).value
    assert lhs == rhs


@given(st.integers(0, 2**31 - 1))
def test_double_negation_exact(seed):
    rng = np.random.default_rng(seed)
    phi = random_formula(rng, 3)
    t = random_trajectory(rng)
    assert eval_robustness(Not(Not(phi)), t).value == eval_robustness(phi, t).value


def test_severity_ordering_follows_robustness():
    entries = [
        ("a", RobustnessValue(0.5, 1)),
        ("b", RobustnessValue(-1.2, 1)),
        ("c", RobustnessValue(-0.1, 1)),
    ]
    assert severity_order(entries) == ["b", "c", "a"]


class TestSerialization:
    def test_round_trip(self):
        preds = cartpole_predicates()
        formula = cartpole_spec()
        doc = formula_to_json(formula)
        assert doc["op"] == "and"
        rebuilt = formula_from_json(doc, preds)
        t = traj([[0.3, 0.1, 0.02, 0.0]])
        assert eval_robustness(rebuilt, t).value == eval_robustness(formula, t).value

    def test_leaf_document_shape(self):
        doc = formula_to_json(idm_chain_spec())
        assert doc == {"pred": "idm_min_gap"}

    def test_nary_and_folds(self):
        preds = {f"p{i}": const_pred(f"p{i}", float(i)) for i in range(3)}
        doc = {"op": "and", "args": [{"pred": "p0"}, {"pred": "p1"}, {"pred": "p2"}]}
        formula = formula_from_json(doc, preds)
        assert eval_robustness(formula, traj([[0.0]])).value == 0.0

    def test_unknown_predicate_raises(self):
        with pytest.raises(InvalidInputError):
            formula_from_json({"pred": "nope"}, {})

    def test_malformed_document_raises(self):
        with pytest.raises(InvalidInputError):
            formula_from_json({"op": "xor", "args": []}, {})


def test_iter_predicates_lists_leaves():
    names = sorted(p.name for p in iter_predicates(cartpole_spec()))
    assert names == ["cartpole_angle", "cartpole_momentum", "cartpole_position"]
