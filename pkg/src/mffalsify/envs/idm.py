"""1-D car-following scene: scripted slow vehicle, IDM leader, controlled ego.

The fidelity knob is the intelligent-driver-model parameter set of the leader:
higher fidelity levels drive more aggressively (stronger acceleration and
braking, shorter time gap), which produces sharper braking cascades for the
ego vehicle to survive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..trajectory import Trajectory
from .base import Controller
from .space import UncertaintySpace

STATE_DIM = 4  # (x_ego, v_ego, x_lead, v_lead)

ACTION_DECEL = 0
ACTION_IDLE = 1
ACTION_ACCEL = 2

IDM_DELTA = 4  # acceleration exponent of the free-flow term


@dataclass(frozen=True)
class IdmParams:
    """Car-following parameters: comfortable accel/decel, time gap, jam gap, free speed."""

    a: float
    b: float
    T: float
    s0: float = 2.0
    v0: float = 12.0

    def __post_init__(self):
        if min(self.a, self.b, self.T, self.s0, self.v0) <= 0:
            raise InvalidInputError("IDM parameters must all be > 0")


LOW_FIDELITY = IdmParams(a=3.0, b=5.0, T=1.5)
MID_FIDELITY = IdmParams(a=3.5, b=5.25, T=1.25)
HIGH_FIDELITY = IdmParams(a=4.0, b=5.5, T=1.0)

FIDELITY_PRESETS = {"low": LOW_FIDELITY, "mid": MID_FIDELITY, "high": HIGH_FIDELITY}


def idm_chain_space() -> UncertaintySpace:
    """(ego initial speed, leader initial speed, initial ego-leader gap)."""
    return UncertaintySpace(lows=[8.0, 8.0, 10.0], highs=[12.0, 12.0, 12.0])


def idm_accel(p: IdmParams, v: float, gap: float, dv: float) -> float:
    """IDM acceleration from own speed, bumper gap, and approach rate ``dv = v - v_lead``.

    The desired gap ``s* = s0 + v T + v dv / (2 sqrt(a b))`` is floored at
    ``s0`` when braking-away geometry would push it below the jam distance.
    """
    if gap <= 0:
        raise InvalidInputError("IDM acceleration undefined for gap <= 0")
    s_star = p.s0 + v * p.T + v * dv / (2.0 * np.sqrt(p.a * p.b))
    s_star = max(s_star, p.s0)
    return p.a * (1.0 - (v / p.v0) ** IDM_DELTA - (s_star / gap) ** 2)


@dataclass(frozen=True)
class IdmScenario:
    """Fixed scene constants: timestep, horizon, and the slow-vehicle pulse."""

    dt: float = 0.1
    steps: int = 300
    ego_accel_step: float = 2.0
    ego_v_max: float = 15.0
    virtual_initial_gap: float = 25.0
    pulse_time: float = 3.0
    pulse_decel: float = 4.0
    pulse_duration: float = 1.0
    pulse_recover_accel: float = 2.0


DEFAULT_SCENARIO = IdmScenario()


def _virtual_speed(t: float, v_start: float, sc: IdmScenario) -> float:
    """Scripted speed of the slow vehicle: dip at a fixed time, then recover."""
    if t < sc.pulse_time:
        return v_start
    dip = sc.pulse_decel * sc.pulse_duration
    t_rel = t - sc.pulse_time
    if t_rel < sc.pulse_duration:
        return max(v_start - sc.pulse_decel * t_rel, 0.0)
    v_low = max(v_start - dip, 0.0)
    return min(v_low + sc.pulse_recover_accel * (t_rel - sc.pulse_duration), v_start)


def idm_chain_simulate(
    params: IdmParams,
    e: np.ndarray,
    controller: Controller,
    seed: int,
    scenario: IdmScenario = DEFAULT_SCENARIO,
    fidelity_index: int = 1,
) -> Trajectory:
    """Run the two-vehicle scene; ends early if the ego closes the gap to zero.

    The ego controller observes ``(v_ego, gap, dv)`` and picks
    decelerate/idle/accelerate in fixed +-2 m/s^2 steps. The trajectory records
    positions and speeds of ego and leader. The dynamics are deterministic;
    ``seed`` is carried through for records only.
    """
    e = idm_chain_space().require(e, "car-following parameters")
    v_ego, v_lead, gap0 = float(e[0]), float(e[1]), float(e[2])
    x_ego, x_lead = 0.0, gap0
    x_virt = gap0 + scenario.virtual_initial_gap
    v_virt_start = v_lead

    times = [0.0]
    states = [(x_ego, v_ego, x_lead, v_lead)]
    for step in range(scenario.steps):
        t = step * scenario.dt
        gap_el = x_lead - x_ego
        obs = np.asarray([v_ego, gap_el, v_ego - v_lead])
        action = controller(obs)
        if action not in (ACTION_DECEL, ACTION_IDLE, ACTION_ACCEL):
            raise InvalidInputError(f"invalid car-following action {action}")
        a_ego = (action - 1) * scenario.ego_accel_step

        gap_lv = max(x_virt - x_lead, 0.1)
        a_lead = idm_accel(params, v_lead, gap_lv, v_lead - _virtual_speed(t, v_virt_start, scenario))

        v_ego = float(np.clip(v_ego + a_ego * scenario.dt, 0.0, scenario.ego_v_max))
        v_lead = max(v_lead + a_lead * scenario.dt, 0.0)
        v_virt = _virtual_speed(t + scenario.dt, v_virt_start, scenario)
        x_ego += v_ego * scenario.dt
        x_lead += v_lead * scenario.dt
        x_virt += v_virt * scenario.dt

        times.append((step + 1) * scenario.dt)
        states.append((x_ego, v_ego, x_lead, v_lead))
        if x_lead - x_ego <= 0:
            break

    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        fidelity_index=fidelity_index,
        env_params=e,
        seed=seed,
    )


# Defaults tuned so nominal scenes stay safe while fast-approach corners of the
# uncertainty box can still be driven below the 5 m safety gap (see fixtures).
def headway_controller(
    target_speed: float = 12.0,
    min_gap: float = 2.0,
    brake_time_gap: float = 0.35,
    react_time: float = 0.45,
    cruise_time_gap: float = 0.7,
) -> Controller:
    """Rule-based ego policy: brake on short/closing gaps, else chase the target speed."""

    def policy(obs: np.ndarray) -> int:
        v, gap, dv = float(obs[0]), float(obs[1]), float(obs[2])
        brake_gap = min_gap + v * brake_time_gap
        if gap < brake_gap or (dv > 0 and gap < brake_gap + dv * react_time):
            return ACTION_DECEL
        if v < target_speed and gap > min_gap + v * cruise_time_gap:
            return ACTION_ACCEL
        return ACTION_IDLE

    return Controller(name="headway", policy=policy)


def always_idle_controller() -> Controller:
    return Controller(name="always_idle", policy=lambda obs: ACTION_IDLE)


def always_accelerate_controller() -> Controller:
    return Controller(name="always_accelerate", policy=lambda obs: ACTION_ACCEL)


@dataclass(frozen=True)
class IdmChainStack:
    """Car-following simulators whose leader aggressiveness grows with fidelity."""

    params: tuple[IdmParams, ...]
    controller: Controller
    fidelity_names: tuple[str, ...]
    scenario: IdmScenario = DEFAULT_SCENARIO

    @property
    def space(self) -> UncertaintySpace:
        return idm_chain_space()

    @property
    def q(self) -> int:
        return len(self.params)

    def simulate(self, e: np.ndarray, fidelity: int, seed: int) -> Trajectory:
        if not 1 <= fidelity <= self.q:
            raise InvalidInputError(f"fidelity {fidelity} out of range 1..{self.q}")
        return idm_chain_simulate(
            self.params[fidelity - 1],
            e,
            self.controller,
            seed,
            scenario=self.scenario,
            fidelity_index=fidelity,
        )


def make_idm_stack(levels=("low", "mid", "high"), controller: Controller | None = None) -> IdmChainStack:
    params = []
    for name in levels:
        if name not in FIDELITY_PRESETS:
            raise InvalidInputError(f"unknown car-following fidelity {name!r}")
        params.append(FIDELITY_PRESETS[name])
    return IdmChainStack(
        params=tuple(params),
        controller=controller or headway_controller(),
        fidelity_names=tuple(levels),
    )
