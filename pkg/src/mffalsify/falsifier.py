"""Falsification campaigns: the multi-fidelity BO loop, single-fidelity and
trust-region/prior-weighted baselines, counterexample validation, and cost
metrics.

A run never stops at the first counterexample: violations are recorded and the
loop continues, so fixed-budget comparisons can count how many (and how
reliable) counterexamples each method produces.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    CandidateSet,
    EsConfig,
    argmax_cost_scaled,
    es_matrix,
    sample_candidates,
    select_next,
)
from .cost_model import CostTable
from .errors import InvalidInputError, NumericFailureError
from .gp import Dataset, RbfKernel, build_posterior, fit_hyperparams
from .multifidelity import (
    ArParams,
    MfDataset,
    MfFit,
    build_mf_posterior,
    fit_ar_params,
    make_nested_design,
)
from .specs import RobustnessValue, SpecFormula, eval_robustness, is_falsified

# Seed-stream tags so every random choice in a run has its own derived stream.
_TAG_SIM = 1
_TAG_CAND = 2
_TAG_ACQ = 3
_TAG_INIT = 4
_TAG_VALIDATE = 5
_TAG_TURBO = 6

TURBO_L_INIT = 0.75
TURBO_L_MAX = 1.5
TURBO_L_MIN = 0.5**7

PIBO_BETA_STAR = 0.7
PIBO_EDGE_STD = 0.1  # fraction of each (normalized) interval width
PIBO_NORMALIZATION_GRID = 1024


def _derived_seed(seed: int, *tags: int) -> int:
    seq = np.random.SeedSequence([int(seed), *[int(t) for t in tags]])
    return int(seq.generate_state(1)[0] % (2**31 - 1))


def _derived_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(t) for t in tags]]))


@dataclass(frozen=True)
class AcquisitionSettings:
    n_candidates: int = 500
    n_posterior_samples: int = 256
    n_fantasies: int = 16


@dataclass(frozen=True)
class FalsifierConfig:
    """Knobs of one falsification run."""

    method: str = "mfbo"  # mfbo | bo_single | turbo1 | pibo
    budget_iterations: int = 200
    seed: int = 0
    fidelity: int | None = None  # stack level for single-fidelity methods
    init_design_sizes: tuple[int, ...] | None = None
    acquisition: AcquisitionSettings = field(default_factory=AcquisitionSettings)
    refit_every: int = 10
    fit_restarts: int = 2
    fit_maxfun: int = 300
    noise_variance: float = 1e-6
    fit_noise: bool = True
    turbo_tau_succ: int = 3
    turbo_tau_fail: int = 5
    pibo_beta_star: float = PIBO_BETA_STAR
    pibo_edge_std: float = PIBO_EDGE_STD

    def __post_init__(self):
        if self.budget_iterations < 1:
            raise InvalidInputError("budget must be >= 1")


@dataclass
class IterationEntry:
    """One executed simulation: either an initialization point or a BO query."""

    kind: str  # "init" | "query"
    index: int  # global execution index within the run
    iteration: int | None  # BO iteration (1-based), None for init points
    e: np.ndarray  # raw environment parameters
    fidelity: int  # stack fidelity level the simulation ran at
    rho: float
    sim_seed: int
    cost: float
    cumulative_cost: float
    counterexample: bool = False
    acq: dict | None = None

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "index": self.index,
            "iteration": self.iteration,
            "e": [float(v) for v in self.e],
            "fidelity": int(self.fidelity),
            "rho": float(self.rho),
            "sim_seed": int(self.sim_seed),
            "cost": float(self.cost),
            "cumulative_cost": float(self.cumulative_cost),
            "counterexample": bool(self.counterexample),
        }
        if self.acq is not None:
            doc["acq"] = self.acq
        return doc


@dataclass
class Counterexample:
    """A query whose robustness came out negative, with optional validation."""

    e: np.ndarray
    found_at_fidelity: int
    rho: float
    iteration: int
    entry_index: int
    validated: bool | None = None
    rho_at_q: float | None = None
    validation_seed: int | None = None

    def __post_init__(self):
        if not self.rho < 0:
            raise InvalidInputError("counterexamples must have negative robustness")

    def to_dict(self) -> dict:
        return {
            "e": [float(v) for v in self.e],
            "found_at_fidelity": int(self.found_at_fidelity),
            "rho": float(self.rho),
            "iteration": int(self.iteration),
            "entry_index": int(self.entry_index),
            "validated": self.validated,
            "rho_at_q": None if self.rho_at_q is None else float(self.rho_at_q),
            "validation_seed": self.validation_seed,
        }


@dataclass
class RunRecord:
    """Complete log of one campaign; every entry replays bit-for-bit."""

    method: str
    seed: int
    levels: tuple[int, ...]  # stack fidelity levels used (model level order)
    lambdas: tuple[float, ...]  # per-model-level query costs
    config: dict
    init_entries: list[IterationEntry] = field(default_factory=list)
    iterations: list[IterationEntry] = field(default_factory=list)
    counterexamples: list[Counterexample] = field(default_factory=list)
    model_snapshots: list[dict] = field(default_factory=list)
    aborted_reason: str | None = None

    @property
    def cumulative_cost(self) -> float:
        entries = self.iterations or self.init_entries
        return entries[-1].cumulative_cost if entries else 0.0

    @property
    def entries(self) -> list[IterationEntry]:
        return self.init_entries + self.iterations

    def fidelity_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for entry in self.iterations:
            counts[entry.fidelity] = counts.get(entry.fidelity, 0) + 1
        return counts

    def jsonl_lines(self) -> list[dict]:
        return [entry.to_dict() for entry in self.entries]

    def summary_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "levels": list(self.levels),
            "lambdas": list(self.lambdas),
            "config": self.config,
            "n_init": len(self.init_entries),
            "n_iterations": len(self.iterations),
            "cumulative_cost": float(self.cumulative_cost),
            "counterexamples": [ce.to_dict() for ce in self.counterexamples],
            "model_snapshots": self.model_snapshots,
            "fidelity_counts": {str(k): v for k, v in sorted(self.fidelity_counts().items())},
            "aborted_reason": self.aborted_reason,
        }


# --- surrogate bookkeeping ----------------------------------------------------


class _Surrogate:
    """Mutable model state: unit-box inputs, standardized outputs, cached fit.

    Handles both the single-GP (q = 1) and auto-regressive (q >= 2) cases so
    the loop code does not care which it is running.
    """

    def __init__(self, q: int, dim: int, cfg: FalsifierConfig):
        self.q = q
        self.dim = dim
        self.cfg = cfg
        self.inputs: list[list[np.ndarray]] = [[] for _ in range(q)]
        self.outputs: list[list[float]] = [[] for _ in range(q)]
        self.noise = cfg.noise_variance
        self.kernel: RbfKernel | None = None
        self.ar: ArParams | None = None
        self.y_mean = 0.0
        self.y_std = 1.0
        self.noise_floor = cfg.noise_variance

    def add(self, u: np.ndarray, level: int, rho: float) -> None:
        self.inputs[level - 1].append(np.asarray(u, dtype=float))
        self.outputs[level - 1].append(float(rho))

    def _all_outputs(self) -> np.ndarray:
        return np.concatenate([np.asarray(ys) for ys in self.outputs if ys])

    def _standardize(self) -> None:
        ys = self._all_outputs()
        self.y_mean = float(np.mean(ys))
        self.y_std = max(float(np.std(ys)), 1e-12)

    def _std_y(self, level: int) -> np.ndarray:
        return (np.asarray(self.outputs[level - 1]) - self.y_mean) / self.y_std

    def fit(self, seed: int) -> dict:
        """Refit hyperparameters on the current data; returns a snapshot dict."""
        self._standardize()
        std_noise = max(self.noise_floor / self.y_std**2, 1e-8)
        if self.q == 1:
            ds = Dataset(np.vstack(self.inputs[0]), self._std_y(1), noise_variance=std_noise)
            self.kernel, self.noise = fit_hyperparams(
                ds,
                restarts=self.cfg.fit_restarts,
                seed=seed,
                fit_noise=self.cfg.fit_noise,
                maxfun=self.cfg.fit_maxfun,
            )
        else:
            levels = [
                Dataset(np.vstack(self.inputs[l]), self._std_y(l + 1), noise_variance=std_noise)
                for l in range(self.q)
            ]
            warm = MfFit(self.ar, self.noise) if self.ar is not None else None
            fit = fit_ar_params(
                MfDataset(levels),
                restarts=self.cfg.fit_restarts,
                seed=seed,
                maxfun=self.cfg.fit_maxfun,
                warm_start=warm,
            )
            self.ar, self.noise = fit.params, fit.noise_variance
        return self.snapshot()

    def posterior(self, mask: np.ndarray | None = None):
        """Posterior on the standardized data; ``mask`` restricts level-1 rows."""
        if self.q == 1:
            xs = np.vstack(self.inputs[0])
            ys = self._std_y(1)
            if mask is not None and mask.sum() >= 2:
                xs, ys = xs[mask], ys[mask]
            return build_posterior(
                Dataset(xs, ys, noise_variance=self.noise), self.kernel
            )
        levels = [
            Dataset(np.vstack(self.inputs[l]), self._std_y(l + 1), noise_variance=self.noise)
            for l in range(self.q)
        ]
        return build_mf_posterior(MfDataset(levels), self.ar)

    def snapshot(self) -> dict:
        snap: dict = {
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "noise_variance": float(self.noise),
        }
        if self.q == 1 and self.kernel is not None:
            snap["kernel"] = {
                "variance": float(self.kernel.variance),
                "lengthscales": [float(v) for v in self.kernel.lengthscales],
            }
        elif self.ar is not None:
            snap["eta"] = [float(v) for v in self.ar.eta]
            snap["base_kernel"] = {
                "variance": float(self.ar.base_kernel.variance),
                "lengthscales": [float(v) for v in self.ar.base_kernel.lengthscales],
            }
            snap["gap_kernels"] = [
                {"variance": float(k.variance), "lengthscales": [float(v) for v in k.lengthscales]}
                for k in self.ar.gap_kernels
            ]
        return snap


def default_init_sizes(dim: int, q: int) -> tuple[int, ...]:
    """5d points at the cheapest level, halved per level up, never below 2."""
    sizes = []
    n = max(5 * dim, 2)
    for _ in range(q):
        sizes.append(max(int(math.ceil(n)), 2))
        n /= 2
    return tuple(sizes)


# --- the core loop -------------------------------------------------------------


def _run_loop(
    stack,
    levels: list[int],
    spec: SpecFormula,
    lambdas: list[float],
    cfg: FalsifierConfig,
    method: str,
    candidates_fn=None,
    select_fn=None,
    after_query=None,
    posterior_mask=None,
) -> RunRecord:
    """Shared BO loop; the hooks specialize it into the individual methods."""
    space = stack.space
    q_model = len(levels)
    record = RunRecord(
        method=method,
        seed=cfg.seed,
        levels=tuple(levels),
        lambdas=tuple(float(v) for v in lambdas),
        config=_config_echo(cfg, stack, levels),
    )

    sizes = cfg.init_design_sizes or default_init_sizes(space.dim, q_model)
    if len(sizes) != q_model:
        raise InvalidInputError(f"init design needs {q_model} sizes, got {len(sizes)}")
    designs = make_nested_design(space, sizes, seed=_derived_seed(cfg.seed, _TAG_INIT))

    surrogate = _Surrogate(q_model, space.dim, cfg)
    cumulative = 0.0
    exec_index = 0
    for level_model, points in enumerate(designs, start=1):
        for e in points:
            sim_seed = _derived_seed(cfg.seed, _TAG_SIM, exec_index)
            traj = stack.simulate(e, levels[level_model - 1], sim_seed)
            rho = eval_robustness(spec, traj).value
            cumulative += lambdas[level_model - 1]
            record.init_entries.append(
                IterationEntry(
                    kind="init",
                    index=exec_index,
                    iteration=None,
                    e=np.asarray(e, dtype=float),
                    fidelity=levels[level_model - 1],
                    rho=rho,
                    sim_seed=sim_seed,
                    cost=lambdas[level_model - 1],
                    cumulative_cost=cumulative,
                )
            )
            surrogate.add(space.normalize(e), level_model, rho)
            exec_index += 1

    record.model_snapshots.append(
        {"iteration": 0, **surrogate.fit(seed=_derived_seed(cfg.seed, _TAG_ACQ, 0))}
    )

    acq = cfg.acquisition
    for t in range(1, cfg.budget_iterations + 1):
        if candidates_fn is not None:
            candidates = candidates_fn(t, surrogate)
        else:
            candidates = sample_candidates(
                space.dim, acq.n_candidates, seed=_derived_seed(cfg.seed, _TAG_CAND, t)
            )
        es_cfg = EsConfig(
            n_posterior_samples=acq.n_posterior_samples,
            n_fantasies=acq.n_fantasies,
            seed=_derived_seed(cfg.seed, _TAG_ACQ, t),
        )
        diagnostics: dict = {}
        try:
            u, model_level = _select_with_retry(
                surrogate, candidates, lambdas, es_cfg, diagnostics, select_fn, t, posterior_mask
            )
        except NumericFailureError as exc:
            record.aborted_reason = f"iteration {t}: {exc}"
            break

        e = space.denormalize(u)
        sim_seed = _derived_seed(cfg.seed, _TAG_SIM, exec_index)
        traj = stack.simulate(e, levels[model_level - 1], sim_seed)
        rho = eval_robustness(spec, traj).value
        cumulative += lambdas[model_level - 1]
        entry = IterationEntry(
            kind="query",
            index=exec_index,
            iteration=t,
            e=np.asarray(e, dtype=float),
            fidelity=levels[model_level - 1],
            rho=rho,
            sim_seed=sim_seed,
            cost=lambdas[model_level - 1],
            cumulative_cost=cumulative,
            counterexample=rho < 0,
            acq=diagnostics or None,
        )
        record.iterations.append(entry)
        exec_index += 1
        if rho < 0:
            record.counterexamples.append(
                Counterexample(
                    e=np.asarray(e, dtype=float),
                    found_at_fidelity=levels[model_level - 1],
                    rho=rho,
                    iteration=t,
                    entry_index=entry.index,
                )
            )
        surrogate.add(u, model_level, rho)
        if after_query is not None:
            after_query(t, u, model_level, rho)
        if t % cfg.refit_every == 0 and t < cfg.budget_iterations:
            record.model_snapshots.append(
                {"iteration": t, **surrogate.fit(seed=_derived_seed(cfg.seed, _TAG_ACQ, t))}
            )
    return record


def _select_with_retry(surrogate, candidates, lambdas, es_cfg, diagnostics, select_fn, t, posterior_mask):
    """Build the posterior and pick a query, retrying once with inflated noise."""
    for attempt in range(2):
        try:
            mask = posterior_mask() if posterior_mask is not None else None
            post = surrogate.posterior(mask=mask)
            if select_fn is not None:
                return select_fn(post, candidates, lambdas, es_cfg, diagnostics, t)
            return select_next(post, candidates, lambdas, es_cfg, diagnostics=diagnostics)
        except NumericFailureError:
            if attempt == 1:
                raise
            surrogate.noise = max(surrogate.noise * 100.0, 1e-6)
    raise NumericFailureError("unreachable")


def _config_echo(cfg: FalsifierConfig, stack, levels) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["acquisition"] = dataclasses.asdict(cfg.acquisition)
    doc["stack_fidelity_names"] = list(getattr(stack, "fidelity_names", ()))
    doc["stack_levels_used"] = list(levels)
    return doc


def _resolve_costs(costs, stack_q: int) -> list[float]:
    if isinstance(costs, CostTable):
        if costs.q != stack_q:
            raise InvalidInputError(f"cost table covers {costs.q} levels, stack has {stack_q}")
        return list(costs.lambdas)
    lambdas = [float(v) for v in np.asarray(costs, dtype=float).reshape(-1)]
    if len(lambdas) != stack_q:
        raise InvalidInputError(f"need {stack_q} costs, got {len(lambdas)}")
    return lambdas


def run_mfbo(cfg: FalsifierConfig, stack, spec: SpecFormula, costs) -> RunRecord:
    """Cost-aware multi-fidelity falsification over all of the stack's levels.

    With a single-level stack this reduces exactly to ``run_bo_single``: the
    query sequence is identical under identical seeds.
    """
    lambdas = _resolve_costs(costs, stack.q)
    levels = list(range(1, stack.q + 1))
    return _run_loop(stack, levels, spec, lambdas, cfg, method="mfbo")


def run_bo_single(
    cfg: FalsifierConfig, stack, spec: SpecFormula, costs, fidelity: int | None = None
) -> RunRecord:
    """Plain entropy-search BO against one fidelity level (default: the top)."""
    fidelity = fidelity or cfg.fidelity or stack.q
    if not 1 <= fidelity <= stack.q:
        raise InvalidInputError(f"fidelity {fidelity} out of range 1..{stack.q}")
    lam = _single_cost(costs, fidelity, stack.q)
    return _run_loop(stack, [fidelity], spec, [lam], cfg, method=f"bo_single:{fidelity}")


def _single_cost(costs, fidelity: int, stack_q: int) -> float:
    if isinstance(costs, CostTable):
        if costs.q != stack_q:
            raise InvalidInputError("cost table does not match stack")
        return costs.lambdas[fidelity - 1]
    arr = np.asarray(costs, dtype=float).reshape(-1)
    if arr.size == 1:
        return float(arr[0])
    if arr.size != stack_q:
        raise InvalidInputError("costs must be a scalar or one per stack level")
    return float(arr[fidelity - 1])


# --- TuRBO-1 --------------------------------------------------------------------


@dataclass(frozen=True)
class TurboState:
    """Trust-region side length and success/failure streak counters."""

    center: np.ndarray
    length: float = TURBO_L_INIT
    success_count: int = 0
    fail_count: int = 0
    tau_succ: int = 3
    tau_fail: int = 5
    restarted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not 0 < self.length <= TURBO_L_MAX:
            raise InvalidInputError(f"trust region length {self.length} out of (0, {TURBO_L_MAX}]")
        if self.tau_succ < 2 or self.tau_fail < 2:
            raise InvalidInputError("streak thresholds must be >= 2")


def turbo_update(state: TurboState, success: bool) -> TurboState:
    """One streak-counter transition: double on a success streak, halve on a
    failure streak, reinitialize once the region collapses below the minimum."""
    if success:
        succ, fail = state.success_count + 1, 0
    else:
        succ, fail = 0, state.fail_count + 1
    length = state.length
    if succ == state.tau_succ:
        length = min(TURBO_L_MAX, 2.0 * length)
        succ = 0
    elif fail == state.tau_fail:
        length = length / 2.0
        fail = 0
    restarted = False
    if length < TURBO_L_MIN:
        length = TURBO_L_INIT
        succ = fail = 0
        restarted = True
    return replace(state, length=length, success_count=succ, fail_count=fail, restarted=restarted)


def run_turbo1(
    cfg: FalsifierConfig, stack, spec: SpecFormula, costs, fidelity: int | None = None
) -> RunRecord:
    """Single-trust-region BO on one fidelity level.

    Candidates are drawn inside the box ``center +- L/2`` (clipped to the unit
    box); a query counts as a success when it strictly improves the best
    robustness seen since the last restart. The GP keeps all data but its
    posterior is rebuilt from the observations inside the current region.
    """
    fidelity = fidelity or cfg.fidelity or stack.q
    lam = _single_cost(costs, fidelity, stack.q)
    space = stack.space
    rng = _derived_rng(cfg.seed, _TAG_TURBO)

    state_box: dict = {
        "state": None,  # TurboState, created once the init design is in
        "best": np.inf,
        "unit_points": [],
        "values": [],
    }

    def ensure_state():
        if state_box["state"] is None:
            values = np.asarray(state_box["values"])
            best_idx = int(np.argmin(values))
            state_box["best"] = float(values[best_idx])
            state_box["state"] = TurboState(
                center=state_box["unit_points"][best_idx],
                tau_succ=cfg.turbo_tau_succ,
                tau_fail=cfg.turbo_tau_fail,
            )

    def candidates_fn(t, surrogate):
        if state_box["state"] is None:
            state_box["unit_points"] = [np.asarray(u) for u in surrogate.inputs[0]]
            state_box["values"] = list(surrogate.outputs[0])
        ensure_state()
        state: TurboState = state_box["state"]
        lo = np.clip(state.center - state.length / 2.0, 0.0, 1.0)
        hi = np.clip(state.center + state.length / 2.0, 0.0, 1.0)
        base = sample_candidates(space.dim, cfg.acquisition.n_candidates,
                                 seed=_derived_seed(cfg.seed, _TAG_CAND, t))
        return CandidateSet(points=lo + base.points * (hi - lo))

    def posterior_mask():
        state: TurboState = state_box["state"]
        points = np.asarray(state_box["unit_points"])
        lo = state.center - state.length / 2.0 - 1e-12
        hi = state.center + state.length / 2.0 + 1e-12
        mask = np.all((points >= lo) & (points <= hi), axis=1)
        if mask.sum() < max(space.dim + 1, 4):
            mask = np.ones(len(points), dtype=bool)
        return mask

    def after_query(t, u, model_level, rho):
        state_box["unit_points"].append(np.asarray(u))
        state_box["values"].append(float(rho))
        success = rho < state_box["best"]
        if success:
            state_box["best"] = float(rho)
        state = turbo_update(state_box["state"], success)
        if state.restarted:
            center = rng.random(space.dim)
            state = replace(state, center=center)
            state_box["best"] = np.inf
        elif success:
            state = replace(state, center=np.asarray(u))
        state_box["state"] = state

    return _run_loop(
        stack,
        [fidelity],
        spec,
        [lam],
        cfg,
        method=f"turbo1:{fidelity}",
        candidates_fn=candidates_fn,
        after_query=after_query,
        posterior_mask=posterior_mask,
    )


# --- piBO -----------------------------------------------------------------------


@dataclass(frozen=True)
class PiBoPrior:
    """U-shaped expert prior: per dimension, two edge-centered Gaussians.

    Defined over the unit box (the normalized uncertainty space); renormalized
    numerically so it integrates to one over the box.
    """

    dim: int
    beta_star: float = PIBO_BETA_STAR
    edge_std: float = PIBO_EDGE_STD

    def __post_init__(self):
        if self.dim < 1 or self.edge_std <= 0:
            raise InvalidInputError("invalid prior shape")

    def _mixture(self, u: np.ndarray) -> np.ndarray:
        s = self.edge_std
        left = np.exp(-0.5 * (u / s) ** 2)
        right = np.exp(-0.5 * ((u - 1.0) / s) ** 2)
        return (left + right) / (2.0 * s * np.sqrt(2.0 * np.pi))

    @property
    def _normalizer(self) -> float:
        grid = np.linspace(0.0, 1.0, PIBO_NORMALIZATION_GRID)
        return float(np.trapz(self._mixture(grid), grid))

    def log_density(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float).reshape(-1)
        if len(u) != self.dim:
            raise InvalidInputError("point dimension does not match prior")
        return float(np.sum(np.log(self._mixture(u))) - self.dim * np.log(self._normalizer))

    def density(self, u: np.ndarray) -> float:
        return float(np.exp(self.log_density(u)))


def pibo_weight(prior: PiBoPrior, e: np.ndarray, n: int) -> float:
    """Acquisition multiplier ``pi(e)^(beta*/n)``; decays to 1 as data accrues."""
    if n < 1:
        raise InvalidInputError("iteration count must be >= 1")
    return float(np.exp((prior.beta_star / n) * prior.log_density(e)))


def run_pibo(
    cfg: FalsifierConfig, stack, spec: SpecFormula, costs, fidelity: int | None = None
) -> RunRecord:
    """Single-fidelity BO with the edge-weighted expert prior on the optimum."""
    fidelity = fidelity or cfg.fidelity or stack.q
    lam = _single_cost(costs, fidelity, stack.q)
    prior = PiBoPrior(dim=stack.space.dim, beta_star=cfg.pibo_beta_star, edge_std=cfg.pibo_edge_std)

    def select_fn(post, candidates, lambdas, es_cfg, diagnostics, t):
        scores = es_matrix(post, candidates, es_cfg)
        weights = np.asarray([pibo_weight(prior, u, t) for u in candidates.points])
        weighted = scores * weights[:, None]
        j, level = argmax_cost_scaled(weighted, np.asarray(lambdas))
        diagnostics["per_fidelity_best"] = [float(v) for v in (weighted / np.asarray(lambdas)).max(axis=0)]
        diagnostics["selected_es"] = float(scores[j, level - 1])
        diagnostics["prior_weight"] = float(weights[j])
        diagnostics["candidate_index"] = j
        return candidates.points[j].copy(), level

    return _run_loop(
        stack, [fidelity], spec, [lam], cfg, method=f"pibo:{fidelity}", select_fn=select_fn
    )


# --- validation and cost metrics --------------------------------------------------


@dataclass
class ValidationResult:
    reliability_percent: float | None
    total: int
    validated: int


def validate_counterexamples(record: RunRecord, stack, spec: SpecFormula) -> ValidationResult:
    """Re-check low-fidelity counterexamples on the top-fidelity simulator.

    Counterexamples found at the top level are real by definition; the rest
    are re-simulated with a fresh (deterministically derived) seed and count
    as validated iff the top-fidelity robustness is negative. Reliability is
    the validated percentage, or None when the record has no counterexamples.
    """
    total = len(record.counterexamples)
    validated = 0
    for idx, ce in enumerate(record.counterexamples):
        if ce.found_at_fidelity == stack.q:
            ce.validated = True
            ce.rho_at_q = ce.rho
        else:
            seed = _derived_seed(record.seed, _TAG_VALIDATE, idx)
            traj = stack.simulate(ce.e, stack.q, seed)
            rho_q = eval_robustness(spec, traj).value
            ce.validated = bool(rho_q < 0)
            ce.rho_at_q = rho_q
            ce.validation_seed = seed
        validated += int(ce.validated)
    if total == 0:
        return ValidationResult(reliability_percent=None, total=0, validated=0)
    return ValidationResult(
        reliability_percent=100.0 * validated / total, total=total, validated=validated
    )


def cost_per_counterexample(record: RunRecord, validated_only: bool = False) -> float | None:
    """Total campaign cost divided by the number of (validated) counterexamples.

    None when the denominator is zero; never raises on empty records.
    """
    if validated_only:
        count = sum(1 for ce in record.counterexamples if ce.validated)
    else:
        count = len(record.counterexamples)
    if count == 0:
        return None
    return record.cumulative_cost / count


def first_validated_cost(record: RunRecord, stack, spec: SpecFormula) -> float | None:
    """Cumulative cost at the first counterexample that holds up at top fidelity."""
    for ce in sorted(record.counterexamples, key=lambda c: c.entry_index):
        if ce.validated is None:
            if ce.found_at_fidelity == stack.q:
                ce.validated = True
                ce.rho_at_q = ce.rho
            else:
                seed = _derived_seed(record.seed, _TAG_VALIDATE, 10_000 + ce.entry_index)
                rho_q = eval_robustness(spec, stack.simulate(ce.e, stack.q, seed)).value
                ce.validated = bool(rho_q < 0)
                ce.rho_at_q = rho_q
        if ce.validated:
            return record.entries[ce.entry_index].cumulative_cost
    return None


def robustness_of(spec: SpecFormula, traj) -> RobustnessValue:
    return eval_robustness(spec, traj)


__all__ = [
    "AcquisitionSettings",
    "FalsifierConfig",
    "IterationEntry",
    "Counterexample",
    "RunRecord",
    "TurboState",
    "PiBoPrior",
    "turbo_update",
    "pibo_weight",
    "run_mfbo",
    "run_bo_single",
    "run_turbo1",
    "run_pibo",
    "validate_counterexamples",
    "cost_per_counterexample",
    "first_validated_cost",
    "default_init_sizes",
    "is_falsified",
]
