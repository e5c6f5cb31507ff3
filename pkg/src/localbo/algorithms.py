"""Outer optimization loops: GIBO, MinUCB, LA-MinUCB, and random search.

GIBO and MinUCB share one engine -- per iteration they resample the incumbent
b1 times, sample a gradient-uncertainty-reducing batch of b2 points, update
the surrogate, then move: GIBO by a clipped gradient step on the posterior
mean, MinUCB to the UCB minimizer. LA-MinUCB replaces the exploration batch
with the one-shot look-ahead acquisition and additionally evaluates each new
incumbent.

All loops minimize; reward-style objectives are handled through an
``ObservationMap`` that flips/scales observations into model units. A run is
a deterministic function of (objective, seed, config): exploration seeds,
fantasy draws, and evaluation noise are all derived from the run seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    AlphaTraceObjective,
    LookaheadConfig,
    UcbParams,
    minimize_ucb,
    optimize_lookahead_batch,
)
from .gp import Dataset, fantasy_update, fit, posterior_mean, posterior_mean_grad
from .inner_opt import Box, minimize_matrix
from .kernels import KernelSpec
from .objectives import Objective


@dataclass(frozen=True)
class ScheduleSpec:
    """Confidence and batch-size schedules.

    ``beta_mode``: "fixed" uses ``beta``; "theoretical" uses
    beta_t = sqrt(2 ln(pi^2 t^2 / delta)), nondecreasing in t.
    ``b1_mode`` / ``b2_mode``: "fixed" or the growing families
    "logsq" (ceil(ln^2 t)), "linear" (t), "quadratic" (t^2); the b2 variants
    are additionally scaled by the input dimension. Scheduled sizes are
    clamped to >= 1; fixed sizes may be 0 (no resampling / no exploration).
    """

    beta_mode: str = "fixed"
    beta: float = 3.0
    delta: float = 0.1
    b1_mode: str = "fixed"
    b1: int = 1
    b2_mode: str = "fixed"
    b2: int = 0
    b_lookahead: int = 1

    def __post_init__(self):
        if self.beta_mode not in ("fixed", "theoretical"):
            raise ValueError(f"unknown beta_mode {self.beta_mode!r}")
        for mode in (self.b1_mode, self.b2_mode):
            if mode not in ("fixed", "logsq", "linear", "quadratic"):
                raise ValueError(f"unknown batch mode {mode!r}")
        if self.beta_mode == "fixed" and self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.beta_mode == "theoretical" and not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if self.b1 < 0 or self.b2 < 0 or self.b_lookahead < 1:
            raise ValueError("fixed batch sizes must be >= 0 (lookahead >= 1)")

    def beta_at(self, t: int) -> float:
        if self.beta_mode == "fixed":
            return self.beta
        return float(np.sqrt(2.0 * np.log(np.pi**2 * t**2 / self.delta)))

    @staticmethod
    def _grow(mode: str, fixed: int, t: int) -> int:
        if mode == "fixed":
            return fixed
        if mode == "logsq":
            return max(1, int(np.ceil(np.log(t) ** 2)))
        if mode == "linear":
            return t
        return t * t

    def b1_at(self, t: int) -> int:
        return self._grow(self.b1_mode, self.b1, t)

    def b2_at(self, t: int, dim: int) -> int:
        scale = 1 if self.b2_mode == "fixed" else dim
        return scale * self._grow(self.b2_mode, self.b2, t)


@dataclass(frozen=True)
class SurrogateConfig:
    """GP surrogate hyperparameters (fixed, not learned)."""

    kernel: KernelSpec
    noise_sigma: float


@dataclass(frozen=True)
class OptSettings:
    """Inner-optimization effort knobs (harness config section ``inner_opt``)."""

    restarts: int = 4
    max_iter: int = 120
    grad_tol: float = 1e-8
    explore_restarts: int = 2
    explore_max_iter: int = 80
    init_scale: float = 0.1  # exploration start spread, in lengthscale units


@dataclass(frozen=True)
class GiboConfig:
    eta: float = 0.25
    eta_decay: bool = False  # eta_t = eta / t when set
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be > 0")

    def eta_at(self, t: int) -> float:
        return self.eta / t if self.eta_decay else self.eta


@dataclass(frozen=True)
class ObservationMap:
    """Maps user-facing observations into the minimized model units."""

    sign: float = 1.0   # -1 flips reward maximization into minimization
    scale: float = 1.0  # user units per model unit

    @classmethod
    def for_objective(cls, objective: Objective, scale: float = 1.0) -> "ObservationMap":
        return cls(sign=-1.0 if objective.maximize else 1.0, scale=scale)

    def to_model(self, y_user: float) -> float:
        return self.sign * y_user / self.scale

    def to_user(self, y_model: float) -> float:
        return self.sign * y_model * self.scale


@dataclass
class IterationRecord:
    t: int
    x_t: np.ndarray
    X: np.ndarray              # queried batch, shape (q, d)
    y_user: np.ndarray         # observations in user-facing units
    incumbent_estimate: float  # posterior mean at x_t, user-facing
    best_observed: float       # best raw observation so far, user-facing
    beta_t: float
    b1: int
    b2: int
    n_cum: int
    wall_time_s: float         # in-memory only; excluded from serialized traces


@dataclass
class RunTrace:
    algorithm: str
    seed: int
    dim: int
    budget: int
    maximize: bool
    records: list[IterationRecord] = field(default_factory=list)
    final_x: np.ndarray | None = None

    @property
    def total_queries(self) -> int:
        return self.records[-1].n_cum if self.records else 0

    def query_values_user(self) -> np.ndarray:
        """All observations, flattened in query order (user-facing units)."""
        if not self.records:
            return np.zeros(0)
        return np.concatenate([r.y_user for r in self.records])

    def best_so_far_user(self) -> np.ndarray:
        """Best observation after each query (user-facing, sign-corrected)."""
        vals = self.query_values_user()
        return np.maximum.accumulate(vals) if self.maximize else np.minimum.accumulate(vals)

    def to_jsonl_records(self) -> list[dict]:
        """Serializable per-iteration records (wall time intentionally absent,
        so reruns of the same seeded config are byte-identical)."""
        out = []
        for r in self.records:
            out.append(
                {
                    "t": r.t,
                    "x_t": [float(v) for v in r.x_t],
                    "X": [[float(v) for v in row] for row in r.X],
                    "y": [float(v) for v in r.y_user],
                    "incumbent_estimate": float(r.incumbent_estimate),
                    "best_observed": float(r.best_observed) if np.isfinite(r.best_observed) else None,
                    "beta_t": float(r.beta_t),
                    "b1": int(r.b1),
                    "b2": int(r.b2),
                    "n_cum": int(r.n_cum),
                }
            )
        return out


class _RunState:
    """Shared bookkeeping: surrogate updates, budgeted evaluation, tracking."""

    def __init__(self, objective, surrogate, obs_map, budget, seed, trace):
        self.objective = objective
        self.obs_map = obs_map
        self.budget = budget
        self.seed = seed
        self.trace = trace
        self.model = fit(surrogate.kernel, Dataset.empty(objective.dim, surrogate.noise_sigma))
        self.queries = 0
        self.best_model_units = np.inf
        self.best_x: np.ndarray | None = None

    @property
    def remaining(self) -> int:
        return self.budget - self.queries

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Evaluate rows of X (within budget), update the surrogate, return
        user-facing observations."""
        X = np.atleast_2d(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        if X.shape[0] > self.remaining:
            raise RuntimeError("internal budget accounting error")
        y_user = np.empty(X.shape[0])
        for i, row in enumerate(X):
            eval_seed = self.seed * 1_000_003 + self.queries + i
            y_user[i] = self.objective.eval_noisy(self.objective.box.clip(row), eval_seed)
        self.queries += X.shape[0]
        y_model = np.array([self.obs_map.to_model(v) for v in y_user])
        self.model = fantasy_update(self.model, X, y_model)
        i_best = int(np.argmin(y_model))
        if y_model[i_best] < self.best_model_units:
            self.best_model_units = float(y_model[i_best])
            self.best_x = X[i_best].copy()
        return y_user

    def best_observed_user(self) -> float:
        return self.obs_map.to_user(self.best_model_units)

    def incumbent_estimate_user(self, x_t: np.ndarray) -> float:
        return self.obs_map.to_user(posterior_mean(self.model, x_t))

    def ucb_warm_starts(self, x_t: np.ndarray) -> list[np.ndarray]:
        warm = [x_t]
        if self.best_x is not None:
            warm.append(self.best_x)
        return warm


def _explore_alpha_batch(state: _RunState, x_t: np.ndarray, b2: int, opt: OptSettings, seed: int) -> np.ndarray:
    """argmin_Z alpha_trace(x_t, Z) over Z in box^b2 (analytic gradient)."""
    if b2 == 0:
        return np.zeros((0, state.objective.dim))
    box = state.objective.box
    ctx = AlphaTraceObjective(state.model, x_t)
    scale = opt.init_scale * float(np.mean(state.model.kernel.lengthscales))
    rng = np.random.default_rng(seed)
    warm = [
        box.clip(x_t[None, :] + scale * rng.standard_normal((b2, state.objective.dim)))
        for _ in range(max(opt.explore_restarts, 1))
    ]
    Z, _ = minimize_matrix(
        ctx.value_and_grad, box, b2, len(warm), seed, warm_starts=warm,
        max_iter=opt.explore_max_iter, fused=True,
    )
    return Z


def _engine_gibo_minucb(
    objective: Objective,
    x1,
    schedule: ScheduleSpec,
    budget: int,
    seed: int,
    surrogate: SurrogateConfig,
    opt: OptSettings,
    obs_map: ObservationMap,
    exploit: str,
    gibo_cfg: GiboConfig | None,
    algorithm: str,
) -> RunTrace:
    box = objective.box
    trace = RunTrace(algorithm=algorithm, seed=seed, dim=objective.dim, budget=budget, maximize=objective.maximize)
    state = _RunState(objective, surrogate, obs_map, budget, seed, trace)
    x_t = box.clip(np.asarray(x1, dtype=float).reshape(-1))
    t = 0
    while state.remaining > 0:
        t += 1
        tic = time.perf_counter()
        beta_t = schedule.beta_at(t)
        b1 = min(schedule.b1_at(t), state.remaining)
        b2 = min(schedule.b2_at(t, objective.dim), state.remaining - b1)
        X1 = np.tile(x_t, (b1, 1))
        X2 = _explore_alpha_batch(state, x_t, b2, opt, seed * 10_007 + t)
        X = np.vstack([X1, X2])
        y_user = state.evaluate(X)

        if exploit == "gradient":
            eta_t = gibo_cfg.eta_at(t)
            x_next = box.clip(x_t - eta_t * posterior_mean_grad(state.model, x_t))
        else:
            x_next, _ = minimize_ucb(
                state.model, UcbParams(beta_t), box, opt.restarts, seed * 30_011 + t,
                warm_starts=state.ucb_warm_starts(x_t), max_iter=opt.max_iter,
            )
        trace.records.append(
            IterationRecord(
                t=t, x_t=x_t.copy(), X=X, y_user=y_user,
                incumbent_estimate=state.incumbent_estimate_user(x_t),
                best_observed=state.best_observed_user(),
                beta_t=beta_t, b1=b1, b2=b2, n_cum=state.queries,
                wall_time_s=time.perf_counter() - tic,
            )
        )
        x_t = x_next
        if X.shape[0] == 0:
            break  # empty batch: the model cannot change, so neither can x_t
    trace.final_x = x_t
    return trace


def run_gibo(
    objective: Objective,
    x1,
    cfg: GiboConfig,
    budget: int,
    seed: int,
    surrogate: SurrogateConfig,
    opt: OptSettings = OptSettings(),
    obs_map: ObservationMap | None = None,
) -> RunTrace:
    """Gradient-informed local search: explore to pin down the gradient at the
    incumbent, then step along the posterior mean gradient (clipped to the
    box). No incumbent resampling: the whole batch comes from the
    gradient-uncertainty acquisition."""
    obs_map = obs_map or ObservationMap.for_objective(objective)
    schedule = replace(cfg.schedule, b1_mode="fixed", b1=0)
    return _engine_gibo_minucb(
        objective, x1, schedule, budget, seed, surrogate, opt, obs_map,
        exploit="gradient", gibo_cfg=cfg, algorithm="gibo",
    )


def run_minucb(
    objective: Objective,
    x1,
    schedule: ScheduleSpec,
    budget: int,
    seed: int,
    surrogate: SurrogateConfig,
    opt: OptSettings = OptSettings(),
    obs_map: ObservationMap | None = None,
    _exploit: str = "ucb",
    _gibo_cfg: GiboConfig | None = None,
) -> RunTrace:
    """MinUCB: resample the incumbent, explore to reduce gradient uncertainty,
    then move to the minimizer of mu + beta_t * sigma."""
    obs_map = obs_map or ObservationMap.for_objective(objective)
    return _engine_gibo_minucb(
        objective, x1, schedule, budget, seed, surrogate, opt, obs_map,
        exploit=_exploit, gibo_cfg=_gibo_cfg, algorithm="minucb" if _exploit == "ucb" else "gibo",
    )


def run_la_minucb(
    objective: Objective,
    schedule: ScheduleSpec,
    lookahead: LookaheadConfig,
    budget: int,
    seed: int,
    surrogate: SurrogateConfig,
    opt: OptSettings = OptSettings(),
    obs_map: ObservationMap | None = None,
    x1=None,
) -> RunTrace:
    """LA-MinUCB: sample the batch minimizing the expected post-batch UCB
    minimum (one-shot optimization), move to the UCB minimizer, and evaluate
    the new incumbent as well."""
    obs_map = obs_map or ObservationMap.for_objective(objective)
    box = objective.box
    trace = RunTrace(algorithm="la-minucb", seed=seed, dim=objective.dim, budget=budget, maximize=objective.maximize)
    state = _RunState(objective, surrogate, obs_map, budget, seed, trace)
    x_t = box.clip(np.asarray(x1, dtype=float).reshape(-1)) if x1 is not None else box.center
    t = 0
    beta_t = schedule.beta_at(1)
    while state.remaining > 0:
        t += 1
        tic = time.perf_counter()
        beta_t = schedule.beta_at(t)
        b = min(schedule.b_lookahead, max(state.remaining - 1, 0))
        if b >= 1:
            la_cfg = LookaheadConfig(
                num_fantasies=lookahead.num_fantasies,
                inner_restarts=lookahead.inner_restarts,
                seed=seed * 20_011 + t,
                inner_grid=lookahead.inner_grid,
            )
            Z, _ = optimize_lookahead_batch(
                state.model, b, UcbParams(beta_t), la_cfg, box, x_t,
                restarts=opt.explore_restarts, seed=seed * 40_009 + t,
                max_iter=opt.explore_max_iter,
                init_scale=opt.init_scale * float(np.mean(surrogate.kernel.lengthscales)),
            )
        else:
            Z = np.zeros((0, objective.dim))
        y_batch = state.evaluate(Z)
        x_next, _ = minimize_ucb(
            state.model, UcbParams(beta_t), box, opt.restarts, seed * 30_011 + t,
            warm_starts=state.ucb_warm_starts(x_t), max_iter=opt.max_iter,
        )
        y_step = state.evaluate(x_next[None, :])
        trace.records.append(
            IterationRecord(
                t=t, x_t=x_t.copy(), X=np.vstack([Z, x_next[None, :]]),
                y_user=np.concatenate([y_batch, y_step]),
                incumbent_estimate=state.incumbent_estimate_user(x_next),
                best_observed=state.best_observed_user(),
                beta_t=beta_t, b1=0, b2=b, n_cum=state.queries,
                wall_time_s=time.perf_counter() - tic,
            )
        )
        x_t = x_next
    final_x, _ = minimize_ucb(
        state.model, UcbParams(beta_t), box, opt.restarts, seed * 30_011 + t + 1,
        warm_starts=state.ucb_warm_starts(x_t), max_iter=opt.max_iter,
    )
    trace.final_x = final_x
    return trace


def run_random_search(
    objective: Objective,
    budget: int,
    seed: int,
    obs_map: ObservationMap | None = None,
) -> RunTrace:
    """Uniform draws in the box; baseline."""
    obs_map = obs_map or ObservationMap.for_objective(objective)
    box = objective.box
    trace = RunTrace(algorithm="random", seed=seed, dim=objective.dim, budget=budget, maximize=objective.maximize)
    rng = np.random.default_rng(seed)
    best_user = None
    best_model = np.inf
    for t in range(1, budget + 1):
        tic = time.perf_counter()
        x = box.lower + rng.random(objective.dim) * box.width
        y = objective.eval_noisy(x, seed * 1_000_003 + t - 1)
        y_model = obs_map.to_model(y)
        if y_model < best_model:
            best_model = y_model
            best_user = y
        trace.records.append(
            IterationRecord(
                t=t, x_t=x.copy(), X=x[None, :], y_user=np.array([y]),
                incumbent_estimate=y, best_observed=best_user,
                beta_t=0.0, b1=0, b2=1, n_cum=t,
                wall_time_s=time.perf_counter() - tic,
            )
        )
    if trace.records:
        trace.final_x = trace.records[int(np.argmin([obs_map.to_model(r.best_observed) for r in trace.records]))].X[0]
    return trace


def grad_norm_diagnostic(trace: RunTrace, objective: Objective) -> np.ndarray:
    """||grad f(x_t)|| per iteration, using the objective's true gradient."""
    if not objective.has_true_gradient:
        raise ValueError("objective does not expose a true gradient")
    return np.array([float(np.linalg.norm(objective.true_gradient(r.x_t))) for r in trace.records])


def error_function_estimate(
    kernel: KernelSpec,
    d: int,
    sigma: float,
    b: int,
    restarts: int,
    seed: int,
    max_iter: int = 150,
) -> float:
    """Upper estimate of the best achievable gradient-covariance trace at the
    origin using b fresh noisy samples and no prior data.

    Minimizes alpha_trace over Z in R^{b x d} (restricted to a box of +/- 3
    lengthscales, beyond which samples carry no gradient information), warm
    started from central-difference constructions at several step scales.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    model = fit(kernel, Dataset.empty(d, sigma))
    ctx = AlphaTraceObjective(model, np.zeros(d))
    if b == 0:
        return ctx.base_trace
    ls_max = float(np.max(kernel.lengthscales))
    box = Box.cube(d, -3.0 * ls_max, 3.0 * ls_max)

    warm = []
    for h in (0.05, 0.1, 0.2, 0.4, 0.8):
        Z = np.zeros((b, d))
        for j in range(b):
            dim = (j // 2) % d
            Z[j, dim] = (1.0 if j % 2 == 0 else -1.0) * h * ls_max
        warm.append(Z)
    _, val = minimize_matrix(
        ctx.value_and_grad, box, b, max(restarts, len(warm)), seed,
        warm_starts=warm, max_iter=max_iter, fused=True,
    )
    return min(float(val), ctx.base_trace)
