"""Experiment harness: seeded replications, persisted traces, summaries.

A single YAML config describes the objective, the surrogate, the algorithm
list, and the budget/replication counts. ``run_experiment`` executes every
(algorithm, replication) pair, writing one JSONL trace per pair plus a
summary CSV and a manifest. Replication r uses seed ``base_seed + r``; the
synthetic objective draws a fresh GP path per replication and all algorithms
within a replication share the same path and the same Sobol starting point,
so any single replication can be replayed independently.

Trace files contain no wall-clock data: identical config and seed produce
byte-identical artifacts (timings live in the manifest).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import qmc

from . import __version__
from .acquisition import LookaheadConfig
from .algorithms import (
    GiboConfig,
    ObservationMap,
    OptSettings,
    RunTrace,
    ScheduleSpec,
    SurrogateConfig,
    run_gibo,
    run_la_minucb,
    run_minucb,
    run_random_search,
)
from .gp import (
    Dataset,
    eval_path,
    eval_path_grad,
    eval_path_hess,
    fit,
    posterior_mean_grad,
    posterior_mean_many,
    posterior_var_many,
    sample_prior_path,
)
from .kernels import KernelSpec
from .objectives import CartPole, Objective, make_synthetic, standard_test_functions

ENV_OUTPUT_ROOT = "BENCH_OUT_ROOT"
KNOWN_ALGORITHMS = ("gibo", "minucb", "la-minucb", "random")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    budget: int
    replications: int
    base_seed: int
    output_dir: str | None
    objective: dict
    model: dict
    inner_opt: OptSettings
    algorithms: list
    raw: dict

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


def _require(table: dict, key: str, context: str):
    if key not in table:
        raise ConfigError(f"missing key {key!r} in {context}")
    return table[key]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"cannot parse {path}{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    exp = _require(raw, "experiment", "config")
    objective = _require(raw, "objective", "config")
    algorithms = _require(raw, "algorithms", "config")
    if not isinstance(algorithms, list) or not algorithms:
        raise ConfigError("algorithms must be a non-empty list")
    for alg in algorithms:
        name = _require(alg, "name", "algorithms entry")
        if name not in KNOWN_ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}; expected one of {KNOWN_ALGORITHMS}")
    replications = int(exp.get("replications", 1))
    budget = int(_require(exp, "budget", "experiment"))
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    kind = _require(objective, "kind", "objective")
    if kind not in ("synthetic", "cartpole", "sphere", "rosenbrock"):
        raise ConfigError(f"unknown objective kind {kind!r}")
    opt_raw = raw.get("inner_opt", {})
    opt = OptSettings(
        restarts=int(opt_raw.get("restarts", 4)),
        max_iter=int(opt_raw.get("max_iter", 120)),
        grad_tol=float(opt_raw.get("grad_tol", 1e-8)),
        explore_restarts=int(opt_raw.get("explore_restarts", 2)),
        explore_max_iter=int(opt_raw.get("explore_max_iter", 80)),
        init_scale=float(opt_raw.get("init_scale", 0.1)),
    )
    return ExperimentConfig(
        name=str(exp.get("name", "experiment")),
        budget=budget,
        replications=replications,
        base_seed=int(exp.get("base_seed", 0)),
        output_dir=exp.get("output_dir"),
        objective=objective,
        model=raw.get("model", {}),
        inner_opt=opt,
        algorithms=algorithms,
        raw=raw,
    )


def _kernel_from_table(table: dict, dim: int, context: str) -> KernelSpec:
    family = str(table.get("family", "rbf"))
    ls = table.get("lengthscale", float(np.sqrt(2.0)))
    s2 = float(table.get("signal_variance", 1.0))
    if np.isscalar(ls):
        return KernelSpec.isotropic(family, dim, float(ls), s2)
    ls = np.asarray(ls, dtype=float)
    if ls.size != dim:
        raise ConfigError(f"{context}: lengthscale array has {ls.size} entries, objective dimension is {dim}")
    return KernelSpec(family, ls, s2)


def build_objective(cfg: ExperimentConfig, replication_seed: int) -> Objective:
    obj = cfg.objective
    kind = obj["kind"]
    if kind == "synthetic":
        dim = int(_require(obj, "dim", "objective"))
        kernel = _kernel_from_table(obj.get("kernel", {}), dim, "objective.kernel")
        return make_synthetic(
            dim, kernel,
            noise_sigma=float(obj.get("noise_sigma", 0.1)),
            num_features=int(obj.get("num_features", 1024)),
            seed=replication_seed,
        )
    if kind == "cartpole":
        return CartPole(box_halfwidth=float(obj.get("box_halfwidth", 1.0)))
    return standard_test_functions(kind, dim=int(obj.get("dim", 2)), noise_sigma=float(obj.get("noise_sigma", 0.0)))


def build_surrogate(cfg: ExperimentConfig, objective: Objective) -> SurrogateConfig:
    model = dict(cfg.model)
    if not model and objective.name == "synthetic":
        model = dict(cfg.objective.get("kernel", {}))
        model.setdefault("noise_sigma", max(float(cfg.objective.get("noise_sigma", 0.1)), 1e-3))
    kernel = _kernel_from_table(model, objective.dim, "model")
    noise = float(model.get("noise_sigma", 0.1))
    if noise <= 0:
        raise ConfigError("model.noise_sigma must be > 0")
    return SurrogateConfig(kernel, noise)


def observation_map(cfg: ExperimentConfig, objective: Objective) -> ObservationMap:
    scale = float(cfg.objective.get("scale", 500.0 if objective.name == "cartpole" else 1.0))
    return ObservationMap.for_objective(objective, scale=scale)


def starting_points(cfg: ExperimentConfig, dim: int, box) -> np.ndarray:
    """One Sobol starting point per replication, shared by all algorithms.

    ``experiment.start_margin`` (fraction of the box width, default 0) shrinks
    the sampling region away from the boundary; local-convergence diagnostics
    use it so the iterates chase interior rather than boundary minima.
    """
    margin = float(cfg.raw.get("experiment", {}).get("start_margin", 0.0))
    if not 0.0 <= margin < 0.5:
        raise ConfigError("experiment.start_margin must be in [0, 0.5)")
    sampler = qmc.Sobol(dim, scramble=True, seed=cfg.base_seed)
    count = 1 << max(int(np.ceil(np.log2(max(cfg.replications, 1)))), 0)
    points = sampler.random(count)[: cfg.replications]
    lo = box.lower + margin * box.width
    return lo + points * (1.0 - 2.0 * margin) * box.width


def _run_single(cfg: ExperimentConfig, alg: dict, replication: int) -> RunTrace:
    seed = cfg.base_seed + replication
    objective = build_objective(cfg, seed)
    surrogate = build_surrogate(cfg, objective)
    obs_map = observation_map(cfg, objective)
    x1 = starting_points(cfg, objective.dim, objective.box)[replication]
    name = alg["name"]
    opt = cfg.inner_opt
    if name == "random":
        return run_random_search(objective, cfg.budget, seed, obs_map)
    if name == "gibo":
        schedule = _schedule_from(alg, default_b2=objective.dim)
        gcfg = GiboConfig(eta=float(alg.get("eta", 0.25)), eta_decay=bool(alg.get("eta_decay", False)), schedule=schedule)
        return run_gibo(objective, x1, gcfg, cfg.budget, seed, surrogate, opt, obs_map)
    if name == "minucb":
        schedule = _schedule_from(alg, default_b2=objective.dim)
        return run_minucb(objective, x1, schedule, cfg.budget, seed, surrogate, opt, obs_map)
    schedule = _schedule_from(alg, default_b2=0)
    lookahead = LookaheadConfig(
        num_fantasies=int(alg.get("num_fantasies", 16)),
        inner_restarts=int(alg.get("inner_restarts", 8)),
    )
    return run_la_minucb(objective, schedule, lookahead, cfg.budget, seed, surrogate, opt, obs_map, x1=x1)


def _schedule_from(alg: dict, default_b2: int) -> ScheduleSpec:
    return ScheduleSpec(
        beta_mode=str(alg.get("beta_mode", "fixed")),
        beta=float(alg.get("beta", 3.0)),
        delta=float(alg.get("delta", 0.1)),
        b1_mode=str(alg.get("b1_mode", "fixed")),
        b1=int(alg.get("b1", 1)),
        b2_mode=str(alg.get("b2_mode", "fixed")),
        b2=int(alg.get("b2", default_b2)),
        b_lookahead=int(alg.get("batch", 1)),
    )


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

def trace_filename(algorithm: str, replication: int) -> str:
    return f"{algorithm}_rep{replication:03d}.jsonl"


def trace_to_jsonl(trace: RunTrace) -> str:
    meta = {
        "algorithm": trace.algorithm,
        "seed": trace.seed,
        "dim": trace.dim,
        "budget": trace.budget,
        "maximize": trace.maximize,
        "final_x": [float(v) for v in trace.final_x] if trace.final_x is not None else None,
    }
    lines = [json.dumps(meta, sort_keys=True)]
    lines += [json.dumps(rec, sort_keys=True) for rec in trace.to_jsonl_records()]
    return "\n".join(lines) + "\n"


def read_trace_jsonl(path) -> tuple[dict, list]:
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0])
    return meta, [json.loads(line) for line in lines[1:]]


def best_so_far_from_records(records: list, maximize: bool, budget: int) -> np.ndarray:
    """Step-function best-so-far aligned on query counts 1..budget."""
    values = [v for rec in records for v in rec["y"]]
    if not values:
        return np.full(budget, np.nan)
    best = np.maximum.accumulate(values) if maximize else np.minimum.accumulate(values)
    out = np.empty(budget)
    out[: len(best)] = best[:budget]
    out[len(best):] = best[-1]
    return out


def _summary_rows(traces_by_alg: dict, budget: int) -> list[tuple]:
    rows = []
    for alg in sorted(traces_by_alg):
        curves = np.vstack(traces_by_alg[alg])
        mean = curves.mean(axis=0)
        sd = curves.std(axis=0, ddof=0)
        for i in range(budget):
            rows.append((alg, i + 1, mean[i], sd[i], curves.shape[0]))
    return rows


def _write_summary_csv(rows: list[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algorithm", "n", "mean_best", "sd_best", "replications"])
    for alg, n, mean, sd, count in rows:
        writer.writerow([alg, n, repr(float(mean)), repr(float(sd)), count])
    return buf.getvalue()


def summarize(trace_dir) -> str:
    """Rebuild the summary CSV text from the JSONL traces in a directory."""
    trace_dir = Path(trace_dir)
    files = sorted(trace_dir.glob("*_rep*.jsonl"))
    if not files:
        raise ConfigError(f"no trace files in {trace_dir}")
    traces_by_alg: dict[str, list] = {}
    budget = 0
    for f in files:
        meta, records = read_trace_jsonl(f)
        budget = max(budget, meta["budget"])
        curve = best_so_far_from_records(records, meta["maximize"], meta["budget"])
        traces_by_alg.setdefault(meta["algorithm"], []).append(curve)
    return _write_summary_csv(_summary_rows(traces_by_alg, budget))


def resolve_output_dir(cfg: ExperimentConfig, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if cfg.output_dir:
        p = Path(cfg.output_dir)
        return Path(root) / p if (root and not p.is_absolute()) else p
    return Path(root or "runs") / cfg.name


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1, overwrite: bool = False) -> Path:
    """Execute all (algorithm, replication) pairs and persist artifacts.

    Writes one JSONL trace per pair, ``summary.csv``, and ``manifest.json``.
    Refuses to reuse a directory holding artifacts unless ``overwrite``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    existing = list(out_dir.glob("*.jsonl")) + list(out_dir.glob("manifest.json")) + list(out_dir.glob("summary.csv"))
    if existing and not overwrite:
        raise ConfigError(f"{out_dir} already holds artifacts; pass --overwrite to replace them")

    tasks = [(alg, r) for alg in cfg.algorithms for r in range(cfg.replications)]
    results: dict[tuple[str, int], tuple[str, float]] = {}
    failures: dict[tuple[str, int], str] = {}
    first_error: Exception | None = None
    tic = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_task, cfg, alg, r): (alg["name"], r) for alg, r in tasks}
            for fut, key in futures.items():
                try:
                    results[key] = fut.result()
                except Exception as exc:  # noqa: BLE001 - recorded in the manifest
                    failures[key] = f"{type(exc).__name__}: {exc}"
                    first_error = first_error or exc
    else:
        for alg, r in tasks:
            try:
                results[(alg["name"], r)] = _run_task(cfg, alg, r)
            except Exception as exc:  # noqa: BLE001 - recorded in the manifest
                failures[(alg["name"], r)] = f"{type(exc).__name__}: {exc}"
                first_error = first_error or exc

    manifest = {
        "name": cfg.name,
        "config": cfg.raw,
        "config_sha256": cfg.config_hash(),
        "base_seed": cfg.base_seed,
        "budget": cfg.budget,
        "replications": cfg.replications,
        "version": __version__,
        "complete": not failures,
        "failures": [{"algorithm": a, "replication": r, "error": msg} for (a, r), msg in sorted(failures.items())],
        "total_wall_time_s": time.perf_counter() - tic,
        "runs": [],
    }
    traces_by_alg: dict[str, list] = {}
    for alg in cfg.algorithms:
        name = alg["name"]
        for r in range(cfg.replications):
            if (name, r) not in results:
                continue
            text, wall = results[(name, r)]
            fname = trace_filename(name, r)
            (out_dir / fname).write_text(text)
            manifest["runs"].append({"algorithm": name, "replication": r, "seed": cfg.base_seed + r,
                                     "file": fname, "wall_time_s": wall})
            meta, records = read_trace_jsonl(out_dir / fname)
            traces_by_alg.setdefault(name, []).append(
                best_so_far_from_records(records, meta["maximize"], cfg.budget)
            )
    if traces_by_alg:
        (out_dir / "summary.csv").write_text(_write_summary_csv(_summary_rows(traces_by_alg, cfg.budget)))
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if first_error is not None:
        raise first_error
    return out_dir


def _run_task(cfg: ExperimentConfig, alg: dict, replication: int) -> tuple[str, float]:
    tic = time.perf_counter()
    trace = _run_single(cfg, alg, replication)
    return trace_to_jsonl(trace), time.perf_counter() - tic


def replay_replication(cfg: ExperimentConfig, algorithm: str, replication: int) -> str:
    """Re-run one (algorithm, replication) pair and return its trace text,
    for verifying seed bookkeeping against a persisted artifact."""
    algs = [a for a in cfg.algorithms if a["name"] == algorithm]
    if not algs:
        raise ConfigError(f"algorithm {algorithm!r} not in config")
    return trace_to_jsonl(_run_single(cfg, algs[0], replication))


# ---------------------------------------------------------------------------
# Figure-1 style bound comparison
# ---------------------------------------------------------------------------

@dataclass
class Fig1Instance:
    grid: np.ndarray          # (m,)
    f_true: np.ndarray        # path values on the grid
    bound_quadratic: np.ndarray
    bound_gradient_step: np.ndarray
    ucb: np.ndarray
    posterior_mean: np.ndarray
    x0: float
    f0: float
    grad_true: float
    grad_mu: float
    lipschitz: float
    x_grad_step: float        # minimizer of the quadratic bound, clipped
    x_ucb_min: float          # grid argmin of the UCB curve


DEFAULT_FIG1_SEED = 42


def build_fig1_instance(
    seed: int,
    beta: float = 3.0,
    noise_sigma: float = 0.05,
    half_width: float = 3.0,
    grid_size: int = 501,
    num_features: int = 2048,
    fd_step: float = 1.0,
    min_grad_at_x0: float = 0.4,
) -> Fig1Instance:
    """One-dimensional bound-comparison instance.

    A path is drawn from the GP prior with k(x, x') = exp(-(x - x')^2 / 4);
    two noisy observations sit at the central-difference pair around a seeded
    x0, which is resampled until the path has a non-degenerate slope there
    (a gradient method must have something to do). The quadratic bound uses
    the true gradient and the path's analytic Hessian bound on the grid; the
    gradient step itself uses the estimated gradient, the only one a
    zeroth-order method can act on.
    """
    kernel = KernelSpec.isotropic("rbf", 1, float(np.sqrt(2.0)))
    rng = np.random.default_rng(seed)
    path = sample_prior_path(kernel, 1, num_features, seed)
    grid = np.linspace(-half_width, half_width, grid_size)
    f_true = eval_path(path, grid[:, None])

    x0 = float(rng.uniform(-1.5, 1.5))
    for _ in range(200):
        if abs(eval_path_grad(path, np.array([x0]))[0]) >= min_grad_at_x0:
            break
        x0 = float(rng.uniform(-1.5, 1.5))
    X = np.array([[x0 - fd_step], [x0 + fd_step]])
    y = eval_path(path, X) + noise_sigma * rng.standard_normal(2)
    model = fit(kernel, Dataset(X, y, noise_sigma))

    f0 = float(eval_path(path, np.array([x0])))
    grad_true = float(eval_path_grad(path, np.array([x0]))[0])
    grad_mu = float(posterior_mean_grad(model, np.array([x0]))[0])
    hess = np.array([float(eval_path_hess(path, np.array([g]))[0, 0]) for g in grid])
    lipschitz = float(np.max(np.abs(hess)))

    diff = grid - x0
    bound_quad = f0 + grad_true * diff + 0.5 * lipschitz * diff**2
    eta_max = 1.0 / lipschitz
    with np.errstate(divide="ignore", invalid="ignore"):
        eta_grid = (x0 - grid) / grad_mu if grad_mu != 0.0 else np.full_like(grid, np.nan)
    valid = np.isfinite(eta_grid) & (eta_grid > 0) & (eta_grid <= eta_max)
    bound_step = np.full_like(grid, np.nan)
    bound_step[valid] = (
        f0 - 0.5 * eta_grid[valid] * grad_true**2 + 0.5 * eta_grid[valid] * (grad_mu - grad_true) ** 2
    )

    mu = posterior_mean_many(model, grid[:, None])
    sd = np.sqrt(posterior_var_many(model, grid[:, None]))
    ucb_curve = mu + beta * sd

    x_grad_step = float(np.clip(x0 - grad_mu / lipschitz, -half_width, half_width))
    x_ucb_min = float(grid[int(np.argmin(ucb_curve))])
    return Fig1Instance(
        grid=grid, f_true=f_true, bound_quadratic=bound_quad, bound_gradient_step=bound_step,
        ucb=ucb_curve, posterior_mean=mu, x0=x0, f0=f0, grad_true=grad_true, grad_mu=grad_mu,
        lipschitz=lipschitz, x_grad_step=x_grad_step, x_ucb_min=x_ucb_min,
    )


def fig1_demo(seed: int, out_path) -> Fig1Instance:
    """Write the bound-comparison dataset (501 x 6 CSV) and return it."""
    inst = build_fig1_instance(seed)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "f_true", "bound_quadratic", "bound_gradient_step", "ucb", "posterior_mean"])
        for i in range(inst.grid.size):
            writer.writerow([
                repr(float(inst.grid[i])), repr(float(inst.f_true[i])), repr(float(inst.bound_quadratic[i])),
                repr(float(inst.bound_gradient_step[i])), repr(float(inst.ucb[i])), repr(float(inst.posterior_mean[i])),
            ])
    return inst
