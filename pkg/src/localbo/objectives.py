"""Benchmark objectives behind one noisy-evaluation contract.

Every objective is pure given (x, eval_seed): the reported value is
f(x) + sigma * eps with eps keyed deterministically by the eval seed, so
replications are exactly replayable. Synthetic objectives are prior GP paths
(random Fourier features) with analytic values and gradients; the cart-pole
objective is a from-scratch physics rollout whose only randomness is the
seeded initial state.
"""
from __future__ import annotations

import numpy as np

from ._backend import core
from .gp import GpPath, eval_path, eval_path_grad, sample_prior_path
from .inner_opt import Box
from .kernels import KernelSpec


class DomainError(ValueError):
    """Evaluation requested outside the objective's box."""


class Objective:
    """Evaluation contract: bounded box, seeded noisy observations.

    Subclasses set ``has_true_value`` / ``has_true_gradient`` capability
    flags and implement ``true_value`` (and optionally ``true_gradient``).
    ``maximize`` marks reward-style objectives; algorithms always minimize,
    so the harness flips the sign of observations for those.
    """

    name: str = "objective"
    maximize: bool = False
    has_true_value: bool = True
    has_true_gradient: bool = False

    def __init__(self, dim: int, box: Box, noise_sigma: float, noise_key: int = 0):
        if noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        self.dim = dim
        self.box = box
        self.noise_sigma = float(noise_sigma)
        self.noise_key = int(noise_key)

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DomainError(f"point has dimension {x.size}, objective expects {self.dim}")
        if not self.box.contains(x, tol=1e-9):
            raise DomainError(f"point {x} outside the objective box")
        return x

    def true_value(self, x) -> float:
        raise NotImplementedError

    def true_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def eval_noisy(self, x, eval_seed: int) -> float:
        """f(x) plus one N(0, sigma^2) draw keyed by ``eval_seed``."""
        x = self._check(x)
        value = self.true_value(x)
        if self.noise_sigma == 0.0:
            return float(value)
        eps = np.random.default_rng(np.random.SeedSequence((self.noise_key, int(eval_seed)))).standard_normal()
        return float(value + self.noise_sigma * eps)


class SyntheticGp(Objective):
    """A GP prior path on the unit hypercube, with analytic gradient."""

    name = "synthetic"
    has_true_gradient = True

    def __init__(self, path: GpPath, noise_sigma: float, noise_key: int):
        d = path.freqs.shape[1]
        super().__init__(d, Box.cube(d, 0.0, 1.0), noise_sigma, noise_key)
        self.path = path

    def true_value(self, x) -> float:
        return float(eval_path(self.path, np.asarray(x, dtype=float).reshape(-1)))

    def true_gradient(self, x) -> np.ndarray:
        return eval_path_grad(self.path, np.asarray(x, dtype=float).reshape(-1))


def make_synthetic(d: int, kernel: KernelSpec, noise_sigma: float, num_features: int, seed: int) -> SyntheticGp:
    """Sample a synthetic objective from the GP prior with the given kernel."""
    if d < 1:
        raise ValueError("d must be >= 1")
    path = sample_prior_path(kernel, d, num_features, seed)
    return SyntheticGp(path, noise_sigma, noise_key=seed)


# ---------------------------------------------------------------------------
# Cart-pole
# ---------------------------------------------------------------------------

CARTPOLE_MAX_STEPS = 500


def cartpole_reward(theta, episode_seed: int) -> float:
    """Episode reward of the linear threshold policy ``theta`` (4 weights).

    The initial state is perturbed uniformly in [-0.05, 0.05]^4 by the
    episode seed; dynamics and termination limits follow the standard
    published cart-pole constants (Euler integration at 0.02 s, cap 500).
    """
    theta = np.ascontiguousarray(np.asarray(theta, dtype=float).reshape(-1))
    if theta.size != 4 or not np.all(np.isfinite(theta)):
        raise ValueError("theta must be a finite vector of 4 policy weights")
    rng = np.random.default_rng(np.random.SeedSequence((0xCA57, int(episode_seed))))
    state0 = rng.uniform(-0.05, 0.05, 4)
    return float(core.cartpole_episode(theta, state0, CARTPOLE_MAX_STEPS))


class CartPole(Objective):
    """Linear policy search on the from-scratch cart-pole episode.

    Observation noise comes only from the seeded initial-state perturbation;
    the per-episode reward is the noisy observation.
    """

    name = "cartpole"
    maximize = True
    has_true_value = False
    has_true_gradient = False

    def __init__(self, box_halfwidth: float = 1.0):
        super().__init__(4, Box.cube(4, -box_halfwidth, box_halfwidth), noise_sigma=0.0)

    def eval_noisy(self, x, eval_seed: int) -> float:
        return cartpole_reward(self._check(x), eval_seed)


# ---------------------------------------------------------------------------
# Classical test functions
# ---------------------------------------------------------------------------

class Sphere(Objective):
    name = "sphere"
    has_true_gradient = True

    def __init__(self, dim: int = 2, noise_sigma: float = 0.0):
        super().__init__(dim, Box.cube(dim, -2.0, 2.0), noise_sigma)

    def true_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sum(x * x))

    def true_gradient(self, x) -> np.ndarray:
        return 2.0 * np.asarray(x, dtype=float).reshape(-1)


class Rosenbrock(Objective):
    name = "rosenbrock"
    has_true_gradient = True

    def __init__(self, dim: int = 2, noise_sigma: float = 0.0):
        if dim < 2:
            raise ValueError("Rosenbrock needs dim >= 2")
        super().__init__(dim, Box.cube(dim, -2.0, 2.0), noise_sigma)

    def true_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def true_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        g = np.zeros_like(x)
        g[:-1] = -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
        return g


def standard_test_functions(name: str, dim: int = 2, noise_sigma: float = 0.0) -> Objective:
    """Sphere or Rosenbrock by name, for optimizer sanity checks."""
    table = {"sphere": Sphere, "rosenbrock": Rosenbrock}
    if name not in table:
        raise ValueError(f"unknown test function {name!r}; expected one of {sorted(table)}")
    return table[name](dim=dim, noise_sigma=noise_sigma)
