"""Deterministic multi-start box-constrained minimization.

Every acquisition optimization in the package funnels through ``minimize`` /
``minimize_matrix``: projected quasi-Newton descents (L-BFGS-B) started from
caller-supplied warm starts plus scrambled Sobol fills. Given the same seed
the start set, the descents, and the winner-selection are all deterministic;
ties are resolved by restart index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import fmin_l_bfgs_b
from scipy.stats import qmc


class OptFailure(RuntimeError):
    """All restarts produced non-finite objective values."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounded domain: lower < upper componentwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("box requires lower < upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, lower: float, upper: float) -> "Box":
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def sobol(self, count: int, seed: int) -> np.ndarray:
        """Scrambled low-discrepancy points inside the box, shape (count, d)."""
        if count <= 0:
            return np.zeros((0, self.dim))
        sampler = qmc.Sobol(self.dim, scramble=True, seed=seed)
        draw = 1 << int(np.ceil(np.log2(count)))  # power-of-2 draw, then slice
        return self.lower + sampler.random(draw)[:count] * self.width

    def stack(self, rows: int) -> "Box":
        """Product box over ``rows`` copies, for matrix-valued decisions."""
        return Box(np.tile(self.lower, rows), np.tile(self.upper, rows))


@dataclass
class OptReport:
    x_star: np.ndarray
    f_star: float
    restarts_used: int
    converged: list[bool]


def _central_diff_grad(objective, box: Box):
    h = 1e-6 * box.width

    def grad(x):
        g = np.empty_like(x)
        for i in range(x.size):
            step = h[i]
            xp = x.copy()
            xm = x.copy()
            xp[i] = min(x[i] + step, box.upper[i])
            xm[i] = max(x[i] - step, box.lower[i])
            denom = xp[i] - xm[i]
            g[i] = (objective(xp) - objective(xm)) / denom if denom > 0 else 0.0
        return g

    return grad


def minimize(
    objective,
    gradient,
    box: Box,
    restarts: int,
    seed: int,
    warm_starts=(),
    max_iter: int = 200,
    grad_tol: float = 1e-8,
    fused: bool = False,
) -> OptReport:
    """Best-of-restarts projected quasi-Newton minimization over ``box``.

    Start points are the warm starts (clipped into the box) followed by
    scrambled Sobol fills up to ``restarts`` total; at least one start is
    always used. When ``gradient`` is None a central-difference fallback with
    step 1e-6 * box width supplies it; with ``fused=True`` the objective
    itself returns ``(value, gradient)`` in one call.
    """
    warm = [box.clip(np.asarray(w, dtype=float).reshape(-1)) for w in warm_starts]
    n_fill = max(restarts - len(warm), 0) if (warm or restarts > 0) else 1
    starts = warm + list(box.sobol(n_fill, seed))
    if not starts:
        starts = [box.center]

    if fused:
        value_and_grad = objective
    else:
        if gradient is None:
            gradient = _central_diff_grad(objective, box)

        def value_and_grad(x):
            return objective(x), np.asarray(gradient(x), dtype=float)

    bounds = list(zip(box.lower, box.upper))
    best_x, best_f = None, np.inf
    converged = []
    for x0 in starts:
        x_opt, f_opt, info = fmin_l_bfgs_b(
            value_and_grad, x0, bounds=bounds, maxiter=max_iter, pgtol=grad_tol, factr=10.0
        )
        converged.append(info["warnflag"] == 0)
        if np.isfinite(f_opt) and f_opt < best_f:
            best_f, best_x = float(f_opt), box.clip(x_opt)
    if best_x is None:
        raise OptFailure("all restarts produced non-finite objective values")
    return OptReport(x_star=best_x, f_star=best_f, restarts_used=len(starts), converged=converged)


def minimize_matrix(
    objective,
    box: Box,
    b: int,
    restarts: int,
    seed: int,
    gradient=None,
    warm_starts=(),
    max_iter: int = 200,
    grad_tol: float = 1e-8,
    fused: bool = False,
) -> tuple[np.ndarray, float]:
    """Minimize a function of a (b, d) matrix over the product box.

    ``objective`` (and ``gradient``, if given) receive/return flat vectors of
    length b*d; warm starts may be (b, d) matrices or flat vectors.
    """
    if b == 0:
        out = objective(np.zeros(0))
        val = out[0] if fused else out
        return np.zeros((0, box.dim)), float(val)
    flat_box = box.stack(b)
    warm = [np.asarray(w, dtype=float).reshape(-1) for w in warm_starts]
    report = minimize(objective, gradient, flat_box, restarts, seed, warm, max_iter, grad_tol, fused)
    return report.x_star.reshape(b, box.dim), report.f_star
