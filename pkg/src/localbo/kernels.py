"""Stationary kernels with analytic first- and second-order cross derivatives.

Two families are supported: the squared exponential (RBF) and Matern with
nu = 5/2, both with ARD lengthscales. These are the raw material for the
derivative-aware GP engine: besides k(x, x') itself we need

* ``kernel_grad_x``       -- d k / d x, the gradient in the first argument,
* ``kernel_cross_hessian``-- d^2 k / d x d x'^T, the mixed second derivative,

because the gradient of a GP is again a GP whose covariance is built from
exactly those objects.

``KernelSpec`` instances are immutable and every operation here is pure, so
concurrent use is safe. Pairwise/batched variants dispatch to the selected
numerical backend (compiled or pure NumPy).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import core
from ._core_np import FAMILY_MATERN25, FAMILY_RBF

FAMILIES = {"rbf": FAMILY_RBF, "matern25": FAMILY_MATERN25}
_FAMILY_ALIASES = {
    "rbf": "rbf",
    "squared_exponential": "rbf",
    "se": "rbf",
    "matern25": "matern25",
    "matern2.5": "matern25",
    "matern52": "matern25",
}


class DimensionMismatch(ValueError):
    """Input dimensionality does not match the kernel's lengthscale vector."""


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel family plus hyperparameters.

    Parameters
    ----------
    family : str
        ``"rbf"`` or ``"matern25"`` (aliases like ``"matern2.5"`` accepted).
    lengthscales : array_like
        Positive per-dimension lengthscales, shape (d,).
    signal_variance : float
        Positive prior variance; k(x, x) equals this value exactly.
    """

    family: str
    lengthscales: np.ndarray
    signal_variance: float = 1.0
    _code: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {sorted(FAMILIES)}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        if ls.ndim != 1 or ls.size == 0:
            raise ValueError("lengthscales must be a non-empty 1-D vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0.0):
            raise ValueError("lengthscales must be finite and > 0")
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0.0:
            raise ValueError("signal_variance must be finite and > 0")
        ls.setflags(write=False)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "_code", FAMILIES[fam])

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    @classmethod
    def isotropic(cls, family: str, dim: int, lengthscale: float, signal_variance: float = 1.0) -> "KernelSpec":
        """Fill all d lengthscale entries with one scalar."""
        return cls(family, np.full(dim, float(lengthscale)), signal_variance)

    def prior_grad_cov(self) -> np.ndarray:
        """Cross-Hessian at lag 0: the prior covariance of the GP gradient."""
        scale = 1.0 if self.family == "rbf" else 5.0 / 3.0
        return np.diag(scale * self.signal_variance / self.lengthscales**2)


def _check_point(spec: KernelSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size != spec.dim:
        raise DimensionMismatch(f"point has dimension {x.size}, kernel expects {spec.dim}")
    return x


def _check_points(spec: KernelSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if spec.dim > 1 else X[:, None]
    if X.ndim != 2 or (X.size and X.shape[1] != spec.dim):
        raise DimensionMismatch(f"points have dimension {X.shape[-1] if X.ndim else '?'}, kernel expects {spec.dim}")
    return np.ascontiguousarray(X)


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """k(x, x2). Symmetric, positive, and at most ``signal_variance``."""
    x = _check_point(spec, x)
    x2 = _check_point(spec, x2)
    return float(core.kern_matrix(spec._code, spec.lengthscales, spec.signal_variance, x[None, :], x2[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Pairwise kernel matrix between row sets A (na, d) and B (nb, d)."""
    A = _check_points(spec, A)
    B = _check_points(spec, B)
    return core.kern_matrix(spec._code, spec.lengthscales, spec.signal_variance, A, B)


def kernel_grad_x(spec: KernelSpec, x, x2) -> np.ndarray:
    """Gradient of k in its first argument, shape (d,). Zero at x == x2."""
    x = _check_point(spec, x)
    x2 = _check_point(spec, x2)
    return core.kern_grads(spec._code, spec.lengthscales, spec.signal_variance, x[None, :], x2[None, :])[0, 0]


def kernel_grad_stack(spec: KernelSpec, P, B) -> np.ndarray:
    """Gradients d k(p_i, b_j)/d p_i for all pairs, shape (np, nb, d)."""
    P = _check_points(spec, P)
    B = _check_points(spec, B)
    return core.kern_grads(spec._code, spec.lengthscales, spec.signal_variance, P, B)


def kernel_cross_hessian(spec: KernelSpec, x, x2) -> np.ndarray:
    """Mixed second derivative d^2 k / (d x d x2^T), shape (d, d)."""
    x = _check_point(spec, x)
    x2 = _check_point(spec, x2)
    return core.kern_cross_hess(spec._code, spec.lengthscales, spec.signal_variance, x[None, :], x2[None, :])[0, 0]


def kernel_cross_hessian_stack(spec: KernelSpec, P, B) -> np.ndarray:
    """Cross-Hessians for all pairs, shape (np, nb, d, d)."""
    P = _check_points(spec, P)
    B = _check_points(spec, B)
    return core.kern_cross_hess(spec._code, spec.lengthscales, spec.signal_variance, P, B)
