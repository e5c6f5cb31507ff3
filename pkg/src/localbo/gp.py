"""Gaussian-process posterior engine with derivative posteriors.

Implements, for a zero-mean prior GP(0, k):

* posterior mean / variance at query points,
* the gradient posterior GP(grad mu, grad k grad^T) -- mean gradient and the
  d x d covariance of the objective's gradient at a point,
* variance-only conditioning on hypothetical inputs Z (labels unseen),
* fantasy updates (append hypothetical observations) via an incremental
  block-Cholesky extension that matches a full refit to solver precision,
* prior path sampling through random Fourier features, and joint posterior
  sampling at probe points.

Models are immutable after construction; every update returns a new model, so
reads are freely shareable across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import DimensionMismatch, KernelSpec, kernel_grad_stack, kernel_matrix

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)



class NumericalBreakdown(RuntimeError):
    """Cholesky factorization failed at every jitter level."""


class VarianceOnlyError(RuntimeError):
    """Mean queried on a variance-only view (conditioned on inputs, no labels)."""


@dataclass(frozen=True)
class Dataset:
    """Observed inputs X (n, d), noisy values y (n,), and noise level sigma > 0."""

    X: np.ndarray
    y: np.ndarray
    noise_sigma: float

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float).reshape(-1))
        if X.ndim != 2:
            raise ValueError("X must be a 2-D array (n, d)")
        if y.size != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not np.isfinite(self.noise_sigma) or self.noise_sigma <= 0.0:
            raise ValueError("noise_sigma must be finite and > 0 (noisy observations only)")
        if X.size and not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if y.size and not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))

    @classmethod
    def empty(cls, dim: int, noise_sigma: float) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0), noise_sigma)

    @property
    def n(self) -> int:
        return self.X.shape[0]


def chol_with_jitter(M: np.ndarray, ladder=JITTER_LADDER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of M, escalating diagonal jitter on failure."""
    if M.shape[0] == 0:
        return np.zeros((0, 0)), 0.0
    eye = np.eye(M.shape[0])
    for jitter in ladder:
        try:
            return np.linalg.cholesky(M + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalBreakdown(f"Cholesky failed after jitter levels {list(ladder)}")


def _tri_solve(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if L.shape[0] == 0:
        return np.zeros_like(rhs)
    return solve_triangular(L, rhs, lower=True, check_finite=False)


def _tri_solve_t(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if L.shape[0] == 0:
        return np.zeros_like(rhs)
    return solve_triangular(L, rhs, lower=True, trans="T", check_finite=False)


@dataclass(frozen=True)
class GpModel:
    """Posterior GP with a cached Cholesky factor of k(X, X) + sigma^2 I.

    ``chol`` is the lower factor L, ``alpha`` solves (K + sigma^2 I) alpha = y
    and ``white_y`` is L^{-1} y. Instances are immutable.
    """

    kernel: KernelSpec
    data: Dataset
    chol: np.ndarray
    alpha: np.ndarray
    white_y: np.ndarray
    jitter: float = 0.0
    mean_defined: bool = field(default=True)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def noise_sigma(self) -> float:
        return self.data.noise_sigma


def fit(kernel: KernelSpec, data: Dataset) -> GpModel:
    """Condition the prior on ``data``, caching the factorization."""
    if data.X.shape[1] != kernel.dim and data.n > 0:
        raise DimensionMismatch(f"data has dimension {data.X.shape[1]}, kernel expects {kernel.dim}")
    K = kernel_matrix(kernel, data.X, data.X)
    M = K + data.noise_sigma**2 * np.eye(data.n)
    L, jitter = chol_with_jitter(M)
    white_y = _tri_solve(L, data.y)
    alpha = _tri_solve_t(L, white_y)
    return GpModel(kernel=kernel, data=data, chol=L, alpha=alpha, white_y=white_y, jitter=jitter)


def _query_points(model: GpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        if X.size != model.dim:
            raise DimensionMismatch(f"query has dimension {X.size}, model expects {model.dim}")
        X = X[None, :]
    elif X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionMismatch(f"query has dimension {X.shape[-1]}, model expects {model.dim}")
    return np.ascontiguousarray(X)


def posterior_mean_many(model: GpModel, Xq) -> np.ndarray:
    if not model.mean_defined:
        raise VarianceOnlyError("posterior mean is undefined on a variance-only view")
    Xq = _query_points(model, Xq)
    if model.n == 0:
        return np.zeros(Xq.shape[0])
    return kernel_matrix(model.kernel, Xq, model.data.X) @ model.alpha


def posterior_var_many(model: GpModel, Xq) -> np.ndarray:
    Xq = _query_points(model, Xq)
    prior = model.kernel.signal_variance
    if model.n == 0:
        return np.full(Xq.shape[0], prior)
    Kxq = kernel_matrix(model.kernel, model.data.X, Xq)
    V = _tri_solve(model.chol, Kxq)
    var = prior - np.einsum("ij,ij->j", V, V)
    return np.clip(var, 0.0, prior)


def posterior_mean(model: GpModel, x) -> float:
    """mu_D(x) = k(x, X) (k(X, X) + sigma^2 I)^{-1} y."""
    return float(posterior_mean_many(model, x)[0])


def posterior_var(model: GpModel, x) -> float:
    """sigma_D^2(x), clamped to [0, k(x, x)]."""
    return float(posterior_var_many(model, x)[0])


def posterior_cov(model: GpModel, Xq) -> np.ndarray:
    """Joint posterior covariance at query rows, symmetrized."""
    Xq = _query_points(model, Xq)
    Kqq = kernel_matrix(model.kernel, Xq, Xq)
    if model.n:
        Kxq = kernel_matrix(model.kernel, model.data.X, Xq)
        V = _tri_solve(model.chol, Kxq)
        Kqq = Kqq - V.T @ V
    return 0.5 * (Kqq + Kqq.T)


def posterior_mean_grad(model: GpModel, x) -> np.ndarray:
    """Gradient of the posterior mean at x, shape (d,)."""
    if not model.mean_defined:
        raise VarianceOnlyError("posterior mean is undefined on a variance-only view")
    x = _query_points(model, x)[0]
    if model.n == 0:
        return np.zeros(model.dim)
    G = kernel_grad_stack(model.kernel, x[None, :], model.data.X)[0]
    return G.T @ model.alpha


def grad_cov(model: GpModel, x) -> np.ndarray:
    """Posterior covariance of the objective gradient at x: grad k_D grad^T."""
    x = _query_points(model, x)[0]
    H = model.kernel.prior_grad_cov()
    if model.n:
        G = kernel_grad_stack(model.kernel, x[None, :], model.data.X)[0]
        W = _tri_solve(model.chol, G)
        H = H - W.T @ W
    return 0.5 * (H + H.T)


def _extend_factor(model: GpModel, Z: np.ndarray) -> tuple[np.ndarray, float]:
    """Block-extend the cached Cholesky factor with rows Z.

    Returns the lower factor of the (n+b) x (n+b) matrix
    [[K_XX, K_XZ], [K_ZX, K_ZZ]] + sigma^2 I.
    """
    n, b = model.n, Z.shape[0]
    Kxz = kernel_matrix(model.kernel, model.data.X, Z)
    Kzz = kernel_matrix(model.kernel, Z, Z) + model.noise_sigma**2 * np.eye(b)
    if model.jitter:
        Kzz += model.jitter * np.eye(b)
    B = _tri_solve(model.chol, Kxz)
    S, jitter = chol_with_jitter(Kzz - B.T @ B)
    L_ext = np.zeros((n + b, n + b))
    L_ext[:n, :n] = model.chol
    L_ext[n:, :n] = B.T
    L_ext[n:, n:] = S
    return L_ext, max(model.jitter, jitter)


def fantasy_update(model: GpModel, Z, yZ) -> GpModel:
    """Model conditioned additionally on observations (Z, yZ).

    Equivalent to refitting on the concatenated dataset; implemented as an
    incremental factor extension.
    """
    if not model.mean_defined:
        raise VarianceOnlyError("cannot fantasy-update a variance-only view")
    Z = _query_points(model, Z)
    yZ = np.asarray(yZ, dtype=float).reshape(-1)
    if yZ.size != Z.shape[0]:
        raise ValueError(f"Z has {Z.shape[0]} rows but yZ has {yZ.size} entries")
    if Z.shape[0] == 0:
        return model
    data = Dataset(np.vstack([model.data.X, Z]), np.concatenate([model.data.y, yZ]), model.noise_sigma)
    L_ext, jitter = _extend_factor(model, Z)
    white_y = _tri_solve(L_ext, data.y)
    alpha = _tri_solve_t(L_ext, white_y)
    return GpModel(kernel=model.kernel, data=data, chol=L_ext, alpha=alpha, white_y=white_y, jitter=jitter)


def condition_inputs_only(model: GpModel, Z) -> GpModel:
    """Variance-only view conditioned on future inputs Z (labels unknown).

    The returned model's covariances are those of the posterior given
    D and Z; its mean functions are undefined and raise ``VarianceOnlyError``.
    """
    Z = _query_points(model, Z)
    if Z.shape[0] == 0:
        return replace(model, mean_defined=False) if model.mean_defined else model
    data = Dataset(
        np.vstack([model.data.X, Z]),
        np.concatenate([model.data.y, np.zeros(Z.shape[0])]),  # placeholder, never used
        model.noise_sigma,
    )
    L_ext, jitter = _extend_factor(model, Z)
    zeros = np.zeros(data.n)
    return GpModel(
        kernel=model.kernel, data=data, chol=L_ext, alpha=zeros, white_y=zeros,
        jitter=jitter, mean_defined=False,
    )


@dataclass(frozen=True)
class GpPath:
    """Deterministic draw from the prior via random Fourier features.

    f(x) = scale * sum_j w_j cos(<omega_j, x> + phi_j); the analytic gradient
    and Hessian of this feature map are exact, which the synthetic objectives
    rely on.
    """

    kernel: KernelSpec
    freqs: np.ndarray    # (m, d)
    phases: np.ndarray   # (m,)
    weights: np.ndarray  # (m,)

    @property
    def scale(self) -> float:
        return float(np.sqrt(2.0 * self.kernel.signal_variance / self.freqs.shape[0]))


def sample_prior_path(kernel: KernelSpec, d: int, num_features: int, seed: int) -> GpPath:
    """Draw a prior path; frequencies follow the kernel's spectral density."""
    if num_features < 1:
        raise ValueError("num_features must be >= 1")
    if d != kernel.dim:
        raise DimensionMismatch(f"requested dimension {d}, kernel expects {kernel.dim}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((num_features, d))
    if kernel.family == "rbf":
        freqs = z / kernel.lengthscales
    elif kernel.family == "matern25":
        # Matern nu=5/2 spectral density is a Student-t with 2*nu = 5 dof.
        u = rng.chisquare(5.0, num_features)
        freqs = z * np.sqrt(5.0 / u)[:, None] / kernel.lengthscales
    else:  # pragma: no cover - families are validated upstream
        raise ValueError(f"no spectral sampler for family {kernel.family!r}")
    phases = rng.uniform(0.0, 2.0 * np.pi, num_features)
    weights = rng.standard_normal(num_features)
    return GpPath(kernel=kernel, freqs=freqs, phases=phases, weights=weights)


def eval_path(path: GpPath, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    vals = path.scale * (np.cos(X @ path.freqs.T + path.phases) @ path.weights)
    return float(vals[0]) if single else vals


def eval_path_grad(path: GpPath, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    sin = np.sin(X @ path.freqs.T + path.phases)
    grads = -path.scale * np.einsum("km,m,md->kd", sin, path.weights, path.freqs)
    return grads[0] if single else grads


def eval_path_hess(path: GpPath, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cos = np.cos(x @ path.freqs.T + path.phases)
    return -path.scale * np.einsum("m,m,md,me->de", cos, path.weights, path.freqs, path.freqs)


def sample_posterior_paths(model: GpModel, probe_points, count: int, seed: int) -> np.ndarray:
    """Joint posterior samples at probe points, shape (count, len(probes))."""
    if count < 1:
        raise ValueError("count must be >= 1")
    probes = _query_points(model, probe_points)
    mean = posterior_mean_many(model, probes)
    cov = posterior_cov(model, probes)
    L, _ = chol_with_jitter(cov, ladder=(1e-12, 1e-10, 1e-8, 1e-6))
    eps = np.random.default_rng(seed).standard_normal((count, probes.shape[0]))
    return mean[None, :] + eps @ L.T
