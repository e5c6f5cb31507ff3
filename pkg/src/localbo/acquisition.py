"""Acquisition functions and analytic bounds.

* ``ucb``                   -- mu_D(x) + beta * sigma_D(x), the probabilistic
                               upper envelope whose minimizer drives the step
                               move in MinUCB / LA-MinUCB.
* ``alpha_trace``           -- trace of the gradient posterior covariance at
                               x_t after hypothetically conditioning on
                               candidate inputs Z (the local exploration
                               objective of GIBO / MinUCB).
* ``quadratic_upper_bound`` -- the L-smooth quadratic majorant behind plain
                               gradient descent.
* ``gibo_upper_bound``      -- the approximate-gradient majorant behind the
                               GIBO step.
* ``lookahead_value``       -- expected post-batch UCB minimum under fantasy
                               labels at Z (the LA-MinUCB exploration
                               objective), with a one-shot variant whose
                               decision variables include the per-fantasy
                               inner minimizers.

Fantasy draws use common random numbers from a caller-supplied seed, so every
acquisition here is a deterministic function of its inputs. The heavy
optimizable objectives (``AlphaTraceObjective``, ``OneShotLookahead``) return
analytic gradients; the test suite pins them against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .gp import GpModel, chol_with_jitter, condition_inputs_only, fantasy_update, grad_cov
from .inner_opt import Box, minimize
from .kernels import (
    kernel_cross_hessian_stack,
    kernel_grad_stack,
    kernel_matrix,
)

_SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class UcbParams:
    """Confidence multiplier beta >= 0."""

    beta: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError("beta must be finite and >= 0")


@dataclass(frozen=True)
class LookaheadConfig:
    """Fantasy count, inner-minimization effort, and the CRN base seed.

    ``inner_grid`` restricts the inner minimization to fixed candidate points
    (used by oracle comparisons); otherwise the box is searched with
    ``inner_restarts`` multi-starts.
    """

    num_fantasies: int = 16
    inner_restarts: int = 8
    seed: int = 0
    inner_grid: np.ndarray | None = None

    def __post_init__(self):
        if self.num_fantasies < 1:
            raise ValueError("num_fantasies must be >= 1")
        if self.inner_restarts < 1:
            raise ValueError("inner_restarts must be >= 1")


def fantasy_draws(cfg: LookaheadConfig, batch: int) -> np.ndarray:
    """CRN standard-normal draws, antithetically paired, shape (F, batch).

    Pairing (g, -g) keeps the estimator unbiased while sharply reducing the
    Monte-Carlo error of the expected-minimum, which is close to linear in
    the draws.
    """
    F = cfg.num_fantasies
    rng = np.random.default_rng(cfg.seed)
    base = rng.standard_normal(((F + 1) // 2, batch))
    eps = np.empty((F, batch))
    eps[0::2] = base
    eps[1::2] = -base[: F // 2]
    return eps


def _solve_lower(L, rhs):
    if L.shape[0] == 0:
        return np.zeros_like(rhs)
    return solve_triangular(L, rhs, lower=True, check_finite=False)


def _solve_lower_t(L, rhs):
    if L.shape[0] == 0:
        return np.zeros_like(rhs)
    return solve_triangular(L, rhs, lower=True, trans="T", check_finite=False)


# ---------------------------------------------------------------------------
# UCB
# ---------------------------------------------------------------------------

def ucb_many(model: GpModel, Xq, params: UcbParams) -> np.ndarray:
    from .gp import posterior_mean_many, posterior_var_many

    return posterior_mean_many(model, Xq) + params.beta * np.sqrt(posterior_var_many(model, Xq))


def ucb(model: GpModel, x, params: UcbParams) -> float:
    """mu_D(x) + beta * sigma_D(x)."""
    return float(ucb_many(model, np.atleast_2d(np.asarray(x, dtype=float)), params)[0])


def ucb_value_grad(model: GpModel, x, params: UcbParams) -> tuple[float, np.ndarray]:
    """UCB value and its analytic gradient at a single point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    s2 = model.kernel.signal_variance
    if model.n == 0:
        return params.beta * np.sqrt(s2), np.zeros(model.dim)
    kx = kernel_matrix(model.kernel, model.data.X, x[None, :])[:, 0]
    v = _solve_lower(model.chol, kx)
    mu = kx @ model.alpha
    var = np.clip(s2 - v @ v, 0.0, s2)
    sigma = np.sqrt(var)
    G = kernel_grad_stack(model.kernel, x[None, :], model.data.X)[0]
    grad = G.T @ model.alpha
    if params.beta > 0:
        q = _solve_lower_t(model.chol, v)
        grad = grad + params.beta * (-(G.T @ q)) / max(sigma, _SIGMA_FLOOR)
    return float(mu + params.beta * sigma), grad


def minimize_ucb(
    model: GpModel,
    params: UcbParams,
    box: Box,
    restarts: int,
    seed: int,
    warm_starts=(),
    max_iter: int = 200,
) -> tuple[np.ndarray, float]:
    """Argmin of UCB over the box (multi-start quasi-Newton)."""
    fused = lambda x: ucb_value_grad(model, x, params)
    report = minimize(fused, None, box, restarts, seed, warm_starts, max_iter, fused=True)
    return report.x_star, report.f_star


def argmin_points(points: np.ndarray, values: np.ndarray, incumbent=None) -> int:
    """Index of the smallest value; ties go to the point nearest the
    incumbent, then to the lexicographically smallest point."""
    values = np.asarray(values, dtype=float)
    ties = np.flatnonzero(values <= values.min())
    if ties.size == 1:
        return int(ties[0])
    cand = np.atleast_2d(points)[ties]
    if incumbent is not None:
        dist = np.linalg.norm(cand - np.asarray(incumbent, dtype=float), axis=1)
        ties = ties[dist <= dist.min()]
        cand = np.atleast_2d(points)[ties]
    order = np.lexsort(cand.T[::-1])
    return int(ties[order[0]])


# ---------------------------------------------------------------------------
# Gradient-descent upper bounds (the Figure-1 comparison)
# ---------------------------------------------------------------------------

def quadratic_upper_bound(f0: float, grad, L: float, x0, x) -> float:
    """L-smooth quadratic majorant f0 + <grad, x-x0> + (L/2)||x-x0||^2."""
    if L <= 0:
        raise ValueError("L must be > 0")
    step = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    grad = np.asarray(grad, dtype=float)
    return float(f0 + grad @ step + 0.5 * L * step @ step)


def gibo_upper_bound(f0: float, grad_true, grad_mu, eta: float) -> float:
    """Majorant of the approximate-gradient step value:
    f0 - (eta/2)||grad_true||^2 + (eta/2)||grad_mu - grad_true||^2."""
    if eta <= 0:
        raise ValueError("eta must be > 0")
    gt = np.asarray(grad_true, dtype=float)
    gm = np.asarray(grad_mu, dtype=float)
    return float(f0 - 0.5 * eta * gt @ gt + 0.5 * eta * (gm - gt) @ (gm - gt))


# ---------------------------------------------------------------------------
# alpha_trace: gradient-uncertainty reduction (GIBO / MinUCB exploration)
# ---------------------------------------------------------------------------

def alpha_trace(model: GpModel, x_t, Z) -> float:
    """tr(grad k_{D u Z}(x_t, x_t) grad^T): gradient uncertainty at x_t after
    hypothetically sampling at rows of Z (labels not needed)."""
    Z = np.asarray(Z, dtype=float).reshape(-1, model.dim)
    view = condition_inputs_only(model, Z) if Z.shape[0] else model
    return max(float(np.trace(grad_cov(view, x_t))), 0.0)


class AlphaTraceObjective:
    """alpha_trace as a function of Z with an analytic gradient.

    Precomputes everything that depends only on (model, x_t); each call costs
    one small Cholesky plus triangular solves against the cached base factor.
    Used by the exploration optimizers and the error-function estimator.
    """

    def __init__(self, model: GpModel, x_t):
        self.model = model
        self.x = np.asarray(x_t, dtype=float).reshape(-1)
        k = model.kernel
        X = model.data.X
        self.noise2 = model.noise_sigma**2 + model.jitter
        self.Gx = kernel_grad_stack(k, self.x[None, :], X)[0]          # (n, d)
        Cx = _solve_lower(model.chol, self.Gx)
        self.Rx = _solve_lower_t(model.chol, Cx)                       # (K+s^2 I)^{-1} Gx
        self.base_trace = float(np.trace(k.prior_grad_cov()) - np.sum(Cx * Cx))

    def value(self, z_flat: np.ndarray) -> float:
        return self.value_and_grad(z_flat)[0]

    def value_and_grad(self, z_flat: np.ndarray) -> tuple[float, np.ndarray]:
        model, x = self.model, self.x
        k, X, L = model.kernel, model.data.X, model.chol
        d = model.dim
        Z = np.asarray(z_flat, dtype=float).reshape(-1, d)
        b = Z.shape[0]
        if b == 0:
            return self.base_trace, np.zeros(0)

        Kxz = kernel_matrix(k, X, Z)                                   # (n, b)
        B = _solve_lower(L, Kxz)
        QKz = _solve_lower_t(L, B)
        A = kernel_matrix(k, Z, Z) + self.noise2 * np.eye(b) - B.T @ B
        S, _ = chol_with_jitter(A)
        Gamma = kernel_grad_stack(k, x[None, :], Z)[0].T - self.Rx.T @ Kxz   # (d, b)
        P = _solve_lower_t(S, _solve_lower(S, Gamma.T))                # A^{-1} Gamma^T, (b, d)
        val = self.base_trace - float(np.einsum("db,bd->", Gamma, P))

        Gz = kernel_grad_stack(k, Z, X)                                # (b, n, d)
        T = kernel_cross_hessian_stack(k, x[None, :], Z)[0]            # (b, d, d)
        if model.n:
            T = T - np.einsum("nd,bne->bde", self.Rx, Gz)
        U = kernel_grad_stack(k, Z, Z)                                 # (b, b, d)
        if model.n:
            U = U - np.einsum("bnd,nl->bld", Gz, QKz)
        W2 = P @ P.T
        grad = -2.0 * np.einsum("jd,jdq->jq", P, T) + 2.0 * np.einsum("jl,jlq->jq", W2, U)
        return max(val, 0.0), grad.ravel()


# ---------------------------------------------------------------------------
# Look-ahead acquisition (LA-MinUCB exploration)
# ---------------------------------------------------------------------------

class OneShotLookahead:
    """Deterministic one-shot form of the look-ahead acquisition.

    Decision variables are the candidate batch Z (b rows) jointly with one
    inner minimizer x_f per fantasy; the objective is the fantasy-averaged
    UCB value at those minimizers:

        (1/F) sum_f [ mu_{D u (Z, y_f)}(x_f) + beta sigma_{D u Z}(x_f) ]

    with CRN labels y_f = mu_D(Z) + chol(k_D(Z,Z) + s^2 I) eps_f. Everything
    is expressed against the base model's cached factor, which makes both the
    value and its gradient cheap: the whitened fantasy weights are just the
    eps draws, so no per-fantasy refactorization is needed.
    """

    def __init__(self, model: GpModel, batch: int, params: UcbParams, eps: np.ndarray):
        if batch < 1:
            raise ValueError("one-shot lookahead needs batch >= 1")
        self.model = model
        self.b = batch
        self.beta = params.beta
        self.eps = np.asarray(eps, dtype=float)
        if self.eps.shape[1] != batch:
            raise ValueError("eps draws do not match batch size")
        self.F = self.eps.shape[0]
        self.noise2 = model.noise_sigma**2 + model.jitter
        self.s2 = model.kernel.signal_variance

    def split(self, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.model.dim
        Z = flat[: self.b * d].reshape(self.b, d)
        Xf = flat[self.b * d :].reshape(self.F, d)
        return Z, Xf

    def pack(self, Z: np.ndarray, Xf: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(Z, dtype=float).ravel(), np.asarray(Xf, dtype=float).ravel()])

    def value_and_grad(self, flat: np.ndarray) -> tuple[float, np.ndarray]:
        model = self.model
        k, X, L, alpha = model.kernel, model.data.X, model.chol, model.alpha
        b, F, beta = self.b, self.F, self.beta
        Z, Xf = self.split(np.asarray(flat, dtype=float))

        Kxz = kernel_matrix(k, X, Z)                       # (n, b)
        B = _solve_lower(L, Kxz)
        QKz = _solve_lower_t(L, B)
        A = kernel_matrix(k, Z, Z) + self.noise2 * np.eye(b) - B.T @ B
        S, _ = chol_with_jitter(A)

        Kxf = kernel_matrix(k, X, Xf)                      # (n, F)
        Vf = _solve_lower(L, Kxf)
        QKf = _solve_lower_t(L, Vf)
        mu_f = Kxf.T @ alpha if model.n else np.zeros(F)
        var_base = np.clip(self.s2 - np.einsum("nf,nf->f", Vf, Vf), 0.0, self.s2)

        rho = kernel_matrix(k, Z, Xf) - B.T @ Vf           # (b, F) = k_D(Z, x_f)
        Am = _solve_lower(S, rho)
        W = _solve_lower_t(S, Am)                          # A^{-1} rho
        svar = np.clip(var_base - np.einsum("bf,bf->f", rho, W), 0.0, None)
        sig = np.sqrt(svar)
        Qm = _solve_lower_t(S, self.eps.T)                 # (b, F), columns S^{-T} eps_f

        value = float(np.mean(mu_f + np.einsum("bf,bf->f", rho, Qm) + beta * sig))

        # --- gradient w.r.t. the fantasy minimizers ---
        Gf = kernel_grad_stack(k, Xf, X)                   # (F, n, d)
        GxZ = kernel_grad_stack(k, Xf, Z)                  # (F, b, d)
        if model.n:
            grad_mu = np.einsum("fnd,n->fd", Gf, alpha)
            grad_var_base = -2.0 * np.einsum("fnd,nf->fd", Gf, QKf)
            Rf = GxZ - np.einsum("fnd,nj->fjd", Gf, QKz)   # rows: d k_D(z_j, x_f) / d x_f
        else:
            grad_mu = np.zeros((F, model.dim))
            grad_var_base = np.zeros((F, model.dim))
            Rf = GxZ
        grad_xf = grad_mu + np.einsum("fjd,jf->fd", Rf, Qm)
        sig_safe = np.maximum(sig, _SIGMA_FLOOR)
        if beta > 0:
            grad_svar = grad_var_base - 2.0 * np.einsum("fjd,jf->fd", Rf, W)
            grad_xf = grad_xf + (beta / (2.0 * sig_safe))[:, None] * grad_svar
        grad_xf /= F

        # --- gradient w.r.t. Z ---
        Gz = kernel_grad_stack(k, Z, X)                    # (b, n, d)
        U = kernel_grad_stack(k, Z, Z)                     # (b, b, d): d k_D(z_j, z_l) / d z_j
        V = kernel_grad_stack(k, Z, Xf)                    # (b, F, d): d k_D(z_j, x_f) / d z_j
        if model.n:
            U = U - np.einsum("bnd,nl->bld", Gz, QKz)
            V = V - np.einsum("bnd,nf->bfd", Gz, QKf)

        rho_bar = Qm.copy()
        if beta > 0:
            rho_bar -= W * (beta / sig_safe)[None, :]
        rho_bar /= F
        grad_z = np.einsum("jf,jfd->jd", rho_bar, V)

        S_bar = -(Qm @ Am.T) / F
        A_bar = _chol_backward(S, S_bar)
        if beta > 0:
            A_bar = A_bar + (W * (beta / (2.0 * F * sig_safe))[None, :]) @ W.T
        grad_z += 2.0 * np.einsum("jl,jld->jd", A_bar, U)

        return value, np.concatenate([grad_z.ravel(), grad_xf.ravel()])

    def fantasy_labels(self, Z: np.ndarray) -> np.ndarray:
        """Explicit CRN labels y_f = mu_D(Z) + chol(k_D(Z,Z)+s^2 I) eps_f, shape (F, b)."""
        model = self.model
        k, X, L = model.kernel, model.data.X, model.chol
        Z = np.asarray(Z, dtype=float).reshape(self.b, model.dim)
        Kxz = kernel_matrix(k, X, Z)
        B = _solve_lower(L, Kxz)
        A = kernel_matrix(k, Z, Z) + self.noise2 * np.eye(self.b) - B.T @ B
        S, _ = chol_with_jitter(A)
        mu_z = Kxz.T @ model.alpha if model.n else np.zeros(self.b)
        return mu_z[None, :] + self.eps @ S.T


def _chol_backward(S: np.ndarray, S_bar: np.ndarray) -> np.ndarray:
    """Adjoint of the Cholesky factorization A = S S^T for scalar outputs.

    Given dL/dS (sensitivity to the lower factor), returns the symmetric
    dL/dA. Standard reverse-mode formula with the half-diagonal lower
    projection; validated against finite differences in the tests.
    """
    P = np.tril(S.T @ np.tril(S_bar))
    P -= 0.5 * np.diag(np.diag(P))
    Sym = 0.5 * (P + P.T)
    tmp = solve_triangular(S, Sym, lower=True, trans="T", check_finite=False)
    A_bar = solve_triangular(S, tmp.T, lower=True, trans="T", check_finite=False)
    return 0.5 * (A_bar + A_bar.T)


def lookahead_value(model: GpModel, Z, params: UcbParams, cfg: LookaheadConfig, bounds: Box) -> float:
    """Exact-mode look-ahead value of a candidate batch Z.

    Averages, over CRN fantasy draws, the minimum of the fantasy-updated UCB;
    each inner minimum is taken over ``cfg.inner_grid`` when given, otherwise
    over the box via multi-start descent. Deterministic given
    (model, Z, cfg.seed).
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, model.dim)
    if Z.shape[0] == 0:
        raise ValueError("lookahead_value needs at least one candidate row")
    eps = fantasy_draws(cfg, Z.shape[0])
    osl = OneShotLookahead(model, Z.shape[0], params, eps)
    labels = osl.fantasy_labels(Z)
    total = 0.0
    for f in range(cfg.num_fantasies):
        try:
            fant = fantasy_update(model, Z, labels[f])
            if cfg.inner_grid is not None:
                total += float(np.min(ucb_many(fant, cfg.inner_grid, params)))
            else:
                warm = [row for row in Z] + [bounds.center]
                if model.n:
                    warm.append(model.data.X[int(np.argmin(model.data.y))])
                _, val = minimize_ucb(fant, params, bounds, cfg.inner_restarts, cfg.seed + 1000 + f, warm)
                total += val
        except Exception as exc:  # noqa: BLE001 - annotate which fantasy failed
            raise RuntimeError(f"look-ahead inner optimization failed on fantasy {f}") from exc
    return total / cfg.num_fantasies


def optimize_lookahead_batch(
    model: GpModel,
    batch: int,
    params: UcbParams,
    cfg: LookaheadConfig,
    box: Box,
    x_center,
    restarts: int,
    seed: int,
    max_iter: int = 120,
    init_scale: float | None = None,
) -> tuple[np.ndarray, float]:
    """One-shot minimization of the look-ahead acquisition over Z.

    The b*d candidate coordinates and the F*d fantasy minimizers are
    optimized jointly; returns the optimized Z and the acquisition value.
    Warm starts spread Z around ``x_center`` at a fraction of the
    lengthscale, with fantasy minimizers started at the center.
    """
    eps = fantasy_draws(cfg, batch)
    osl = OneShotLookahead(model, batch, params, eps)
    x_center = np.asarray(x_center, dtype=float).reshape(-1)
    scale = init_scale if init_scale is not None else 0.1 * float(np.mean(model.kernel.lengthscales))
    rng = np.random.default_rng(seed)
    warm = []
    for _ in range(max(restarts, 1)):
        Z0 = box.clip(x_center[None, :] + scale * rng.standard_normal((batch, model.dim)))
        Xf0 = np.tile(x_center, (cfg.num_fantasies, 1))
        warm.append(osl.pack(Z0, Xf0))
    flat_box = box.stack(batch + cfg.num_fantasies)
    report = minimize(
        osl.value_and_grad, None, flat_box, len(warm), seed, warm, max_iter=max_iter, fused=True
    )
    Z_star, _ = osl.split(report.x_star)
    return Z_star.copy(), report.f_star
