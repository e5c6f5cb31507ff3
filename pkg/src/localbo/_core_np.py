"""Pure-NumPy implementations of the hot numerical primitives.

This is the canonical backend: the Cython twin in ``_core_cy.pyx`` mirrors
these functions exactly and is validated against them in the test suite.
Family codes: 0 = RBF (squared exponential), 1 = Matern nu=5/2.

All functions take pre-validated contiguous float64 arrays; shape and
hyperparameter checks live one level up in ``localbo.kernels``.
"""
from __future__ import annotations

import numpy as np

FAMILY_RBF = 0
FAMILY_MATERN25 = 1

_SQRT5 = np.sqrt(5.0)


def kern_matrix(family: int, ls: np.ndarray, s2: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise kernel matrix k(a_i, b_j), shape (len(A), len(B))."""
    diff = A[:, None, :] - B[None, :, :]
    if family == FAMILY_RBF:
        u2 = np.einsum("ijd,d->ij", diff * diff, 1.0 / ls**2)
        return s2 * np.exp(-0.5 * u2)
    a = np.sqrt(np.einsum("ijd,d->ij", diff * diff, 1.0 / ls**2))
    return s2 * (1.0 + _SQRT5 * a + (5.0 / 3.0) * a * a) * np.exp(-_SQRT5 * a)


def kern_grads(family: int, ls: np.ndarray, s2: float, P: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Stack of kernel gradients d k(p_i, b_j) / d p_i, shape (len(P), len(B), d)."""
    diff = P[:, None, :] - B[None, :, :]
    u = diff / ls**2
    if family == FAMILY_RBF:
        K = s2 * np.exp(-0.5 * np.einsum("ijd,ijd->ij", diff, u))
        return -K[:, :, None] * u
    a = np.sqrt(np.einsum("ijd,ijd->ij", diff, u))
    g = (5.0 / 3.0) * s2 * (1.0 + _SQRT5 * a) * np.exp(-_SQRT5 * a)
    return -g[:, :, None] * u


def kern_cross_hess(family: int, ls: np.ndarray, s2: float, P: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Stack of cross derivatives d^2 k(p_i, b_j) / d p_i d b_j^T, shape (len(P), len(B), d, d)."""
    d = P.shape[1]
    diff = P[:, None, :] - B[None, :, :]
    u = diff / ls**2
    eye_scaled = np.diag(1.0 / ls**2)
    outer = u[:, :, :, None] * u[:, :, None, :]
    if family == FAMILY_RBF:
        K = s2 * np.exp(-0.5 * np.einsum("ijd,ijd->ij", diff, u))
        return K[:, :, None, None] * (eye_scaled.reshape(1, 1, d, d) - outer)
    a = np.sqrt(np.einsum("ijd,ijd->ij", diff, u))
    e = np.exp(-_SQRT5 * a)
    front = (5.0 / 3.0) * s2 * e
    return front[:, :, None, None] * (
        (1.0 + _SQRT5 * a)[:, :, None, None] * eye_scaled.reshape(1, 1, d, d) - 5.0 * outer
    )


def cartpole_episode(theta: np.ndarray, state0: np.ndarray, max_steps: int) -> float:
    """Roll out one cart-pole episode under the linear threshold policy.

    State layout (cart position, cart velocity, pole angle, pole angular
    velocity); push right when <theta, state> > 0 else left. Returns the
    number of survived steps (one reward unit per step, capped).
    """
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    total_mass = masscart + masspole
    half_length = 0.5
    polemass_length = masspole * half_length
    force_mag = 10.0
    tau = 0.02
    theta_limit = 12.0 * 2.0 * np.pi / 360.0
    x_limit = 2.4

    x, x_dot, ang, ang_dot = (float(v) for v in state0)
    reward = 0.0
    for _ in range(max_steps):
        force = force_mag if theta[0] * x + theta[1] * x_dot + theta[2] * ang + theta[3] * ang_dot > 0.0 else -force_mag
        cos_t = np.cos(ang)
        sin_t = np.sin(ang)
        temp = (force + polemass_length * ang_dot * ang_dot * sin_t) / total_mass
        ang_acc = (gravity * sin_t - cos_t * temp) / (
            half_length * (4.0 / 3.0 - masspole * cos_t * cos_t / total_mass)
        )
        x_acc = temp - polemass_length * ang_acc * cos_t / total_mass
        x = x + tau * x_dot
        x_dot = x_dot + tau * x_acc
        ang = ang + tau * ang_dot
        ang_dot = ang_dot + tau * ang_acc
        reward += 1.0
        if not (np.isfinite(x) and np.isfinite(ang)):
            break
        if abs(x) > x_limit or abs(ang) > theta_limit:
            break
    return reward
