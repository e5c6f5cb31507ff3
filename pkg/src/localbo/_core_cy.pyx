# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython twin of ``_core_np``: same signatures, loop-level implementations.

Kept intentionally scalar (no BLAS) so small/medium shapes -- the common case
inside acquisition optimizers -- avoid temporary-array overhead. Validated
against the NumPy backend in the test suite.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, fabs, isfinite, sin, sqrt

cnp.import_array()

FAMILY_RBF = 0
FAMILY_MATERN25 = 1

cdef double SQRT5 = sqrt(5.0)


def kern_matrix(int family, const double[::1] ls, double s2, const double[:, ::1] A, const double[:, ::1] B):
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], d = A.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((na, nb))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double u2, diff, a
    cdef double[::1] inv2 = np.empty(d)
    for k in range(d):
        inv2[k] = 1.0 / (ls[k] * ls[k])
    for i in range(na):
        for j in range(nb):
            u2 = 0.0
            for k in range(d):
                diff = A[i, k] - B[j, k]
                u2 += diff * diff * inv2[k]
            if family == 0:
                o[i, j] = s2 * exp(-0.5 * u2)
            else:
                a = sqrt(u2)
                o[i, j] = s2 * (1.0 + SQRT5 * a + (5.0 / 3.0) * a * a) * exp(-SQRT5 * a)
    return out


def kern_grads(int family, const double[::1] ls, double s2, const double[:, ::1] P, const double[:, ::1] B):
    cdef Py_ssize_t np_ = P.shape[0], nb = B.shape[0], d = P.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty((np_, nb, d))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double u2, diff, a, coef
    cdef double[::1] inv2 = np.empty(d)
    for k in range(d):
        inv2[k] = 1.0 / (ls[k] * ls[k])
    for i in range(np_):
        for j in range(nb):
            u2 = 0.0
            for k in range(d):
                diff = P[i, k] - B[j, k]
                u2 += diff * diff * inv2[k]
            if family == 0:
                coef = s2 * exp(-0.5 * u2)
            else:
                a = sqrt(u2)
                coef = (5.0 / 3.0) * s2 * (1.0 + SQRT5 * a) * exp(-SQRT5 * a)
            for k in range(d):
                o[i, j, k] = -coef * (P[i, k] - B[j, k]) * inv2[k]
    return out


def kern_cross_hess(int family, const double[::1] ls, double s2, const double[:, ::1] P, const double[:, ::1] B):
    cdef Py_ssize_t np_ = P.shape[0], nb = B.shape[0], d = P.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.empty((np_, nb, d, d))
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t i, j, k, l
    cdef double u2, diff, a, e, front, diag_coef
    cdef double[::1] inv2 = np.empty(d)
    cdef double[::1] u = np.empty(d)
    for k in range(d):
        inv2[k] = 1.0 / (ls[k] * ls[k])
    for i in range(np_):
        for j in range(nb):
            u2 = 0.0
            for k in range(d):
                diff = P[i, k] - B[j, k]
                u[k] = diff * inv2[k]
                u2 += diff * u[k]
            if family == 0:
                front = s2 * exp(-0.5 * u2)
                diag_coef = 1.0
                for k in range(d):
                    for l in range(d):
                        o[i, j, k, l] = front * ((inv2[k] if k == l else 0.0) - u[k] * u[l])
            else:
                a = sqrt(u2)
                e = exp(-SQRT5 * a)
                front = (5.0 / 3.0) * s2 * e
                diag_coef = 1.0 + SQRT5 * a
                for k in range(d):
                    for l in range(d):
                        o[i, j, k, l] = front * ((diag_coef * inv2[k] if k == l else 0.0) - 5.0 * u[k] * u[l])
    return out


def cartpole_episode(const double[::1] theta, const double[::1] state0, int max_steps):
    cdef double gravity = 9.8
    cdef double masscart = 1.0
    cdef double masspole = 0.1
    cdef double total_mass = masscart + masspole
    cdef double half_length = 0.5
    cdef double polemass_length = masspole * half_length
    cdef double force_mag = 10.0
    cdef double tau = 0.02
    cdef double theta_limit = 12.0 * 2.0 * 3.141592653589793 / 360.0
    cdef double x_limit = 2.4

    cdef double x = state0[0], x_dot = state0[1], ang = state0[2], ang_dot = state0[3]
    cdef double reward = 0.0, force, cos_t, sin_t, temp, ang_acc, x_acc, score
    cdef int step
    for step in range(max_steps):
        score = theta[0] * x + theta[1] * x_dot + theta[2] * ang + theta[3] * ang_dot
        force = force_mag if score > 0.0 else -force_mag
        cos_t = cos(ang)
        sin_t = sin(ang)
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
        if not (isfinite(x) and isfinite(ang)):
            break
        if fabs(x) > x_limit or fabs(ang) > theta_limit:
            break
    return reward
