import numpy as np
import pytest
from numpy.testing import assert_allclose

from localbo.inner_opt import Box, OptFailure, minimize, minimize_matrix


def test_box_validation():
    with pytest.raises(ValueError):
        Box([0.0, 0.0], [1.0, 0.0])
    box = Box.cube(3, -1.0, 2.0)
    assert box.dim == 3
    assert_allclose(box.width, 3.0)
    assert box.contains([0.0, 0.0, 0.0])
    assert not box.contains([0.0, 0.0, 2.5])


def test_convex_quadratic_recovers_center():
    c = np.array([0.3, -0.4, 0.1])
    box = Box.cube(3, -1.0, 1.0)
    report = minimize(lambda x: float(np.sum((x - c) ** 2)), lambda x: 2 * (x - c), box, restarts=3, seed=0)
    assert_allclose(report.x_star, c, atol=1e-6)
    assert report.f_star < 1e-10


def test_linear_objective_hits_boundary():
    box = Box.cube(2, 0.0, 1.0)
    report = minimize(lambda x: float(x[0]), None, box, restarts=4, seed=1)
    assert abs(report.x_star[0]) <= 1e-8


def test_multimodal_matches_grid_oracle():
    box = Box.cube(1, 0.0, 1.0)
    f = lambda x: float(np.cos(6.0 * x[0]))
    grid = np.linspace(0.0, 1.0, 10_001)
    oracle = np.cos(6.0 * grid).min()
    report = minimize(f, None, box, restarts=8, seed=2)
    assert abs(report.f_star - oracle) <= 1e-4


def test_same_seed_bit_identical():
    box = Box.cube(2, -2.0, 2.0)
    f = lambda x: float(np.sum(x**2) + np.sin(3 * x[0]))
    r1 = minimize(f, None, box, restarts=5, seed=7)
    r2 = minimize(f, None, box, restarts=5, seed=7)
    assert r1.f_star == r2.f_star
    assert np.array_equal(r1.x_star, r2.x_star)
    assert r1.converged == r2.converged


def test_result_beats_every_start_point():
    box = Box.cube(3, -1.0, 1.0)
    f = lambda x: float(np.sum(x**4) - x[1])
    starts = box.sobol(6, seed=3)
    report = minimize(f, None, box, restarts=6, seed=3, warm_starts=list(starts))
    assert all(report.f_star <= f(s) + 1e-12 for s in starts)


def test_iterates_stay_in_box():
    box = Box.cube(2, 0.0, 1.0)
    seen = []

    def f(x):
        seen.append(x.copy())
        return float((x[0] - 2.0) ** 2 + x[1] ** 2)

    minimize(f, lambda x: np.array([2 * (x[0] - 2.0), 2 * x[1]]), box, restarts=2, seed=4)
    assert all(box.contains(x, tol=1e-12) for x in seen)


def test_warm_start_outside_box_is_clipped():
    box = Box.cube(1, 0.0, 1.0)
    report = minimize(lambda x: float(x[0] ** 2), None, box, restarts=1, seed=0, warm_starts=[np.array([5.0])])
    assert 0.0 <= report.x_star[0] <= 1.0


def test_opt_failure_on_nonfinite():
    box = Box.cube(1, 0.0, 1.0)
    with pytest.raises(OptFailure):
        minimize(lambda x: float("nan"), lambda x: np.zeros(1), box, restarts=2, seed=0)


def test_minimize_matrix_b1_reduces_to_minimize():
    box = Box.cube(2, -1.0, 1.0)
    c = np.array([0.2, 0.5])
    f_flat = lambda v: float(np.sum((v - c) ** 2))
    Z, val = minimize_matrix(f_flat, box, b=1, restarts=3, seed=5)
    assert Z.shape == (1, 2)
    assert_allclose(Z[0], c, atol=1e-6)
    report = minimize(f_flat, None, box, restarts=3, seed=5)
    assert_allclose(val, report.f_star, atol=1e-10)


def test_minimize_matrix_b0_evaluates_empty():
    box = Box.cube(2, -1.0, 1.0)
    Z, val = minimize_matrix(lambda v: 3.5, box, b=0, restarts=2, seed=0)
    assert Z.shape == (0, 2)
    assert val == 3.5


def test_minimize_matrix_row_exchangeable_objective():
    # objective symmetric in rows: permuting the returned rows leaves it unchanged
    box = Box.cube(1, -1.0, 1.0)

    def f(v):
        z = np.sort(v)
        return float((z[0] + 0.5) ** 2 + (z[1] - 0.5) ** 2)

    Z, val = minimize_matrix(f, box, b=2, restarts=4, seed=6)
    assert_allclose(f(Z.ravel()), f(Z[::-1].ravel()), atol=1e-14)
    assert val < 1e-8
