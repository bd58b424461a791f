"""Adaptive Runge-Kutta integration against closed-form trajectories."""

import math

import numpy as np
import pytest

from odexpand import StepUnderflow, integrate_rhs


def logistic_rhs(t, y):
    return -y + y * y


def logistic_exact(t, y0=0.5):
    # y' = -y + y^2 solved through u = 1/y: u' = u - 1
    u0 = 1.0 / y0
    return 1.0 / (1.0 + (u0 - 1.0) * math.exp(t))


def test_linear_decay_accuracy():
    traj = integrate_rhs(lambda t, y: -y, np.array([1.0]), (0.0, 5.0))
    err = abs(traj.sample(5.0)[0] - math.exp(-5.0))
    assert err < 1e-8


def test_logistic_against_closed_form():
    traj = integrate_rhs(logistic_rhs, np.array([0.5]), (0.0, 6.0))
    for t in np.linspace(0.0, 6.0, 25):
        assert abs(traj.sample(t)[0] - logistic_exact(t)) < 1e-7


def test_finite_time_blowup_raises():
    # y0 = 10 blows up at t = ln(10/9), far inside the requested span
    with pytest.raises(StepUnderflow, match="step size underflow at t ="):
        integrate_rhs(logistic_rhs, np.array([10.0]), (0.0, 5.0))


def test_error_decreases_with_tolerance():
    tols = [1e-3, 1e-4, 6.25e-6, 3.90625e-7, 2.44140625e-8]
    errs = []
    for tol in tols:
        traj = integrate_rhs(
            logistic_rhs,
            np.array([0.5 + 0.0j]),
            (0.0, 5.0),
            rel_tol=tol,
            abs_tol=tol * 1e-2,
        )
        errs.append(abs(traj.states[-1][0] - logistic_exact(5.0)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # successive 16x tolerance drops must buy at least 4x accuracy
    for a, b in zip(errs[1:], errs[2:]):
        assert a / b >= 4.0


def test_sample_outside_span_and_bad_span():
    traj = integrate_rhs(lambda t, y: -y, np.array([1.0]), (0.0, 1.0))
    with pytest.raises(ValueError, match="outside the integrated span"):
        traj.sample(1.5)
    with pytest.raises(ValueError, match="outside the integrated span"):
        traj.sample(-0.1)
    with pytest.raises(ValueError, match="t_span must be increasing"):
        integrate_rhs(lambda t, y: -y, np.array([1.0]), (1.0, 0.0))


def test_nonfinite_initial_rhs():
    with pytest.raises(ValueError, match="right-hand side not finite at the initial point"):
        integrate_rhs(lambda t, y: np.array([math.inf]), np.array([1.0]), (0.0, 1.0))


def test_meta_counters():
    traj = integrate_rhs(lambda t, y: -y, np.array([1.0]), (0.0, 3.0))
    for key in ("steps", "rejected", "rhs_evals", "rel_tol", "abs_tol"):
        assert key in traj.meta
    assert traj.meta["steps"] == len(traj.ts) - 1
    assert traj.meta["rhs_evals"] > traj.meta["steps"]


def test_sample_hits_nodes_exactly():
    traj = integrate_rhs(logistic_rhs, np.array([0.5]), (0.0, 4.0))
    k = len(traj.ts) // 2
    np.testing.assert_array_equal(traj.sample(traj.ts[k]), traj.states[k])
    np.testing.assert_array_equal(traj.sample(traj.t1), traj.states[-1])


def test_complex_state_integration():
    lam = -1.0 + 1.0j
    traj = integrate_rhs(lambda t, y: lam * y, np.array([1.0 + 0.0j]), (0.0, 6.0))
    assert np.iscomplexobj(traj.states)
    for t in (1.0, 3.0, 6.0):
        assert abs(traj.sample(t)[0] - np.exp(lam * t)) < 1e-8


def test_sample_many_matches_pointwise():
    traj = integrate_rhs(logistic_rhs, np.array([0.5]), (0.0, 4.0))
    ts = np.linspace(0.2, 3.7, 9)
    grid = traj.sample_many(ts)
    assert grid.shape == (9, 1)
    for row, t in zip(grid, ts):
        np.testing.assert_array_equal(row, traj.sample(t))


def test_max_step_is_respected():
    traj = integrate_rhs(lambda t, y: -y, np.array([1.0]), (0.0, 2.0), max_step=0.05)
    assert np.max(np.diff(traj.ts)) <= 0.05 + 1e-12
