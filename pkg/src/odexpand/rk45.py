"""Adaptive Dormand-Prince 5(4) integrator with PI step control.

The pair advances with the 5th-order solution and controls the step from
the embedded 4th-order error estimate; the last stage doubles as the first
stage of the next step.  Complex systems are integrated as stacked
real/imaginary parts.  Dense output between accepted points is cubic
Hermite interpolation from the stored endpoint derivatives.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory", "StepUnderflow", "integrate_rhs"]

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)

_SAFETY = 0.9
_ALPHA = 0.7 / 5  # proportional exponent of the PI controller
_BETA = 0.4 / 5  # integral exponent
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_MAX_STEPS = 2_000_000


class StepUnderflow(RuntimeError):
    """Step size shrank to the rounding level; the solution likely blows up."""


@dataclass
class Trajectory:
    """Accepted integration points with cubic-Hermite dense output."""

    ts: np.ndarray
    states: np.ndarray  # shape (len(ts), n), complex
    derivs: np.ndarray  # shape (len(ts), n), complex
    meta: dict = field(default_factory=dict)

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t1(self) -> float:
        return float(self.ts[-1])

    def sample(self, t: float) -> np.ndarray:
        """Dense-output state at t (must lie inside the integrated span)."""
        t = float(t)
        if not self.ts[0] <= t <= self.ts[-1]:
            raise ValueError(f"t = {t} outside the integrated span")
        i = bisect.bisect_right(self.ts, t) - 1
        if i >= len(self.ts) - 1:
            return self.states[-1].copy()
        t0, t1 = self.ts[i], self.ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1 = self.states[i], self.states[i + 1]
        f0, f1 = self.derivs[i], self.derivs[i + 1]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * y0 + h * h10 * f0 + h01 * y1 + h * h11 * f1

    def sample_many(self, ts) -> np.ndarray:
        return np.array([self.sample(t) for t in ts])


def _initial_step(rhs, t0, y0, f0, rel_tol, abs_tol, t_max):
    """Hairer-style starting step guess."""
    sc = abs_tol + rel_tol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((np.abs(y0) / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((np.abs(f0) / sc) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_max - t0)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = float(np.sqrt(np.mean((np.abs(f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_max - t0)


def integrate_rhs(
    rhs,
    y0,
    t_span,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    max_step: float | None = None,
) -> Trajectory:
    """Integrate y' = rhs(t, y) over t_span with adaptive steps.

    rhs may return complex vectors; the controller works on the stacked
    real system.  Raises StepUnderflow when error control cannot proceed.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    y0 = np.asarray(y0, dtype=complex).reshape(-1)
    n = y0.shape[0]

    def real_rhs(t, u):
        dy = np.asarray(rhs(t, u[:n] + 1j * u[n:]), dtype=complex)
        return np.concatenate([dy.real, dy.imag])

    u = np.concatenate([y0.real, y0.imag])
    f = real_rhs(t0, u)
    if not np.all(np.isfinite(f)):
        raise ValueError("right-hand side not finite at the initial point")
    hmax = (t1 - t0) if max_step is None else float(max_step)
    h = min(_initial_step(real_rhs, t0, u, f, rel_tol, abs_tol, t1), hmax)
    t = t0
    ts = [t0]
    states = [u.copy()]
    derivs = [f.copy()]
    err_prev = 1.0
    n_steps = n_rejects = 0
    n_evals = 2
    max_factor = _FAC_MAX
    while t < t1:
        if n_steps > _MAX_STEPS:
            raise RuntimeError("step budget exhausted")
        h = min(h, t1 - t, hmax)
        if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepUnderflow(f"step size underflow at t = {t}")
        k = [f]
        bad = False
        for i in range(1, 7):
            ui = u + h * sum(a * ki for a, ki in zip(_A[i], k))
            ki = real_rhs(t + _C[i] * h, ui)
            n_evals += 1
            if not np.all(np.isfinite(ki)):
                bad = True
                break
            k.append(ki)
        if bad:
            h *= 0.25
            n_rejects += 1
            max_factor = 1.0
            continue
        u_new = u + h * sum(b * ki for b, ki in zip(_B5, k))
        u_low = u + h * sum(b * ki for b, ki in zip(_B4, k))
        sc = abs_tol + rel_tol * np.maximum(np.abs(u), np.abs(u_new))
        err = float(np.sqrt(np.mean(((u_new - u_low) / sc) ** 2)))
        if err <= 1.0:
            t += h
            u = u_new
            f = k[6]  # FSAL: stage 7 is rhs at the accepted point
            ts.append(t)
            states.append(u.copy())
            derivs.append(f.copy())
            n_steps += 1
            err_c = max(err, 1e-10)
            factor = _SAFETY * err_c**-_ALPHA * err_prev**_BETA
            h *= min(max_factor, max(_FAC_MIN, factor))
            err_prev = err_c
            max_factor = _FAC_MAX
        else:
            n_rejects += 1
            factor = _SAFETY * err**-_ALPHA
            h *= min(1.0, max(_FAC_MIN, factor))
            max_factor = 1.0

    ts_arr = np.array(ts)
    states_arr = np.array([s[:n] + 1j * s[n:] for s in states])
    derivs_arr = np.array([d[:n] + 1j * d[n:] for d in derivs])
    return Trajectory(
        ts=ts_arr,
        states=states_arr,
        derivs=derivs_arr,
        meta={
            "steps": n_steps,
            "rejected": n_rejects,
            "rhs_evals": n_evals,
            "rel_tol": rel_tol,
            "abs_tol": abs_tol,
        },
    )
