"""Compiled adaptive DOP853 for the mode ODE with built-in coefficient families.

Coefficient encoding ``(kind, params, blocks)``:
    kind 0: constant, c = params[0]
    kind 1: the explicit 1/t example
    kind 2: c = params[0] outside the rows of ``blocks``; inside a row
            [a, b, m, lam, mode, eps_const, amp, ramp, beta] the resonant
            coefficient with eps = eps_const (mode 0) or
            eps = amp * theta(t) * t^(-2 beta) (mode 1).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _tab

N_STAGES = _tab.N_STAGES
TAB_A = np.ascontiguousarray(_tab.A[:N_STAGES, :N_STAGES])
TAB_B = np.ascontiguousarray(_tab.B)
TAB_C = np.ascontiguousarray(_tab.C[:N_STAGES])
TAB_E3 = np.ascontiguousarray(_tab.E3)
TAB_E5 = np.ascontiguousarray(_tab.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0

OK = 0
STEP_CAP = 1
NON_FINITE = 2
STEP_TOO_SMALL = 3


@njit(cache=True)
def _cutoff(t, a, b, ramp):
    """Cutoff value and derivative: 7th-order smoothstep ramps of width ``ramp``."""
    if t <= a or t >= b:
        return 0.0, 0.0
    if t >= a + ramp and t <= b - ramp:
        return 1.0, 0.0
    if t < a + ramp:
        x = (t - a) / ramp
        sign = 1.0
    else:
        x = (b - t) / ramp
        sign = -1.0
    x2 = x * x
    y = 1.0 - x
    return x2 * x2 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x), sign * 140.0 * x2 * x * y * y * y / ramp


@njit(cache=True)
def _dgcs_row(t, row):
    m = row[2]
    lam = row[3]
    if row[4] == 0.0:
        e0 = row[5]
        e1 = 0.0
    else:
        th0, th1 = _cutoff(t, row[0], row[1], row[7])
        g = math.exp(-2.0 * row[8] * math.log(t))
        e0 = row[6] * th0 * g
        e1 = row[6] * (th1 * g - 2.0 * row[8] * th0 * g / t)
    w = m * lam
    s = math.sin(w * t)
    co = math.cos(w * t)
    ss = s * s
    return (
        m * m
        - e0 * 2.0 * s * co / (4.0 * w)
        - e1 * ss / (8.0 * w * w)
        - e0 * e0 * ss * ss / (64.0 * m * m * w * w)
    )


@njit(cache=True)
def coefficient_value(t, kind, params, blocks):
    if kind == 0:
        return params[0]
    if kind == 1:
        s = math.sin(t)
        ss = s * s
        return 1.0 - math.sin(2.0 * t) / (4.0 * t) + ss / (8.0 * t * t) - ss * ss / (64.0 * t * t)
    for i in range(blocks.shape[0]):
        if blocks[i, 0] <= t <= blocks[i, 1]:
            return _dgcs_row(t, blocks[i])
    return params[0]


@njit(cache=True)
def integrate(kind, params, blocks, lam, t0, y0, out_times, rtol, atol, max_step, max_steps):
    """Adaptive DOP853 from t0 through the monotone ``out_times``.

    ``y0`` holds one or more solutions laid out as (u, v) pairs; the
    right-hand side u' = v, v' = -lam^2 c u is evaluated inline, one
    coefficient value per stage shared by all pairs. Returns (states at
    out_times, accepted steps, rejected steps, status, largest accepted
    error norm).
    """
    n = y0.shape[0]
    pairs = n // 2
    n_out = out_times.shape[0]
    result = np.empty((n_out, n))
    lam2 = lam * lam
    y = y0.copy()
    t = t0
    K = np.zeros((N_STAGES + 1, n))
    y_new = np.empty(n)
    f = np.empty(n)
    c = coefficient_value(t, kind, params, blocks)
    for p in range(pairs):
        f[2 * p] = y[2 * p + 1]
        f[2 * p + 1] = -lam2 * c * y[2 * p]
    direction = 1.0
    if n_out > 0 and out_times[n_out - 1] < t0:
        direction = -1.0
    h_abs = max_step * 0.1
    steps = 0
    rejected = 0
    worst = 0.0
    err = 0.0
    for k in range(n_out):
        target = out_times[k]
        while direction * (target - t) > 0.0:
            if steps >= max_steps:
                return result, steps, rejected, STEP_CAP, worst
            if h_abs > max_step:
                h_abs = max_step
            step_rejected = False
            while True:
                min_step = 2.3e-15 * abs(t)
                if h_abs < min_step:
                    return result, steps, rejected, STEP_TOO_SMALL, worst
                h = h_abs * direction
                t_new = t + h
                if direction * (t_new - target) > 0.0:
                    t_new = target
                h = t_new - t
                for j in range(n):
                    K[0, j] = f[j]
                for s in range(1, N_STAGES):
                    cs = -lam2 * coefficient_value(t + TAB_C[s] * h, kind, params, blocks)
                    for p in range(pairs):
                        au = 0.0
                        av = 0.0
                        for r in range(s):
                            au += TAB_A[s, r] * K[r, 2 * p]
                            av += TAB_A[s, r] * K[r, 2 * p + 1]
                        K[s, 2 * p] = y[2 * p + 1] + h * av
                        K[s, 2 * p + 1] = cs * (y[2 * p] + h * au)
                for j in range(n):
                    acc = 0.0
                    for r in range(N_STAGES):
                        acc += TAB_B[r] * K[r, j]
                    y_new[j] = y[j] + h * acc
                cs = -lam2 * coefficient_value(t_new, kind, params, blocks)
                for p in range(pairs):
                    K[N_STAGES, 2 * p] = y_new[2 * p + 1]
                    K[N_STAGES, 2 * p + 1] = cs * y_new[2 * p]
                e5 = 0.0
                e3 = 0.0
                for j in range(n):
                    sc = atol + max(abs(y[j]), abs(y_new[j])) * rtol
                    a5 = 0.0
                    a3 = 0.0
                    for r in range(N_STAGES + 1):
                        a5 += TAB_E5[r] * K[r, j]
                        a3 += TAB_E3[r] * K[r, j]
                    e5 += (a5 / sc) ** 2
                    e3 += (a3 / sc) ** 2
                if e5 == 0.0 and e3 == 0.0:
                    err = 0.0
                else:
                    err = abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)
                if err < 1.0:
                    if err == 0.0:
                        factor = MAX_FACTOR
                    else:
                        factor = min(MAX_FACTOR, SAFETY * err**ERROR_EXPONENT)
                    if step_rejected:
                        factor = min(1.0, factor)
                    h_abs = max(h_abs, abs(h) * factor) if t_new == target else h_abs * factor
                    break
                h_abs *= max(MIN_FACTOR, SAFETY * err**ERROR_EXPONENT)
                step_rejected = True
                rejected += 1
            for j in range(n):
                if not math.isfinite(y_new[j]):
                    return result, steps, rejected, NON_FINITE, worst
                y[j] = y_new[j]
                f[j] = K[N_STAGES, j]
            t = t_new
            steps += 1
            if err > worst:
                worst = err
        for j in range(n):
            result[k, j] = y[j]
    return result, steps, rejected, OK, worst


@njit(cache=True)
def coefficient_samples(ts, kind, params, blocks):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = coefficient_value(ts[i], kind, params, blocks)
    return out
