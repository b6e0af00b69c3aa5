"""Mode ODE u'' + lambda^2 c(t) u = 0: integration, closed forms, energies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import special
from scipy.integrate import solve_ivp

from . import _kernels
from .coefficients import Coefficient, ConstantModulation, Modulation
from .errors import DomainError, NumericError, PreconditionError, ResourceError
from .quadrature import cosine_weighted_quad, piecewise_gauss

LAMBDA_CAP = 1e4
STEP_CAP = 10**9


@dataclass(frozen=True)
class ModeState:
    t: float
    u: float
    v: float
    lam: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(x) for x in (self.t, self.u, self.v, self.lam)):
            raise NumericError("mode state must be finite")
        if self.lam <= 0:
            raise DomainError("frequency must be positive")


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and caps; ``eta`` is the number of steps per oscillation period."""

    eta: float = 40.0
    rtol: float = 1e-9
    atol: float = 1e-10
    max_step: float | None = None
    lambda_cap: float = LAMBDA_CAP
    step_cap: int = STEP_CAP
    compiled: bool = True

    def __post_init__(self) -> None:
        if self.eta < 10:
            raise PreconditionError("eta must be at least 10")
        if self.rtol <= 0 or self.atol <= 0:
            raise PreconditionError("tolerances must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "IntegratorConfig":
        keys = {"eta", "rtol", "atol", "max_step", "lambda_cap", "step_cap", "compiled"}
        return cls(**{k: v for k, v in doc.items() if k in keys})

    def step_bound(self, lam: float, speed_bound: float, oscillation: float = 0.0) -> float:
        cap = 2.0 * math.pi / (self.eta * lam * math.sqrt(speed_bound))
        if oscillation > 0:
            cap = min(cap, 2.0 * math.pi / (self.eta * oscillation))
        if self.max_step is not None:
            cap = min(cap, self.max_step)
        return cap


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


def kowaleskian_energy(state: ModeState, c_inf: float) -> float:
    """v^2/c_inf^(1/2) + lambda^2 c_inf^(1/2) u^2."""
    if c_inf <= 0:
        raise DomainError("c_inf must be positive")
    return _kow(state.u, state.v, state.lam, c_inf)


def _kow(u, v, lam, c):
    root = np.sqrt(c)
    return v * v / root + lam * lam * root * u * u


def tarama_energy(state: ModeState, c: float, cprime: float) -> float:
    """Kowaleskian form weighted by c(t) plus the correction (c'/2c^(3/2)) u v."""
    if c <= 0:
        raise DomainError("c must be positive")
    return _tar(state.u, state.v, state.lam, c, cprime)


def _tar(u, v, lam, c, cprime):
    return _kow(u, v, lam, c) + 0.5 * cprime / c**1.5 * u * v


def tarama_valid(lam: float, coeff: Coefficient, t: ArrayLike) -> np.ndarray | bool:
    """True where lambda >= |c'(t)| / (2 c(t)^(3/2))."""
    arr = np.asarray(t, dtype=float)
    ok = lam >= np.abs(coeff.dc(arr)) / (2.0 * coeff.c(arr) ** 1.5)
    return bool(ok) if ok.ndim == 0 else ok


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    lam: float
    e_kow: np.ndarray
    e_tar: np.ndarray
    tarama_ok: np.ndarray
    steps: int
    rejected: int
    max_error: float
    route: str
    stats: dict = field(default_factory=dict)

    @property
    def final(self) -> ModeState:
        return ModeState(float(self.t[-1]), float(self.u[-1]), float(self.v[-1]), self.lam)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u", "v", "E_kow", "E_tar", "tarama_valid"])
            for row in zip(self.t, self.u, self.v, self.e_kow, self.e_tar, self.tarama_ok):
                writer.writerow([f"{x:.17g}" for x in row[:5]] + [str(bool(row[5]))])


def _make_trace(coeff, lam, ts, us, vs, steps, rejected, err, route) -> EnergyTrace:
    ts = np.asarray(ts, dtype=float)
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    c = coeff.c(ts)
    dc = coeff.dc(ts)
    return EnergyTrace(
        t=ts, u=us, v=vs, lam=lam,
        e_kow=_kow(us, vs, lam, coeff.c_inf),
        e_tar=_tar(us, vs, lam, c, dc),
        tarama_ok=lam >= np.abs(dc) / (2.0 * c**1.5),
        steps=int(steps), rejected=int(rejected), max_error=float(err), route=route,
    )


def _speed_bound(coeff: Coefficient, t0: float, t1: float) -> float:
    lo, hi = min(t0, t1), max(t0, t1)
    if coeff.majorants is not None:
        grid = np.linspace(lo, hi, 2001)
        return coeff.c_inf + float(np.max(coeff.majorants(grid)[0]))
    span = hi - lo
    n = min(200_001, max(2001, int(span * max(coeff.oscillation, 1.0) * 4)))
    return float(np.max(coeff.c(np.linspace(lo, hi, n))))


def _check_request(coeff: Coefficient, lam: float, t0: float, t_end: float, config: IntegratorConfig) -> None:
    if lam > config.lambda_cap:
        raise ResourceError(f"frequency {lam} above cap {config.lambda_cap}")
    if lam <= 0:
        raise DomainError("frequency must be positive")
    lo = min(t0, t_end)
    if lo < coeff.domain[0] or max(t0, t_end) > coeff.domain[1]:
        raise DomainError("integration interval leaves the coefficient domain")


def integrate_mode(
    coeff: Coefficient,
    lam: float,
    state0: ModeState,
    t_end: float,
    config: IntegratorConfig | None = None,
    times: ArrayLike | None = None,
    speed_bound: float | None = None,
) -> EnergyTrace:
    """Integrate from ``state0`` to ``t_end`` (forward or backward).

    Samples are taken at ``times`` (plus both endpoints) when given, otherwise
    at every accepted step of the general route.
    """
    config = config or IntegratorConfig()
    t0 = state0.t
    _check_request(coeff, lam, t0, t_end, config)
    if speed_bound is None:
        speed_bound = _speed_bound(coeff, t0, t_end)
    h_max = config.step_bound(lam, speed_bound, coeff.oscillation)
    if abs(t_end - t0) / h_max > config.step_cap:
        raise ResourceError("step-count cap would be exceeded")
    direction = 1.0 if t_end >= t0 else -1.0
    out = None
    if times is not None:
        out = np.asarray(times, dtype=float)
        out = out[(direction * (out - t0) > 0) & (direction * (t_end - out) > 0)]
        out = np.concatenate([out, [t_end]])
        out = np.unique(out) if direction > 0 else np.unique(out)[::-1]
    if t_end == t0:
        return _make_trace(coeff, lam, [t0], [state0.u], [state0.v], 0, 0, 0.0, "trivial")
    if config.compiled and coeff.kernel is not None:
        targets = out if out is not None else np.array([t_end])
        kind, params, blocks = coeff.kernel
        res, steps, rej, status, err = _kernels.integrate(
            kind, params, blocks, float(lam), float(t0),
            np.array([state0.u, state0.v]), targets, config.rtol, config.atol,
            h_max, config.step_cap,
        )
        _raise_status(status)
        ts = np.concatenate([[t0], targets])
        us = np.concatenate([[state0.u], res[:, 0]])
        vs = np.concatenate([[state0.v], res[:, 1]])
        return _make_trace(coeff, lam, ts, us, vs, steps, rej, err, "compiled")
    lam2 = lam * lam

    def rhs(t, y):
        return [y[1], -lam2 * float(coeff.c(t)) * y[0]]

    sol = solve_ivp(
        rhs, (t0, t_end), [state0.u, state0.v], method="DOP853",
        t_eval=None if out is None else np.concatenate([[t0], out]),
        rtol=config.rtol, atol=config.atol, max_step=h_max,
    )
    if sol.status != 0:
        raise NumericError(f"integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise NumericError("non-finite state")
    return _make_trace(coeff, lam, sol.t, sol.y[0], sol.y[1], sol.nfev // 12, 0, 0.0, "general")


def _raise_status(status: int) -> None:
    if status == _kernels.STEP_CAP:
        raise ResourceError("step-count cap exceeded")
    if status == _kernels.NON_FINITE:
        raise NumericError("non-finite state")
    if status == _kernels.STEP_TOO_SMALL:
        raise NumericError("step size underflow")


# ---------------------------------------------------------------------------
# Fundamental matrices with exact propagation on constant stretches
# ---------------------------------------------------------------------------


def rotation(lam: float, c: float, dt: float) -> np.ndarray:
    """Exact fundamental matrix of u'' + lambda^2 c u = 0 over a step dt."""
    w = lam * math.sqrt(c)
    s, co = math.sin(w * dt), math.cos(w * dt)
    return np.array([[co, s / w], [-w * s, co]])


@dataclass(frozen=True)
class PropagationStats:
    steps: int = 0
    rejected: int = 0
    max_error: float = 0.0


def _active_segments(coeff: Coefficient, lo: float, hi: float) -> list[tuple[float, float, bool]]:
    if coeff.support is None:
        return [(lo, hi, True)]
    cuts = [lo, hi]
    for a, b in coeff.support:
        cuts += [x for x in (a, b) if lo < x < hi]
    cuts = sorted(set(cuts))
    segs = []
    for x, y in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (x + y)
        active = any(a <= mid <= b for a, b in coeff.support)
        segs.append((x, y, active))
    return segs


def propagate(
    coeff: Coefficient,
    lam: float,
    t0: float,
    times: ArrayLike,
    config: IntegratorConfig | None = None,
    speed_bound: float | None = None,
) -> tuple[np.ndarray, PropagationStats]:
    """Fundamental matrices Phi(t) with Phi(t0) = I at each of ``times``.

    All times must lie on one side of t0. Stretches where c equals c_inf
    are propagated exactly; the rest by the integrator with both unit data
    sets advanced together.
    """
    config = config or IntegratorConfig()
    ts = np.asarray(times, dtype=float)
    if ts.size == 0:
        return np.zeros((0, 2, 2)), PropagationStats()
    forward = bool(np.all(ts >= t0))
    if not forward and not np.all(ts <= t0):
        raise PreconditionError("times must lie on one side of t0")
    order = np.argsort(ts) if forward else np.argsort(-ts)
    sorted_ts = ts[order]
    end = float(sorted_ts[-1])
    _check_request(coeff, lam, t0, end, config)
    lo, hi = (t0, end) if forward else (end, t0)
    segs = _active_segments(coeff, lo, hi)
    if not forward:
        segs = [(y, x, act) for x, y, act in reversed(segs)]
    phi = np.eye(2)
    result = np.empty((ts.size, 2, 2))
    idx = 0
    steps = rejected = 0
    worst = 0.0
    sign = 1.0 if forward else -1.0
    for start, stop, active in segs:
        inside = []
        while idx < sorted_ts.size and sign * (sorted_ts[idx] - stop) <= 0:
            inside.append(float(sorted_ts[idx]))
            idx += 1
        targets = np.array(inside + [stop])
        if not active:
            mats = [rotation(lam, coeff.c_inf, x - start) for x in targets]
        else:
            mats, st = _integrate_matrix(coeff, lam, start, targets, config, speed_bound)
            steps += st.steps
            rejected += st.rejected
            worst = max(worst, st.max_error)
        for j, x in enumerate(inside):
            result[order[idx - len(inside) + j]] = mats[j] @ phi
        phi = mats[-1] @ phi
    while idx < sorted_ts.size:
        result[order[idx]] = phi
        idx += 1
    return result, PropagationStats(steps, rejected, worst)


def _integrate_matrix(coeff, lam, start, targets, config, speed_bound):
    if speed_bound is None:
        speed_bound = _speed_bound(coeff, start, float(targets[-1]))
    h_max = config.step_bound(lam, speed_bound, coeff.oscillation_on(start, float(targets[-1])))
    if abs(targets[-1] - start) / h_max > config.step_cap:
        raise ResourceError("step-count cap would be exceeded")
    if config.compiled and coeff.kernel is not None:
        kind, params, blocks = coeff.kernel
        res, steps, rej, status, err = _kernels.integrate(
            kind, params, blocks, float(lam), float(start),
            np.array([1.0, 0.0, 0.0, 1.0]), targets, config.rtol, config.atol,
            h_max, config.step_cap,
        )
        _raise_status(status)
        mats = [np.array([[r[0], r[2]], [r[1], r[3]]]) for r in res]
        return mats, PropagationStats(int(steps), int(rej), float(err))
    mats = []
    for col in ((1.0, 0.0), (0.0, 1.0)):
        trace = integrate_mode(
            coeff, lam, ModeState(start, col[0], col[1], lam), float(targets[-1]),
            config, times=targets, speed_bound=speed_bound,
        )
        mats.append(np.column_stack([trace.u[1:], trace.v[1:]]))
    return [np.column_stack([mats[0][i], mats[1][i]]) for i in range(len(targets))], PropagationStats()


def propagate_state(
    coeff: Coefficient, state0: ModeState, times: ArrayLike, config: IntegratorConfig | None = None
) -> np.ndarray:
    """States (u, v) at ``times`` from ``state0``; shape (n, 2)."""
    mats, _ = propagate(coeff, state0.lam, state0.t, times, config)
    return mats @ np.array([state0.u, state0.v])


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _as_modulation(eps: Modulation | Callable | float) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(eps, (int, float)):
        return ConstantModulation(float(eps))
    return eps


def dgcs_exponent_integral(
    m: float, lam: float, eps: Modulation | Callable | float, t0: float, t: float
) -> float:
    """Integral of eps(s) sin^2(m lam s) over [t0, t].

    Constant eps is integrated exactly. Otherwise short intervals use a
    quarter-period Gauss rule; long ones split sin^2 = (1 - cos)/2 and treat
    the cosine part with a cosine-weighted rule between breakpoints.
    """
    w = m * lam
    mod = _as_modulation(eps)
    if isinstance(mod, ConstantModulation):
        return mod.value * (0.5 * (t - t0) - (math.sin(2 * w * t) - math.sin(2 * w * t0)) / (4 * w))
    periods = (t - t0) * w / math.pi
    if periods < 2e5:
        value, _ = piecewise_gauss(
            lambda s: np.asarray(mod(s)) * np.sin(w * s) ** 2, t0, t, piece=math.pi / (2 * w)
        )
        return value
    bps = getattr(mod, "breakpoints", lambda: ())()
    edges = [t0, *sorted(p for p in bps if t0 < p < t), t]
    mean = 0.0
    osc = 0.0
    for x, y in zip(edges[:-1], edges[1:]):
        scalar = lambda s: float(np.asarray(mod(np.asarray([s])))[0])  # noqa: E731
        mean += piecewise_gauss(lambda s: np.asarray(mod(s)), x, y, piece=max((y - x) / 64, 1e-6))[0]
        osc += cosine_weighted_quad(scalar, x, y, 2 * w)
    return 0.5 * mean - 0.5 * osc


def closed_form_dgcs(
    m: float, lam: float, eps: Modulation | Callable | float, t0: float, t: ArrayLike
) -> tuple[np.ndarray, np.ndarray]:
    """w = sin(m lam t)/(m lam) exp(1/(8 m^2) int_{t0}^t eps sin^2(m lam s) ds) and w'."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < t0):
        raise DomainError("closed form requested before t0")
    mod = _as_modulation(eps)
    w = m * lam
    order = np.argsort(ts)
    ints = np.empty_like(ts)
    acc = 0.0
    prev = t0
    for i in order:
        acc += dgcs_exponent_integral(m, lam, mod, prev, float(ts[i]))
        ints[i] = acc
        prev = float(ts[i])
    growth = np.exp(ints / (8 * m * m))
    s, co = np.sin(w * ts), np.cos(w * ts)
    e = np.asarray(mod(ts), dtype=float) + 0.0 * ts
    val = s / w * growth
    der = co * growth + s / w * growth * e * s * s / (8 * m * m)
    if np.ndim(t) == 0:
        return val[0], der[0]
    return val, der


def no_way_exponent_integral(t: ArrayLike) -> np.ndarray:
    """Integral of sin(s)^2 / s over [1, t], via the cosine integral."""
    ts = np.asarray(t, dtype=float)
    ci_t = special.sici(2 * ts)[1]
    ci_1 = special.sici(2.0)[1]
    return 0.5 * np.log(ts) - 0.5 * (ci_t - ci_1)


def closed_form_no_way(t: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """w = sin(t) exp(1/8 int_1^t sin^2(s)/s ds) and w', for t >= 1."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 1.0):
        raise DomainError("closed form defined for t >= 1")
    growth = np.exp(no_way_exponent_integral(ts) / 8.0)
    s, co = np.sin(ts), np.cos(ts)
    return s * growth, co * growth + s * growth * s * s / (8.0 * ts)


def residual(
    w: Callable[[np.ndarray], np.ndarray],
    coeff: Callable[[np.ndarray], np.ndarray],
    lam: float,
    ts: Sequence[float],
    h: float | None = None,
) -> float:
    """max |w'' + lam^2 c w| / max |lam^2 c w| over ``ts``, with w'' from a 5-point stencil.

    The default step 0.01 / (lam sqrt(max c)) balances truncation against
    cancellation for functions oscillating at the mode frequency.
    """
    ts = np.asarray(ts, dtype=float)
    c = np.asarray(coeff(ts), dtype=float)
    if h is None:
        h = 1e-2 / (lam * math.sqrt(float(np.max(c))))
    wpp = (
        -w(ts + 2 * h) + 16 * w(ts + h) - 30 * w(ts) + 16 * w(ts - h) - w(ts - 2 * h)
    ) / (12 * h * h)
    term = lam * lam * c * w(ts)
    return float(np.max(np.abs(wpp + term)) / np.max(np.abs(term)))
