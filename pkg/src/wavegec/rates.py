"""Rate functions of an admissible class and the envelopes derived from them.

A class is fixed by hyperbolicity bounds ``lambda1 <= c <= lambda2``, a
derivative rate ``gamma`` controlling ``|c'| <= gamma`` and
``|c''| <= gamma**2``, and a stabilization rate ``S`` bounding the tail
integral of ``|c - c_inf|``.  From these we build

* the cumulative rate ``G(t) = int_{t0}^t gamma^2``,
* the growth envelope ``M(t) = max_{[t0, t]} G S``,

plus the power-law classification and two analytic lemmas used by the
counterexample construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import interpolate, optimize

from .errors import DomainError, OutOfScopeError, PreconditionError
from .quadrature import adaptive_quad, piecewise_gauss

NON_INCREASING = "non-increasing"
NON_DECREASING = "non-decreasing"

M_GRID_RATIO = 1.01
M_STABLE_TOL = 1e-6

Scalar = Callable[[ArrayLike], np.ndarray]


# ---------------------------------------------------------------------------
# Class constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassParams:
    """Constants t0, lambda1, lambda2, lambda3 and c_inf of a class."""

    t0: float
    lambda1: float
    lambda2: float
    lambda3: float | None = None
    c_inf: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.lambda1 <= self.lambda2):
            raise PreconditionError(
                f"need 0 < lambda1 <= lambda2, got {self.lambda1}, {self.lambda2}"
            )
        if self.c_inf is None:
            object.__setattr__(self, "c_inf", 0.5 * (self.lambda1 + self.lambda2))
        if not (self.lambda1 <= self.c_inf <= self.lambda2):
            raise PreconditionError(
                f"c_inf={self.c_inf} outside [{self.lambda1}, {self.lambda2}]"
            )
        if self.lambda3 is not None and self.lambda3 < 0:
            raise PreconditionError("lambda3 must be non-negative")

    def to_dict(self) -> dict[str, float | None]:
        return {
            "t0": self.t0,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "c_inf": self.c_inf,
        }


# ---------------------------------------------------------------------------
# Rate profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerForm:
    """gamma(t) = t**(-beta), S(t) = t**alpha."""

    beta: float
    alpha: float


def _as_array(t: ArrayLike) -> np.ndarray:
    return np.asarray(t, dtype=float)


@dataclass(frozen=True, eq=False)
class RateProfile:
    """The pair (gamma, S) together with cached G and M.

    ``gamma_derivatives`` holds callables for gamma', gamma'', gamma'''
    (any prefix may be supplied).  ``cumulative`` is an optional closed form
    for G; power forms always have one.
    """

    t0: float
    gamma: Scalar
    stab: Scalar
    gamma_monotonicity: str
    gamma_derivatives: tuple[Scalar, ...] = ()
    stab_vanishes: bool = True
    form: PowerForm | None = None
    cumulative: Scalar | None = None
    knots: tuple[float, ...] = ()
    description: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.gamma_monotonicity not in (NON_INCREASING, NON_DECREASING):
            raise PreconditionError(
                f"unknown monotonicity flag {self.gamma_monotonicity!r}"
            )
        if len(self.gamma_derivatives) > 3:
            raise PreconditionError("at most three derivatives of gamma are used")

    # -- elementary evaluators ------------------------------------------------

    @property
    def flags(self) -> tuple[str, ...]:
        return () if self.stab_vanishes else ("non-vanishing",)

    def g(self, t: ArrayLike) -> np.ndarray:
        """The squared rate gamma(t)**2."""
        return self.gamma(t) ** 2

    def dg(self, t: ArrayLike) -> np.ndarray:
        """Derivative of gamma**2."""
        if not self.gamma_derivatives:
            raise PreconditionError("profile carries no derivative of gamma")
        return 2.0 * self.gamma(t) * self.gamma_derivatives[0](t)

    def _check_time(self, t: np.ndarray) -> None:
        if np.any(t < self.t0):
            raise DomainError(f"time below t0={self.t0}")

    # -- cumulative rate ------------------------------------------------------

    def G(self, t: ArrayLike) -> np.ndarray | float:
        """Cumulative rate G(t); vectorized."""
        arr = _as_array(t)
        self._check_time(arr)
        if self.cumulative is not None:
            out = np.asarray(self.cumulative(arr), dtype=float)
        elif arr.ndim == 0:
            out = np.asarray(self._G_scalar(float(arr)))
        else:
            out = self._G_sorted(arr)
        return float(out) if out.ndim == 0 else out

    @lru_cache(maxsize=4096)
    def _G_scalar(self, t: float) -> float:
        pts = [k for k in self.knots if self.t0 < k < t]
        return adaptive_quad(lambda s: float(self.g(s)), self.t0, t, points=pts)

    def _G_sorted(self, arr: np.ndarray) -> np.ndarray:
        flat = arr.ravel()
        order = np.argsort(flat)
        out = np.empty_like(flat)
        acc = 0.0
        prev = self.t0
        for idx in order:
            t = float(flat[idx])
            if t > prev:
                pts = [k for k in self.knots if prev < k < t]
                acc += adaptive_quad(lambda s: float(self.g(s)), prev, t, points=pts)
                prev = t
            out[idx] = acc
        return out.reshape(arr.shape)

    def GS(self, t: ArrayLike) -> np.ndarray | float:
        """The product G(t) S(t)."""
        arr = _as_array(t)
        out = np.asarray(self.G(arr)) * self.stab(arr)
        return float(out) if np.ndim(out) == 0 else out

    # -- growth envelope -------------------------------------------------------

    def M(self, t: float) -> float:
        """Growth envelope M(t) = max of G S over [t0, t]."""
        t = float(t)
        self._check_time(np.asarray(t))
        if t == self.t0:
            return 0.0
        if self.form is not None:
            return _power_envelope(self.form, self.t0, t)
        return self._M_grid(t)

    @lru_cache(maxsize=1024)
    def _M_grid(self, t: float) -> float:
        best, arg = _grid_running_max(self.GS, self.t0, t)
        return best if arg is None else _polish_max(self.GS, self.t0, t, arg, best)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.description)


def _grid_running_max(
    f: Callable[[np.ndarray], np.ndarray], t0: float, t: float
) -> tuple[float, float | None]:
    """Maximum of ``f`` on a log-spaced grid, refined until stable."""
    span = math.log1p(t - t0)
    n = max(65, int(math.ceil(span / math.log(M_GRID_RATIO))) + 1)
    prev = None
    for _ in range(12):
        grid = t0 + np.expm1(np.linspace(0.0, span, n))
        grid[-1] = t
        vals = np.asarray(f(grid), dtype=float)
        i = int(np.argmax(vals))
        best = float(vals[i])
        if prev is not None and abs(best - prev) <= M_STABLE_TOL * max(abs(best), 1e-300):
            arg = float(grid[i]) if 0 < i < n - 1 else None
            return best, arg
        prev = best
        n = 2 * n - 1
    arg = float(grid[i]) if 0 < i < n - 1 else None
    return best, arg


def _polish_max(
    f: Callable[[np.ndarray], np.ndarray], t0: float, t: float, arg: float, best: float
) -> float:
    width = max(1e-9, 0.02 * (arg - t0 + 1.0))
    lo, hi = max(t0, arg - width), min(t, arg + width)
    res = optimize.minimize_scalar(
        lambda s: -float(f(np.asarray(s))), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(arg))},
    )
    return max(best, -float(res.fun))


# ---------------------------------------------------------------------------
# Power forms
# ---------------------------------------------------------------------------


def power_G(beta: float, t0: float, t: ArrayLike) -> np.ndarray:
    """Closed-form G for gamma = t**(-beta); stable near beta = 1/2."""
    arr = _as_array(t)
    p = 1.0 - 2.0 * beta
    log_ratio = np.log(arr / t0)
    if p == 0.0:
        return log_ratio
    return t0**p * np.expm1(p * log_ratio) / p


def power_envelope_peak(form: PowerForm, t0: float) -> float:
    """Location of the maximum of G S for a power form (inf if increasing)."""
    beta, alpha = form.beta, form.alpha
    p = 1.0 - 2.0 * beta
    if alpha == 0.0:
        return math.inf
    if p == 0.0:
        return t0 * math.exp(-1.0 / alpha)
    if p + alpha >= 0.0:
        return math.inf
    return t0 * (alpha / (p + alpha)) ** (1.0 / p)


def _power_envelope(form: PowerForm, t0: float, t: float) -> float:
    peak = power_envelope_peak(form, t0)
    s = min(t, peak)
    return float(power_G(form.beta, t0, s)) * s**form.alpha


def power_lambda3(beta: float, t0: float) -> float:
    """Smallest Lambda3 with |gamma^(k)| <= Lambda3 gamma on [t0, inf), k=1..3."""
    coeffs = [abs(beta), abs(beta * (beta + 1.0)), abs(beta * (beta + 1.0) * (beta + 2.0))]
    return max(c / t0 ** (k + 1) for k, c in enumerate(coeffs))


def power_profile(beta: float, alpha: float, t0: float) -> RateProfile:
    """Profile gamma = t**(-beta), S = t**alpha on [t0, inf) with t0 > 0."""
    if alpha > 0:
        raise OutOfScopeError(f"alpha={alpha} > 0: S would not be non-increasing")
    if t0 <= 0:
        raise DomainError("power profiles need t0 > 0")
    b = float(beta)
    a = float(alpha)
    return RateProfile(
        t0=float(t0),
        gamma=lambda t: _as_array(t) ** (-b),
        gamma_derivatives=(
            lambda t: -b * _as_array(t) ** (-b - 1.0),
            lambda t: b * (b + 1.0) * _as_array(t) ** (-b - 2.0),
            lambda t: -b * (b + 1.0) * (b + 2.0) * _as_array(t) ** (-b - 3.0),
        ),
        gamma_monotonicity=NON_INCREASING if b >= 0 else NON_DECREASING,
        stab=lambda t: _as_array(t) ** a,
        stab_vanishes=a < 0,
        form=PowerForm(b, a),
        cumulative=lambda t: power_G(b, float(t0), t),
        description={
            "t0": float(t0),
            "gamma": {"form": "power", "beta": b},
            "stab": {"form": "power", "alpha": a},
        },
    )


def fast_growth_profile() -> RateProfile:
    """gamma(t) = 2 sqrt(t) exp(t^2), S(t) = (t+1)^(-1/2) on [0, inf).

    G(t) = exp(2 t^2) - 1 in closed form.  Derivatives of gamma grow faster
    than gamma itself, so no derivative control constant exists.
    """
    return RateProfile(
        t0=0.0,
        gamma=lambda t: 2.0 * np.sqrt(_as_array(t)) * np.exp(_as_array(t) ** 2),
        gamma_monotonicity=NON_DECREASING,
        stab=lambda t: 1.0 / np.sqrt(_as_array(t) + 1.0),
        cumulative=lambda t: np.expm1(2.0 * _as_array(t) ** 2),
        description={"t0": 0.0, "gamma": {"form": "fast_growth"}, "stab": {"form": "inverse_sqrt"}},
    )


@dataclass(frozen=True)
class PowerClassification:
    """Outcome of the power-law classification."""

    kind: str  # "GEC", "growth" or "log-corrected"
    exponent: float | None
    non_vanishing: bool

    @property
    def gec(self) -> bool:
        return self.kind == "GEC"

    def summary(self) -> str:
        if self.kind == "GEC":
            return "GEC"
        if self.kind == "log-corrected":
            return "GEC fails, M ~ log t"
        return f"growth exponent {self.exponent:.6g}"


def classify_power(beta: float, alpha: float) -> PowerClassification:
    """Classify gamma = t**(-beta), S = t**alpha.

    GEC holds iff 2 beta >= 1 + alpha, except at alpha = 0, beta = 1/2 where
    M grows like log t.  Otherwise the envelope exponent is (1+alpha)/2 - beta.
    """
    if alpha > 0:
        raise OutOfScopeError(f"alpha={alpha} > 0 is outside the admissible range")
    non_vanishing = alpha == 0
    if alpha == 0 and beta == 0.5:
        return PowerClassification("log-corrected", None, True)
    if 2.0 * beta >= 1.0 + alpha:
        return PowerClassification("GEC", None, non_vanishing)
    return PowerClassification("growth", 0.5 * (1.0 + alpha) - beta, non_vanishing)


# ---------------------------------------------------------------------------
# Tabulated and custom profiles
# ---------------------------------------------------------------------------


def _monotone_table(knots: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(knots, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise PreconditionError("table knots must be a list of [t, value] pairs")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise PreconditionError("table knots must have strictly increasing times")
    return arr[:, 0], arr[:, 1]


def _table_function(ts: np.ndarray, vs: np.ndarray) -> tuple[Scalar, Scalar]:
    """Monotone cubic interpolant, flat beyond the last knot."""
    pchip = interpolate.PchipInterpolator(ts, vs, extrapolate=False)
    dpchip = pchip.derivative()

    def value(t: ArrayLike) -> np.ndarray:
        arr = np.clip(_as_array(t), ts[0], ts[-1])
        return np.asarray(pchip(arr), dtype=float)

    def deriv(t: ArrayLike) -> np.ndarray:
        arr = _as_array(t)
        inside = (arr >= ts[0]) & (arr <= ts[-1])
        out = np.where(inside, dpchip(np.clip(arr, ts[0], ts[-1])), 0.0)
        return np.asarray(out, dtype=float)

    return value, deriv


def table_profile(
    t0: float,
    gamma_knots: Sequence[Sequence[float]],
    stab_knots: Sequence[Sequence[float]],
) -> RateProfile:
    """Profile from tabulated (t, value) knots using monotone cubic interpolation."""
    gt, gv = _monotone_table(gamma_knots)
    st, sv = _monotone_table(stab_knots)
    if gt[0] > t0 or st[0] > t0:
        raise PreconditionError("table knots must start at or before t0")
    if np.any(gv < 0):
        raise PreconditionError("gamma must be non-negative")
    if np.any(np.diff(sv) > 0):
        raise PreconditionError("S must be non-increasing")
    dg = np.diff(gv)
    if np.all(dg <= 0):
        mono = NON_INCREASING
    elif np.all(dg >= 0):
        mono = NON_DECREASING
    else:
        raise PreconditionError("gamma knots must be monotone")
    gamma, dgamma = _table_function(gt, gv)
    stab, _ = _table_function(st, sv)
    return RateProfile(
        t0=float(t0),
        gamma=gamma,
        gamma_derivatives=(dgamma,),
        gamma_monotonicity=mono,
        stab=stab,
        stab_vanishes=bool(sv[-1] == 0.0),
        knots=tuple(float(k) for k in gt),
        description={
            "t0": float(t0),
            "gamma": {"form": "table", "knots": np.column_stack([gt, gv]).tolist()},
            "stab": {"form": "table", "knots": np.column_stack([st, sv]).tolist()},
        },
    )


def check_profile(profile: RateProfile, grid: ArrayLike, lambda3: float | None = None) -> None:
    """Check sign, monotonicity and derivative-control invariants on ``grid``."""
    ts = np.sort(_as_array(grid))
    gam = profile.gamma(ts)
    if np.any(gam < 0):
        raise PreconditionError("gamma is negative on the grid")
    step = np.diff(gam)
    tol = 1e-12 * np.maximum(1.0, np.abs(gam[1:]))
    if profile.gamma_monotonicity == NON_INCREASING and np.any(step > tol):
        raise PreconditionError("gamma is not non-increasing on the grid")
    if profile.gamma_monotonicity == NON_DECREASING and np.any(step < -tol):
        raise PreconditionError("gamma is not non-decreasing on the grid")
    s = profile.stab(ts)
    if np.any(np.diff(s) > 1e-12 * np.maximum(1.0, np.abs(s[1:]))):
        raise PreconditionError("S is not non-increasing on the grid")
    if lambda3 is not None:
        if len(profile.gamma_derivatives) < 3:
            raise PreconditionError("lambda3 check needs three derivatives of gamma")
        worst = max(np.max(np.abs(d(ts)) - lambda3 * gam) for d in profile.gamma_derivatives)
        if worst > 1e-12 * max(1.0, float(np.max(gam))):
            raise PreconditionError("derivative control by lambda3 fails on the grid")


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------

PROFILE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["t0", "lambda1", "lambda2", "gamma", "stab"],
    "properties": {
        "t0": {"type": "number"},
        "lambda1": {"type": "number", "exclusiveMinimum": 0},
        "lambda2": {"type": "number", "exclusiveMinimum": 0},
        "lambda3": {"type": ["number", "null"], "minimum": 0},
        "c_inf": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "gamma": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["form", "beta"],
                    "properties": {"form": {"const": "power"}, "beta": {"type": "number"}},
                },
                {
                    "type": "object",
                    "required": ["form", "knots"],
                    "properties": {
                        "form": {"const": "table"},
                        "knots": {"type": "array", "minItems": 2},
                    },
                },
            ]
        },
        "stab": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["form", "alpha"],
                    "properties": {"form": {"const": "power"}, "alpha": {"type": "number"}},
                },
                {
                    "type": "object",
                    "required": ["form", "knots"],
                    "properties": {
                        "form": {"const": "table"},
                        "knots": {"type": "array", "minItems": 2},
                    },
                },
            ]
        },
    },
}


def profile_from_json(doc: dict[str, Any] | str) -> tuple[ClassParams, RateProfile]:
    """Build class parameters and a rate profile from a JSON description."""
    import jsonschema

    data = json.loads(doc) if isinstance(doc, str) else dict(doc)
    try:
        jsonschema.validate(data, PROFILE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise PreconditionError(f"profile description invalid: {exc.message}") from exc
    t0 = float(data["t0"])
    gam, stab = data["gamma"], data["stab"]
    if gam["form"] == "power" and stab["form"] == "power":
        profile = power_profile(gam["beta"], stab["alpha"], t0)
        lambda3 = data.get("lambda3")
        if lambda3 is None:
            lambda3 = power_lambda3(gam["beta"], t0)
    else:
        if gam["form"] == "power":
            b = float(gam["beta"])
            grid = np.geomspace(t0, max(10.0 * t0, t0 + 1e4), 400)
            gam = {"knots": np.column_stack([grid, grid ** (-b)]).tolist()}
        if stab["form"] == "power":
            a = float(stab["alpha"])
            grid = np.geomspace(t0, max(10.0 * t0, t0 + 1e4), 400)
            stab = {"knots": np.column_stack([grid, grid**a]).tolist()}
        profile = table_profile(t0, gam["knots"], stab["knots"])
        lambda3 = data.get("lambda3")
    params = ClassParams(
        t0=t0,
        lambda1=float(data["lambda1"]),
        lambda2=float(data["lambda2"]),
        lambda3=None if lambda3 is None else float(lambda3),
        c_inf=data.get("c_inf"),
    )
    return params, profile


# ---------------------------------------------------------------------------
# Public evaluators
# ---------------------------------------------------------------------------


def eval_G(profile: RateProfile, t: float) -> float:
    """Cumulative rate at ``t``; raises DomainError below t0."""
    return float(profile.G(float(t)))


def eval_M(profile: RateProfile, t: float) -> float:
    """Growth envelope at ``t``; raises DomainError below t0."""
    return profile.M(float(t))


def eval_M_grid(profile: RateProfile, t: float) -> float:
    """Growth envelope by grid refinement only, bypassing closed forms."""
    if t < profile.t0:
        raise DomainError(f"time below t0={profile.t0}")
    if t == profile.t0:
        return 0.0
    best, arg = _grid_running_max(profile.GS, profile.t0, float(t))
    return best if arg is None else _polish_max(profile.GS, profile.t0, float(t), arg, best)


def envelope_trend(profile: RateProfile, horizon: float, samples: int = 41) -> dict[str, float | str]:
    """Sup of G S up to ``horizon`` and the log-log slope of M over the last decade."""
    t0 = profile.t0
    ts = t0 + np.geomspace(1e-3, horizon - t0, samples)
    ms = np.array([profile.M(float(t)) for t in ts])
    tail = ts >= ts[-1] / 10.0
    pos = tail & (ms > 0)
    slope = float(np.polyfit(np.log(ts[pos]), np.log(ms[pos]), 1)[0]) if pos.sum() >= 2 else 0.0
    trend = "growing" if slope > 1e-3 else "bounded"
    return {"sup_GS": float(ms[-1]), "slope": slope, "trend": trend, "horizon": float(horizon)}


# ---------------------------------------------------------------------------
# Lemmas on a generic non-negative monotone function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpGrowthConstants:
    gamma1: float
    gamma2: float


def _default_lemma_grid(t0: float) -> np.ndarray:
    return np.concatenate(
        [t0 + np.linspace(0.0, 1.0, 101), t0 + np.geomspace(1.0, 1e2, 300)[1:]]
    )


def _five_point_derivative(f: Scalar, t: np.ndarray) -> np.ndarray:
    h = 1e-4 * np.maximum(1.0, np.abs(t))
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def exp_growth_constants(
    g: Scalar,
    lambda4: float,
    t0: float,
    dg: Scalar | None = None,
    grid: ArrayLike | None = None,
) -> ExpGrowthConstants:
    """Constants Gamma1, Gamma2 for a function with |g'| <= lambda4 g.

    Gamma1 = max(lambda4, g(t0+1)/G(t0+1)), or lambda4 when G(t0+1) = 0;
    Gamma2 = exp(Gamma1).  The precondition is checked on ``grid``.
    """
    ts = _default_lemma_grid(t0) if grid is None else _as_array(grid)
    if dg is None:
        ts = ts[ts > t0 + 1e-3]
        dvals = _five_point_derivative(g, ts)
        slack = 1e-6
    else:
        dvals = np.asarray(dg(ts), dtype=float)
        slack = 1e-12
    vals = np.asarray(g(ts), dtype=float)
    excess = np.abs(dvals) - lambda4 * vals
    if np.any(excess > slack * np.maximum(1.0, vals)):
        where = float(ts[int(np.argmax(excess))])
        raise PreconditionError(f"|g'| <= {lambda4} g fails at t={where}")
    G1 = adaptive_quad(lambda s: float(g(s)), t0, t0 + 1.0)
    if G1 <= 0.0:
        gamma1 = float(lambda4)
    else:
        gamma1 = max(float(lambda4), float(g(t0 + 1.0)) / G1)
    return ExpGrowthConstants(gamma1, math.exp(gamma1))


def osc_integral_bound(
    g: Scalar, alpha: float, beta: float, ell: float, increment: float | None = None
) -> float:
    """Lower bound 0.5 (G(beta) - G(alpha)) - max(g(alpha), g(beta)) / ell
    for the integral of g(tau) sin^2(ell tau) over [alpha, beta]."""
    if ell <= 0:
        raise DomainError(f"angular rate must be positive, got {ell}")
    if beta < alpha:
        raise DomainError("interval endpoints out of order")
    if increment is None:
        increment = adaptive_quad(lambda s: float(g(s)), alpha, beta)
    return 0.5 * increment - max(float(g(alpha)), float(g(beta))) / ell


def osc_integral(g: Scalar, alpha: float, beta: float, ell: float) -> float:
    """Direct quadrature of g(tau) sin^2(ell tau), one rule per half period."""
    if ell <= 0:
        raise DomainError(f"angular rate must be positive, got {ell}")
    value, _ = piecewise_gauss(
        lambda s: np.asarray(g(s), dtype=float) * np.sin(ell * s) ** 2,
        alpha, beta, piece=min(math.pi / ell, max(beta - alpha, 1e-300)),
    )
    return value


def check_osc_integral(g: Scalar, alpha: float, beta: float, ell: float) -> tuple[float, float]:
    """Return (quadrature, bound) and assert the quadrature dominates the bound."""
    value = osc_integral(g, alpha, beta, ell)
    bound = osc_integral_bound(g, alpha, beta, ell)
    if value < bound - 1e-9 * max(1.0, abs(value)):
        raise PreconditionError(f"oscillating integral {value} below bound {bound}")
    return value, bound


def power_tail_integral(coefficient: float, power: float, t: float) -> float:
    """Integral over [t, inf) of coefficient * s**(-power), power > 1."""
    if power <= 1:
        return math.inf
    return coefficient * t ** (1.0 - power) / (power - 1.0)
