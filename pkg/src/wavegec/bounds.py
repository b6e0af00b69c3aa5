"""Growth envelopes, estimate factors, switch selection and the certification sweep."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .coefficients import Coefficient, verify_membership
from .errors import InternalError, PreconditionError
from .mode_dynamics import IntegratorConfig, propagate, tarama_valid
from .quadrature import abs_gauss_pieces, adaptive_quad
from .rates import NON_DECREASING, ClassParams, RateProfile

SLACK = 0.05
BISECTION_REL_TOL = 1e-9

SMALL = "small-frequency"
LARGE_T1 = "large-t1"
LARGE_T2 = "large-t2"
DECREASING_T1 = "non-increasing-t1"


@dataclass(frozen=True)
class TheoremConstants:
    H1: float
    H2: float
    H3: float
    H4: float

    def pair(self, monotonicity: str) -> tuple[float, float]:
        """(prefactor, exponent constant) for the given monotonicity of gamma."""
        return (self.H1, self.H2) if monotonicity == NON_DECREASING else (self.H3, self.H4)

    def to_dict(self) -> dict[str, float]:
        return {"H1": self.H1, "H2": self.H2, "H3": self.H3, "H4": self.H4}


def theorem_constants(params: ClassParams, profile: RateProfile) -> TheoremConstants:
    l1, l2 = params.lambda1, params.lambda2
    h1 = 3.0 * l2 / l1
    h4 = math.sqrt(2.0 * l1 + 3.0) / l1**1.5
    h2 = max(2.0 * math.sqrt(l2 - l1) / l1**2, h4)
    t0 = profile.t0
    h3 = max(h1, math.exp(float(profile.gamma(t0)) * float(profile.stab(t0)) / (2.0 * l1**2)))
    return TheoremConstants(h1, h2, h3, h4)


# ---------------------------------------------------------------------------
# Estimate factors (exponents are exposed too, since factors overflow easily)
# ---------------------------------------------------------------------------


def kow_exponent(lam: float, stab_integral: float, params: ClassParams) -> float:
    if stab_integral < 0:
        raise PreconditionError("deviation integral must be non-negative")
    return lam * stab_integral / math.sqrt(params.lambda1)


def kow_factor(lam: float, stab_integral: float, params: ClassParams) -> float:
    return math.exp(kow_exponent(lam, stab_integral, params))


def tar_exponent(lam: float, delta_g: float, params: ClassParams) -> float:
    if delta_g < 0 or lam <= 0:
        raise PreconditionError("need delta G >= 0 and lambda > 0")
    l1 = params.lambda1
    return (2.0 * l1 + 3.0) * delta_g / (4.0 * l1**2.5 * lam)


def tar_factor(lam: float, delta_g: float, params: ClassParams) -> float:
    return math.exp(tar_exponent(lam, delta_g, params))


def balance_frequency(delta_g: float, stab_integral: float, params: ClassParams) -> float:
    """Frequency at which the Tarama and Kowaleskian exponents coincide."""
    l1 = params.lambda1
    return math.sqrt((2.0 * l1 + 3.0) * delta_g / (4.0 * l1**2 * stab_integral))


class DeviationTable:
    """Cumulative integral of |c - c_inf| from ``lo``, tabulated on short pieces.

    Queries combine the table with one Gauss rule on the partial piece, so
    repeated evaluations (bisection) cost almost nothing.
    """

    def __init__(self, coeff: Coefficient, lo: float, hi: float) -> None:
        self.coeff = coeff
        self.lo = lo
        self.hi = hi
        segs: list[tuple[float, float]] = []
        if coeff.support is None:
            segs = [(lo, hi)]
        else:
            segs = [(max(a, lo), min(b, hi)) for a, b in coeff.support if min(b, hi) > max(a, lo)]
        nodes = [lo]
        values = [0.0]
        for a, b in segs:
            if a > nodes[-1]:
                nodes.append(a)
                values.append(values[-1])
            piece = self._piece(a, b)
            count = max(1, int(math.ceil((b - a) / piece)))
            edges = np.linspace(a, b, count + 1)
            parts = self._pieces(edges)
            nodes.extend(edges[1:].tolist())
            values.extend((values[-1] + np.cumsum(parts)).tolist())
        if hi > nodes[-1]:
            nodes.append(hi)
            values.append(values[-1])
        self.nodes = np.asarray(nodes)
        self.values = np.asarray(values)

    def _piece(self, a: float, b: float) -> float:
        osc = self.coeff.oscillation
        base = math.pi / (2.0 * osc) if osc > 0 else (b - a) / 64.0
        return max(base, (b - a) / 2_000_000)

    def _pieces(self, edges: np.ndarray) -> np.ndarray:
        out = np.empty(edges.size - 1)
        chunk = 100_000
        for s in range(0, out.size, chunk):
            out[s:s + chunk] = abs_gauss_pieces(
                lambda t: self.coeff.c(t) - self.coeff.c_inf, edges[s:s + chunk + 1], nodes=16
            )
        return out

    def cumulative(self, t: float) -> float:
        if t <= self.lo:
            return 0.0
        t = min(t, self.hi)
        i = int(np.searchsorted(self.nodes, t, side="right")) - 1
        i = min(i, self.nodes.size - 1)
        base = float(self.values[i])
        left = float(self.nodes[i])
        if t > left:
            base += float(self._pieces(np.array([left, t]))[0])
        return base

    def integral(self, x: float, y: float) -> float:
        return max(0.0, self.cumulative(y) - self.cumulative(x))


def mixed_exponent(
    a: float,
    switch: float,
    end: float,
    lam: float,
    profile: RateProfile,
    coeff: Coefficient,
    params: ClassParams,
    table: DeviationTable | None = None,
) -> float:
    """Log of the mixed factor, without the 3 Lambda2/Lambda1 prefactor."""
    if not (profile.t0 <= a <= switch <= end):
        raise PreconditionError("need t0 <= a <= switch <= end")
    _check_tarama(a, switch, lam, profile, coeff, params)
    dg = float(profile.G(switch)) - float(profile.G(a))
    dev = table.integral(switch, end) if table is not None else coeff.abs_deviation_integral(switch, end)
    return tar_exponent(lam, max(dg, 0.0), params) + kow_exponent(lam, dev, params)


def mixed_factor(
    a: float,
    switch: float,
    end: float,
    lam: float,
    profile: RateProfile,
    coeff: Coefficient,
    params: ClassParams,
) -> float:
    """(3 Lambda2/Lambda1) exp(Tarama exponent on [a, switch] + Kowaleskian on [switch, end])."""
    return 3.0 * params.lambda2 / params.lambda1 * math.exp(
        mixed_exponent(a, switch, end, lam, profile, coeff, params)
    )


def _check_tarama(a, b, lam, profile, coeff, params) -> None:
    if b <= a:
        return
    # class-level sufficient condition: |c'| <= gamma and c >= Lambda1
    gmax = max(float(profile.gamma(a)), float(profile.gamma(b)))
    if lam >= gmax / (2.0 * params.lambda1**1.5):
        return
    ts = np.linspace(a, b, 20_001)
    if not np.all(tarama_valid(lam, coeff, ts)):
        raise PreconditionError("Tarama energy not admissible on the switch interval")


# ---------------------------------------------------------------------------
# Switch selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SwitchPlan:
    branch: str
    switch: float | None
    t1: float | None
    tar_exponent: float
    kow_exponent: float
    prefactor: float
    residual: float = 0.0

    @property
    def log_factor(self) -> float:
        return math.log(self.prefactor) + self.tar_exponent + self.kow_exponent

    def to_dict(self) -> dict[str, Any]:
        return {
            "branch": self.branch, "switch": self.switch, "t1": self.t1,
            "tar_exponent": self.tar_exponent, "kow_exponent": self.kow_exponent,
            "prefactor": self.prefactor, "log_factor": self.log_factor,
            "residual": self.residual,
        }


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    """Root of f with f(lo) <= 0 <= f(hi): bisection down to ``tol``, then one
    secant step inside the final bracket."""
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise InternalError(f"switch root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # bracket is already adjacent floats
        fmid = f(mid)
        if fmid <= 0:
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    if fhi == flo:
        return lo
    return min(hi, max(lo, lo - flo * (hi - lo) / (fhi - flo)))


def select_switch(
    t: float,
    lam: float,
    profile: RateProfile,
    coeff: Coefficient,
    params: ClassParams,
    table: DeviationTable | None = None,
) -> SwitchPlan:
    """Case analysis of the upper estimate at time ``t`` and frequency ``lam``."""
    t0 = profile.t0
    if t < t0:
        raise PreconditionError("t below t0")
    l1 = params.lambda1
    table = table or DeviationTable(coeff, t0, t)
    prefactor = 3.0 * params.lambda2 / l1
    threshold = 2.0 * l1**1.5 * lam
    tol = BISECTION_REL_TOL * max(t - t0, 1e-300)
    balance = 4.0 * l1**2 / (2.0 * l1 + 3.0) * lam**2

    def G(s: float) -> float:
        return float(profile.G(s))

    def plan(branch: str, s: float, t1: float | None, residual: float = 0.0) -> SwitchPlan:
        return SwitchPlan(
            branch, s, t1,
            tar_exponent(lam, max(G(s), 0.0), params),
            kow_exponent(lam, table.integral(s, t), params),
            prefactor, residual,
        )

    def gap(s: float) -> float:
        return G(s) - balance * table.integral(s, t)

    if lam <= float(profile.gamma(t0)) / (2.0 * l1**1.5):
        return SwitchPlan(SMALL, None, None, 0.0, kow_exponent(lam, table.integral(t0, t), params), 1.0)
    if t == t0:
        return plan(LARGE_T1, t0, t0)
    if profile.gamma_monotonicity == NON_DECREASING:
        if float(profile.gamma(t)) <= threshold:
            t1 = t
        else:
            t1 = _bisect(lambda s: float(profile.gamma(s)) - threshold, t0, t, tol)
        if gap(t1) <= 0:
            return plan(LARGE_T1, t1, t1)
        t2 = _bisect(gap, t0, t1, tol)
        return plan(LARGE_T2, t2, t1, abs(gap(t2)))
    t1 = _bisect(gap, t0, t, tol)
    return plan(DECREASING_T1, t1, t1, abs(gap(t1)))


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


def log_upper_envelope(t: float, params: ClassParams, profile: RateProfile) -> float:
    h, k = theorem_constants(params, profile).pair(profile.gamma_monotonicity)
    return math.log(h) + k * math.sqrt(profile.M(t))


def upper_envelope(t: float, params: ClassParams, profile: RateProfile) -> float:
    """H1 exp(H2 M(t)^(1/2)) or H3 exp(H4 M(t)^(1/2)) by the monotonicity of gamma."""
    return math.exp(log_upper_envelope(t, params, profile))


def lower_envelope(t: float, params: ClassParams, profile: RateProfile) -> float:
    """Reciprocal of the matching upper envelope."""
    return math.exp(-log_upper_envelope(t, params, profile))


def hyperbolic_exponent(profile: RateProfile, params: ClassParams, t: float) -> float:
    """Exponent of the classical hyperbolic estimate: (1/Lambda1) int_{t0}^t gamma."""
    return adaptive_quad(lambda s: float(profile.gamma(s)), profile.t0, t) / params.lambda1


@dataclass(frozen=True)
class CrossoverReport:
    t_star: float | None
    times: np.ndarray
    classical: np.ndarray
    envelope: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.classical / self.envelope

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_star": self.t_star,
            "times": self.times.tolist(),
            "classical_exponent": self.classical.tolist(),
            "envelope_log": self.envelope.tolist(),
        }


def hyperbolic_crossover(
    profile: RateProfile, params: ClassParams, times: ArrayLike
) -> CrossoverReport:
    """Smallest grid time from which the classical factor stays below the envelope."""
    ts = np.asarray(times, dtype=float)
    classical = np.empty_like(ts)
    acc = 0.0
    prev = profile.t0
    for i, t in enumerate(ts):
        acc += adaptive_quad(lambda s: float(profile.gamma(s)), prev, float(t)) / params.lambda1
        classical[i] = acc
        prev = float(t)
    env = np.array([log_upper_envelope(float(t), params, profile) for t in ts])
    below = classical < env
    t_star = None
    if below[-1]:
        k = ts.size - 1
        while k > 0 and below[k - 1]:
            k -= 1
        t_star = float(ts[k])
    return CrossoverReport(t_star, ts, classical, env)


# ---------------------------------------------------------------------------
# Certification sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundReport:
    lambdas: np.ndarray
    times: np.ndarray
    ratios: np.ndarray  # shape (data sets, lambdas, times)
    upper: np.ndarray
    lower: np.ndarray
    slack: float
    membership: dict[str, Any]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def upper_ok(self) -> np.ndarray:
        return self.ratios <= self.upper[None, None, :] * (1.0 + self.slack)

    @property
    def lower_ok(self) -> np.ndarray:
        return self.ratios >= self.lower[None, None, :] * (1.0 - self.slack)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.upper_ok & self.lower_ok))

    @property
    def margins(self) -> np.ndarray:
        """log(envelope/ratio) for the upper side; negative means violation."""
        return np.log(self.upper[None, None, :]) - np.log(self.ratios)

    @property
    def worst_margin(self) -> float:
        low = np.log(self.ratios) - np.log(self.lower[None, None, :])
        return float(min(np.min(self.margins), np.min(low)))

    def failures(self) -> list[tuple[int, float, float]]:
        bad = ~(self.upper_ok & self.lower_ok)
        return [
            (int(d), float(self.lambdas[i]), float(self.times[j]))
            for d, i, j in zip(*np.nonzero(bad))
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "slack": self.slack,
            "lambdas": self.lambdas.tolist(),
            "times": self.times.tolist(),
            "failures": self.failures(),
            "membership": self.membership,
            **self.metadata,
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["data_set", "lambda", "t", "ratio", "envelope", "lower", "margin", "pass"])
            ok = self.upper_ok & self.lower_ok
            for d in range(self.ratios.shape[0]):
                for i, lam in enumerate(self.lambdas):
                    for j, t in enumerate(self.times):
                        writer.writerow([
                            d, f"{lam:.17g}", f"{t:.17g}", f"{self.ratios[d, i, j]:.17g}",
                            f"{self.upper[j]:.17g}", f"{self.lower[j]:.17g}",
                            f"{self.margins[d, i, j]:.17g}", bool(ok[d, i, j]),
                        ])


def default_lambda_grid(lambda_block: float, points: int = 20) -> np.ndarray:
    return np.geomspace(1e-2, 1e2 * max(lambda_block, 1.0), points)


def default_time_grid(t0: float, horizon: float, points: int = 30) -> np.ndarray:
    return t0 + np.geomspace(1e-2, horizon - t0, points)


def certify(
    coeff: Coefficient,
    profile: RateProfile,
    params: ClassParams,
    lambda_grid: Sequence[float],
    t_grid: Sequence[float],
    config: IntegratorConfig | None = None,
    slack: float = SLACK,
    workers: int = 1,
) -> BoundReport:
    """Energy ratios for two data sets per frequency against both envelopes.

    The membership check gates the sweep: coefficients outside the class
    are refused with a PreconditionError.
    """
    ts = np.asarray(t_grid, dtype=float)
    lams = np.asarray(lambda_grid, dtype=float)
    t0 = profile.t0
    horizon = float(ts.max())
    report = verify_membership(coeff, profile, params, horizon=horizon)
    if not report.passed:
        raise PreconditionError(f"coefficient is not in the class: {report.to_dict()}")
    root = math.sqrt(coeff.c_inf)

    def run(lam: float) -> np.ndarray:
        mats, _ = propagate(coeff, lam, t0, ts, config)
        out = np.empty((2, ts.size))
        for d, (u0, v0) in enumerate(((0.0, coeff.c_inf**0.25), (coeff.c_inf**-0.25 / lam, 0.0))):
            e0 = v0 * v0 / root + lam * lam * root * u0 * u0
            state = mats @ np.array([u0, v0])
            u, v = state[:, 0], state[:, 1]
            out[d] = (v * v / root + lam * lam * root * u * u) / e0
        return out

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, lams))
    else:
        results = [run(float(lam)) for lam in lams]
    ratios = np.stack(results, axis=1)
    logs = np.array([log_upper_envelope(float(t), params, profile) for t in ts])
    return BoundReport(
        lambdas=lams, times=ts, ratios=ratios, upper=np.exp(logs), lower=np.exp(-logs),
        slack=slack, membership=report.to_dict(),
        metadata={
            "data_sets": ["(0, c_inf^(1/4))", "(c_inf^(-1/4)/lambda, 0)"],
            "note": "finitely many data per frequency; a sweep, not a proof",
            "constants": theorem_constants(params, profile).to_dict(),
        },
    )
