"""Propagation speeds: constant, explicit example, resonant family, glued schedules.

Every coefficient carries analytic evaluators for c, c' and c''; a
``Coefficient`` may also carry non-oscillatory majorants of |c - c_inf|,
|c'| and |c''| that allow membership checks on very long oscillating
intervals, and a compact description consumed by the compiled integrator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    DomainError,
    InternalError,
    PreconditionError,
    VerificationImpossibleError,
)
from .quadrature import abs_piecewise_gauss, adaptive_quad
from .rates import ClassParams, RateProfile, power_profile

CONSTANT = "constant"
NO_WAY = "no_way"
DGCS = "dgcs"
GLUED = "glued"
CUSTOM = "custom"

CUTOFF_BOUND = 100.0
FD_REL_TOL = 1e-4
DENSE_SAMPLE_CAP = 2_000_000
SAMPLES_PER_PERIOD = 16

Scalar = Callable[[ArrayLike], np.ndarray]


def _arr(t: ArrayLike) -> np.ndarray:
    return np.asarray(t, dtype=float)


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------


def _smoothstep(x: np.ndarray, order: int) -> np.ndarray:
    """7th-order smoothstep and its first three derivatives on [0, 1]."""
    if order == 0:
        return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)
    if order == 1:
        return 140.0 * x**3 * (1.0 - x) ** 3
    if order == 2:
        return 420.0 * x**2 * (1.0 - x) ** 2 * (1.0 - 2.0 * x)
    if order == 3:
        return 840.0 * x * (1.0 - x) * (1.0 - 5.0 * x + 5.0 * x**2)
    raise ValueError("order must be 0..3")


@dataclass(frozen=True)
class CutoffShape:
    """Plateau 1 on [a+ramp, b-ramp], 7th-order smoothstep ramps, zero outside (a, b)."""

    a: float
    b: float
    ramp: float = 1.0

    def __post_init__(self) -> None:
        if self.b - self.a < 3.0:
            raise PreconditionError(f"cutoff interval too short: b - a = {self.b - self.a}")

    def __call__(self, t: ArrayLike, order: int = 0) -> np.ndarray:
        t = _arr(t)
        w = self.ramp
        up = (t > self.a) & (t < self.a + w)
        down = (t > self.b - w) & (t < self.b)
        plateau = (t >= self.a + w) & (t <= self.b - w)
        out = np.zeros_like(t)
        x_up = np.clip((t - self.a) / w, 0.0, 1.0)
        x_dn = np.clip((self.b - t) / w, 0.0, 1.0)
        scale = w ** (-order)
        out = np.where(up, scale * _smoothstep(x_up, order), out)
        out = np.where(down, (-1.0) ** order * scale * _smoothstep(x_dn, order), out)
        if order == 0:
            out = np.where(plateau, 1.0, out)
        return out

    def derivative_maxima(self, points: int = 10_000) -> tuple[float, float, float, float]:
        ts = np.linspace(self.a, self.a + self.ramp, points)
        return tuple(float(np.max(np.abs(self(ts, k)))) for k in range(4))  # type: ignore[return-value]

    def breakpoints(self) -> tuple[float, float, float, float]:
        return (self.a, self.a + self.ramp, self.b - self.ramp, self.b)


def make_cutoff(a: float, b: float) -> CutoffShape:
    """Cutoff on (a, b) with unit ramps; derivative bounds checked on a 1e4-point grid."""
    shape = CutoffShape(float(a), float(b))
    worst = max(shape.derivative_maxima())
    if worst > CUTOFF_BOUND:
        raise InternalError(f"cutoff derivative maximum {worst} exceeds {CUTOFF_BOUND}")
    return shape


# ---------------------------------------------------------------------------
# Modulations eps(t)
# ---------------------------------------------------------------------------


class Modulation:
    """Interface: ``derivs(t)`` returns eps, eps', eps'', eps''' as arrays."""

    support: tuple[float, float] = (-math.inf, math.inf)

    def derivs(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return self.derivs(_arr(t))[0]

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantModulation(Modulation):
    value: float

    def derivs(self, t: np.ndarray):
        t = _arr(t)
        z = np.zeros_like(t)
        return np.full_like(t, self.value), z, z, z

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class FunctionModulation(Modulation):
    """Modulation given by callables for eps and its first three derivatives."""

    funcs: tuple[Scalar, Scalar, Scalar, Scalar]
    label: str = "function"

    def derivs(self, t: np.ndarray):
        t = _arr(t)
        return tuple(np.asarray(f(t), dtype=float) + 0.0 * t for f in self.funcs)  # type: ignore[return-value]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "function", "label": self.label}


def inverse_time_modulation() -> FunctionModulation:
    """eps(t) = 1/t, the modulation behind the explicit example."""
    return FunctionModulation(
        (
            lambda t: 1.0 / _arr(t),
            lambda t: -1.0 / _arr(t) ** 2,
            lambda t: 2.0 / _arr(t) ** 3,
            lambda t: -6.0 / _arr(t) ** 4,
        ),
        label="inverse_time",
    )


@dataclass(frozen=True, eq=False)
class CutoffModulation(Modulation):
    """eps(t) = eps0 theta(t) gamma(t)^2 / lambda."""

    eps0: float
    lam: float
    theta: CutoffShape
    profile: RateProfile

    def __post_init__(self) -> None:
        if not (0.0 < self.eps0 <= 1.0):
            raise PreconditionError(f"eps0={self.eps0} outside [0, 1]")
        if len(self.profile.gamma_derivatives) < 3:
            raise PreconditionError("modulation needs three derivatives of gamma")
        object.__setattr__(self, "support", (self.theta.a, self.theta.b))

    def g_derivs(self, t: np.ndarray) -> tuple[np.ndarray, ...]:
        gam = self.profile.gamma(t)
        d1, d2, d3 = (d(t) for d in self.profile.gamma_derivatives)
        return (
            gam * gam,
            2.0 * gam * d1,
            2.0 * d1 * d1 + 2.0 * gam * d2,
            6.0 * d1 * d2 + 2.0 * gam * d3,
        )

    def derivs(self, t: np.ndarray):
        t = _arr(t)
        inside = (t > self.theta.a) & (t < self.theta.b)
        ts = np.where(inside, t, 0.5 * (self.theta.a + self.theta.b))
        th = [self.theta(ts, k) for k in range(4)]
        g = self.g_derivs(ts)
        k = self.eps0 / self.lam
        e0 = th[0] * g[0]
        e1 = th[1] * g[0] + th[0] * g[1]
        e2 = th[2] * g[0] + 2.0 * th[1] * g[1] + th[0] * g[2]
        e3 = th[3] * g[0] + 3.0 * th[2] * g[1] + 3.0 * th[1] * g[2] + th[0] * g[3]
        return tuple(np.where(inside, k * e, 0.0) for e in (e0, e1, e2, e3))  # type: ignore[return-value]

    def breakpoints(self) -> tuple[float, ...]:
        return self.theta.breakpoints()

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "cutoff",
            "eps0": self.eps0,
            "lambda": self.lam,
            "a": self.theta.a,
            "b": self.theta.b,
            "ramp": self.theta.ramp,
            "profile": self.profile.to_dict(),
        }


# ---------------------------------------------------------------------------
# Coefficient
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Coefficient:
    """A propagation speed with analytic first and second derivatives.

    ``support`` lists the closed intervals outside of which c == c_inf;
    ``None`` means the deviation is not compactly supported.
    ``tail`` returns an upper bound for the integral of |c - c_inf| over
    [t, inf), or None when no such information exists.
    """

    domain: tuple[float, float]
    c: Scalar
    dc: Scalar
    ddc: Scalar
    c_inf: float
    provenance: str
    support: tuple[tuple[float, float], ...] | None
    description: dict[str, Any] = field(default_factory=dict)
    majorants: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None
    oscillation: float = 0.0
    tail: Callable[[float], float] | None = None
    deviation_integral: Callable[[float, float], float] | None = None
    kernel: tuple | None = None
    breakpoints: tuple[float, ...] = ()
    local_oscillation: Callable[[float, float], float] | None = None

    def oscillation_on(self, t1: float, t2: float) -> float:
        """Largest angular frequency of the coefficient on [t1, t2]."""
        if self.local_oscillation is None:
            return self.oscillation
        return self.local_oscillation(min(t1, t2), max(t1, t2))

    def check_domain(self, t: ArrayLike) -> None:
        arr = _arr(t)
        if np.any(arr < self.domain[0]) or np.any(arr > self.domain[1]):
            raise DomainError(f"time outside coefficient domain {self.domain}")

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return self.c(t)

    def abs_deviation_integral(self, t1: float, t2: float) -> float:
        """Integral of |c - c_inf| over [t1, t2]."""
        if t2 <= t1:
            return 0.0
        if self.support is not None:
            total = 0.0
            for lo, hi in self.support:
                x, y = max(lo, t1), min(hi, t2)
                if y > x:
                    total += self._segment_deviation(x, y)
            return total
        return self._segment_deviation(t1, t2)

    def _segment_deviation(self, t1: float, t2: float) -> float:
        if self.deviation_integral is not None:
            return self.deviation_integral(t1, t2)
        return _sampled_deviation(self, t1, t2)

    def tail_integral(self, t: float) -> float:
        """Upper bound for the integral of |c - c_inf| over [t, inf)."""
        if self.tail is not None:
            return self.tail(t)
        if self.support is not None:
            hi = max((b for _, b in self.support), default=t)
            return self.abs_deviation_integral(t, max(t, hi))
        raise VerificationImpossibleError(
            "coefficient has unbounded support and no tail bound"
        )

    def to_dict(self) -> dict[str, Any]:
        return {"provenance": self.provenance, "c_inf": self.c_inf, **self.description}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def _sampled_deviation(coeff: Coefficient, t1: float, t2: float) -> float:
    period = 2.0 * math.pi / coeff.oscillation if coeff.oscillation > 0 else (t2 - t1)
    piece = min(period / 4.0, max(t2 - t1, 1e-300))
    return abs_piecewise_gauss(lambda s: coeff.c(s) - coeff.c_inf, t1, t2, piece)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def make_constant(c_inf: float) -> Coefficient:
    """c identically equal to ``c_inf``."""
    if c_inf <= 0:
        raise PreconditionError("c_inf must be positive")
    value = float(c_inf)

    def zero(t: ArrayLike) -> np.ndarray:
        return np.zeros_like(_arr(t))

    return Coefficient(
        domain=(-math.inf, math.inf),
        c=lambda t: np.full_like(_arr(t), value),
        dc=zero,
        ddc=zero,
        c_inf=value,
        provenance=CONSTANT,
        support=(),
        majorants=lambda t: (zero(t), zero(t), zero(t)),
        tail=lambda t: 0.0,
        kernel=(0, np.array([value]), np.zeros((0, 9))),
    )


def _no_way_terms(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s, co = np.sin(t), np.cos(t)
    s2t, c2t = np.sin(2 * t), np.cos(2 * t)
    q, dq, ddq = s**4, 4 * s**3 * co, 12 * s**2 * co**2 - 4 * s**4
    c = 1.0 - s2t / (4 * t) + s**2 / (8 * t**2) - q / (64 * t**2)
    dc = (
        -c2t / (2 * t) + s2t / (4 * t**2)
        + s2t / (8 * t**2) - (1 - c2t) / (8 * t**3)
        - dq / (64 * t**2) + 2 * q / (64 * t**3)
    )
    ddc = (
        s2t / t + c2t / t**2 - s2t / (2 * t**3)
        + c2t / (4 * t**2) - s2t / (2 * t**3) + 3 * (1 - c2t) / (8 * t**4)
        - ddq / (64 * t**2) + 4 * dq / (64 * t**3) - 6 * q / (64 * t**4)
    )
    return c, dc, ddc


def make_no_way() -> Coefficient:
    """c(t) = 1 - sin(2t)/(4t) + sin(t)^2/(8t^2) - sin(t)^4/(64t^2) on [1, inf)."""

    def guard(t: ArrayLike) -> np.ndarray:
        arr = _arr(t)
        if np.any(arr < 1.0):
            raise DomainError("the explicit example is defined for t >= 1")
        return arr

    def majorants(t: np.ndarray):
        t = guard(t)
        dev = 1 / (4 * t) + 1 / (8 * t**2) + 1 / (64 * t**2)
        d1 = 1 / (2 * t) + 1 / (4 * t**2) + 1 / (8 * t**2) + 1 / (4 * t**3) + 1 / (16 * t**2) + 1 / (32 * t**3)
        d2 = (
            1 / t + 1 / t**2 + 1 / (2 * t**3) + 1 / (4 * t**2) + 1 / (2 * t**3) + 3 / (4 * t**4)
            + 16 / (64 * t**2) + 16 / (64 * t**3) + 6 / (64 * t**4)
        )
        return dev, d1, d2

    def deviation(t1: float, t2: float) -> float:
        guard(t1)
        return abs_piecewise_gauss(lambda s: _no_way_terms(s)[0] - 1.0, t1, t2, piece=math.pi / 8)

    return Coefficient(
        domain=(1.0, math.inf),
        c=lambda t: _no_way_terms(guard(t))[0],
        dc=lambda t: _no_way_terms(guard(t))[1],
        ddc=lambda t: _no_way_terms(guard(t))[2],
        c_inf=1.0,
        provenance=NO_WAY,
        support=None,
        majorants=majorants,
        oscillation=2.0,
        tail=lambda t: math.inf,
        deviation_integral=deviation,
        kernel=(1, np.array([1.0]), np.zeros((0, 9))),
    )


def _dgcs_terms(
    m: float, lam: float, eps: tuple[np.ndarray, ...], t: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    e0, e1, e2, e3 = eps
    w = m * lam
    s, co = np.sin(w * t), np.cos(w * t)
    s2, c2 = 2.0 * s * co, co * co - s * s
    ss = s * s
    k1 = 1.0 / (4.0 * m * lam)
    k2 = 1.0 / (8.0 * m * m * lam * lam)
    k3 = 1.0 / (64.0 * m**4 * lam * lam)
    c = m * m - k1 * e0 * s2 - k2 * e1 * ss - k3 * e0 * e0 * ss * ss
    dc = (
        -k1 * (e1 * s2 + 2.0 * w * e0 * c2)
        - k2 * (e2 * ss + w * e1 * s2)
        - k3 * (2.0 * e0 * e1 * ss * ss + 2.0 * w * e0 * e0 * ss * s2)
    )
    ddc = (
        -k1 * (e2 * s2 + 4.0 * w * e1 * c2 - 4.0 * w * w * e0 * s2)
        - k2 * (e3 * ss + 2.0 * w * e2 * s2 + 2.0 * w * w * e1 * c2)
        - k3 * (
            (2.0 * e1 * e1 + 2.0 * e0 * e2) * ss * ss
            + 8.0 * w * e0 * e1 * ss * s2
            + 4.0 * w * w * e0 * e0 * ss * (3.0 * co * co - ss)
        )
    )
    return c, dc, ddc


def _dgcs_deviation(m: float, lam: float, mod: Modulation, t: np.ndarray) -> np.ndarray:
    """c - m^2 alone, for quadrature."""
    e0, e1 = mod.derivs(t)[:2]
    s = np.sin(m * lam * t)
    ss = s * s
    s2 = 2.0 * s * np.cos(m * lam * t)
    return (
        -e0 * s2 / (4.0 * m * lam)
        - e1 * ss / (8.0 * m * m * lam * lam)
        - e0 * e0 * ss * ss / (64.0 * m**4 * lam * lam)
    )


def _dgcs_majorants(m: float, lam: float, eps: tuple[np.ndarray, ...]):
    e0, e1, e2, e3 = (np.abs(e) for e in eps)
    w = m * lam
    k1 = 1.0 / (4.0 * m * lam)
    k2 = 1.0 / (8.0 * m * m * lam * lam)
    k3 = 1.0 / (64.0 * m**4 * lam * lam)
    dev = k1 * e0 + k2 * e1 + k3 * e0 * e0
    d1 = k1 * (e1 + 2 * w * e0) + k2 * (e2 + w * e1) + k3 * (2 * e0 * e1 + 2 * w * e0 * e0)
    d2 = (
        k1 * (e2 + 4 * w * e1 + 4 * w * w * e0)
        + k2 * (e3 + 2 * w * e2 + 2 * w * w * e1)
        + k3 * (2 * e1 * e1 + 2 * e0 * e2 + 8 * w * e0 * e1 + 4 * w * w * e0 * e0)
    )
    return dev, d1, d2


def _kernel_row(m: float, lam: float, eps: Modulation) -> np.ndarray | None:
    """Row [a, b, m, lam, mode, eps_const, eps0, ramp, beta] for the compiled path."""
    if isinstance(eps, ConstantModulation):
        return np.array([-math.inf, math.inf, m, lam, 0.0, eps.value, 0.0, 1.0, 0.0])
    if isinstance(eps, CutoffModulation) and eps.profile.form is not None:
        th = eps.theta
        return np.array(
            [th.a, th.b, m, lam, 1.0, 0.0, eps.eps0 / eps.lam, th.ramp, eps.profile.form.beta]
        )
    return None


def make_dgcs(
    m: float,
    lam: float,
    eps: Modulation | float,
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> Coefficient:
    """Resonant coefficient m^2 - eps sin(2 m lam t)/(4 m lam) - ... for a modulation eps."""
    if m <= 0 or lam <= 0:
        raise PreconditionError("m and lambda must be positive")
    mod = ConstantModulation(float(eps)) if isinstance(eps, (int, float)) else eps
    m = float(m)
    lam = float(lam)

    def terms(t: ArrayLike):
        arr = _arr(t)
        return _dgcs_terms(m, lam, mod.derivs(arr), arr)

    lo, hi = mod.support
    compact = math.isfinite(lo) and math.isfinite(hi)
    zero_mod = isinstance(mod, ConstantModulation) and mod.value == 0.0
    support: tuple[tuple[float, float], ...] | None
    if zero_mod:
        support = ()
    elif compact:
        support = ((lo, hi),)
    else:
        support = None

    def deviation(t1: float, t2: float) -> float:
        return _dgcs_deviation_integral(m, lam, mod, t1, t2)

    row = _kernel_row(m, lam, mod)
    return Coefficient(
        domain=domain,
        c=lambda t: terms(t)[0],
        dc=lambda t: terms(t)[1],
        ddc=lambda t: terms(t)[2],
        c_inf=m * m,
        provenance=DGCS,
        support=support,
        description={"m": m, "lambda": lam, "eps": mod.to_dict()},
        majorants=lambda t: _dgcs_majorants(m, lam, mod.derivs(_arr(t))),
        oscillation=2.0 * m * lam,
        deviation_integral=deviation,
        kernel=None if row is None else (2, np.array([m * m]), row[None, :]),
        breakpoints=mod.breakpoints(),
    )


DEVIATION_PIECE_CAP = 200_000


def _dgcs_deviation_integral(
    m: float, lam: float, mod: Modulation, t1: float, t2: float
) -> float:
    """|c - m^2| integrated by half-period Gauss rules, or by the majorant when
    the interval holds too many oscillations (an upper bound in that case)."""
    w = 2.0 * m * lam
    half = math.pi / w
    pieces = (t2 - t1) / half
    if pieces <= DEVIATION_PIECE_CAP:
        return abs_piecewise_gauss(
            lambda s: _dgcs_deviation(m, lam, mod, s), t1, t2, piece=half / 2.0
        )
    return _majorant_integral(m, lam, mod, t1, t2)


def _majorant_integral(m: float, lam: float, mod: Modulation, t1: float, t2: float) -> float:
    pts = [p for p in mod.breakpoints() if t1 < p < t2]
    edges = [t1, *pts, t2]
    total = 0.0
    for x, y in zip(edges[:-1], edges[1:]):
        total += adaptive_quad(
            lambda s: float(_dgcs_majorants(m, lam, mod.derivs(np.asarray([s])))[0][0]),
            x, y, rel_tol=1e-8,
        )
    return total


@dataclass(frozen=True, eq=False)
class GluedBlock:
    a: float
    b: float
    coeff: Coefficient


def make_glued(c_inf: float, blocks: Sequence[GluedBlock], t0: float) -> Coefficient:
    """c_inf outside the blocks, the block coefficient on each [a_k, b_k]."""
    blocks = sorted(blocks, key=lambda blk: blk.a)
    for left, right in zip(blocks[:-1], blocks[1:]):
        if right.a < left.b:
            raise PreconditionError("glued blocks overlap")

    def piecewise(attr: str) -> Scalar:
        def fn(t: ArrayLike) -> np.ndarray:
            arr = _arr(t)
            out = np.full_like(arr, c_inf if attr == "c" else 0.0)
            for blk in blocks:
                mask = (arr >= blk.a) & (arr <= blk.b)
                if np.any(mask):
                    out[mask] = getattr(blk.coeff, attr)(arr[mask])
            return out

        return fn

    def majorants(t: np.ndarray):
        arr = _arr(t)
        outs = [np.zeros_like(arr) for _ in range(3)]
        for blk in blocks:
            mask = (arr >= blk.a) & (arr <= blk.b)
            if np.any(mask) and blk.coeff.majorants is not None:
                vals = blk.coeff.majorants(arr[mask])
                for o, v in zip(outs, vals):
                    o[mask] = v
        return tuple(outs)

    def deviation(t1: float, t2: float) -> float:
        total = 0.0
        for blk in blocks:
            x, y = max(t1, blk.a), min(t2, blk.b)
            if y > x:
                total += blk.coeff.abs_deviation_integral(x, y)
        return total

    rows = []
    for blk in blocks:
        if blk.coeff.kernel is None or blk.coeff.kernel[0] != 2:
            rows = None
            break
        row = blk.coeff.kernel[2][0].copy()
        row[0], row[1] = max(row[0], blk.a), min(row[1], blk.b)
        rows.append(row)
    kernel = None if rows is None else (2, np.array([c_inf]), np.array(rows))

    def local_oscillation(t1: float, t2: float) -> float:
        return max(
            (blk.coeff.oscillation for blk in blocks if blk.a < t2 and blk.b > t1), default=0.0
        )

    return Coefficient(
        domain=(t0, math.inf),
        c=piecewise("c"),
        dc=piecewise("dc"),
        ddc=piecewise("ddc"),
        c_inf=float(c_inf),
        provenance=GLUED,
        support=tuple((blk.a, blk.b) for blk in blocks),
        description={
            "t0": t0,
            "blocks": [
                {"a": blk.a, "b": blk.b, **blk.coeff.to_dict()} for blk in blocks
            ],
        },
        majorants=majorants,
        oscillation=max((blk.coeff.oscillation for blk in blocks), default=0.0),
        deviation_integral=deviation,
        kernel=kernel,
        breakpoints=tuple(sorted({p for blk in blocks for p in (blk.a, blk.b, *blk.coeff.breakpoints)})),
        local_oscillation=local_oscillation,
    )


def make_custom(
    c: Scalar,
    dc: Scalar,
    ddc: Scalar,
    c_inf: float,
    domain: tuple[float, float],
    support: tuple[tuple[float, float], ...] | None = None,
    tail: Callable[[float], float] | None = None,
    oscillation: float = 0.0,
) -> Coefficient:
    """User-supplied coefficient; without ``support`` or ``tail`` the stabilization
    check cannot be decided."""
    return Coefficient(
        domain=domain, c=c, dc=dc, ddc=ddc, c_inf=float(c_inf), provenance=CUSTOM,
        support=support, tail=tail, oscillation=oscillation,
    )


def coefficient_from_dict(doc: dict[str, Any]) -> Coefficient:
    """Rebuild a coefficient from its JSON description."""
    kind = doc["provenance"]
    if kind == CONSTANT:
        return make_constant(doc["c_inf"])
    if kind == NO_WAY:
        return make_no_way()
    if kind == DGCS:
        return make_dgcs(doc["m"], doc["lambda"], _modulation_from_dict(doc["eps"]))
    if kind == GLUED:
        blocks = [
            GluedBlock(blk["a"], blk["b"], coefficient_from_dict(blk)) for blk in doc["blocks"]
        ]
        return make_glued(doc["c_inf"], blocks, doc["t0"])
    raise PreconditionError(f"cannot rebuild coefficient of kind {kind!r}")


def _modulation_from_dict(doc: dict[str, Any]) -> Modulation:
    if doc["kind"] == "constant":
        return ConstantModulation(doc["value"])
    if doc["kind"] == "function" and doc.get("label") == "inverse_time":
        return inverse_time_modulation()
    if doc["kind"] == "cutoff":
        prof = doc["profile"]
        profile = power_profile(prof["gamma"]["beta"], prof["stab"]["alpha"], prof["t0"])
        return CutoffModulation(
            doc["eps0"], doc["lambda"], CutoffShape(doc["a"], doc["b"], doc["ramp"]), profile
        )
    raise PreconditionError(f"cannot rebuild modulation {doc!r}")


def export_csv(coeff: Coefficient, times: ArrayLike, path: str) -> None:
    """Write columns t, c, c', c'' with 17 significant digits."""
    ts = _arr(times)
    rows = np.column_stack([ts, coeff.c(ts), coeff.dc(ts), coeff.ddc(ts)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "c", "dc", "ddc"])
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])


# ---------------------------------------------------------------------------
# Consistency and membership
# ---------------------------------------------------------------------------


def finite_difference_check(coeff: Coefficient, times: ArrayLike) -> float:
    """Largest relative mismatch between analytic and central-difference derivatives."""
    ts = _arr(times)
    h = 1e-5 * np.maximum(1.0, np.abs(ts))
    worst = 0.0
    for f, df in ((coeff.c, coeff.dc), (coeff.dc, coeff.ddc)):
        approx = (f(ts + h) - f(ts - h)) / (2 * h)
        exact = df(ts)
        scale = np.maximum(np.abs(exact), np.max(np.abs(exact)) + 1e-300)
        worst = max(worst, float(np.max(np.abs(approx - exact) / scale)))
    return worst


@dataclass(frozen=True)
class MembershipReport:
    hyperbolic: bool
    derivatives: bool
    stabilization: bool
    hyperbolic_margin: float
    derivative_margin: float
    stabilization_margin: float
    method: str
    horizon: float

    @property
    def passed(self) -> bool:
        return self.hyperbolic and self.derivatives and self.stabilization

    def to_dict(self) -> dict[str, Any]:
        return {
            "hyperbolic": self.hyperbolic,
            "derivatives": self.derivatives,
            "stabilization": self.stabilization,
            "hyperbolic_margin": self.hyperbolic_margin,
            "derivative_margin": self.derivative_margin,
            "stabilization_margin": self.stabilization_margin,
            "method": self.method,
            "horizon": self.horizon,
        }


def _sample_grid(coeff: Coefficient, t0: float, horizon: float, base: int = 4000) -> tuple[np.ndarray, bool]:
    span = horizon - t0
    if coeff.oscillation > 0:
        needed = int(span * coeff.oscillation / (2 * math.pi) * SAMPLES_PER_PERIOD) + 1
    else:
        needed = 0
    dense = needed <= DENSE_SAMPLE_CAP
    n = max(base, needed) if dense else base
    bps = sorted(p for p in coeff.breakpoints if t0 <= p <= horizon)
    # ramps between close breakpoints are short and carry the largest derivatives
    ramps = [np.linspace(x, y, 400) for x, y in zip(bps[:-1], bps[1:]) if y - x <= 2.0]
    grid = np.unique(np.concatenate([
        np.linspace(t0, horizon, n),
        t0 + np.expm1(np.linspace(0.0, math.log1p(span), base)),
        bps,
        *ramps,
    ]))
    return grid, dense


def verify_membership(
    coeff: Coefficient,
    profile: RateProfile,
    params: ClassParams,
    horizon: float | None = None,
    tail_points: int = 200,
) -> MembershipReport:
    """Check hyperbolicity, derivative control and stabilization on [t0, horizon].

    Oscillations are sampled densely when affordable; otherwise the
    coefficient's non-oscillatory majorants are used, which can only make
    the checks stricter.
    """
    t0 = params.t0
    if horizon is None:
        ends = [b for _, b in (coeff.support or ())]
        horizon = max([t0 + 100.0, *[e + 1.0 for e in ends]])
    if coeff.domain[0] > t0:
        raise DomainError("coefficient domain does not cover t0")
    if coeff.support is None and coeff.tail is None:
        raise VerificationImpossibleError(
            "unbounded support without tail information: stabilization cannot be decided"
        )
    grid, dense = _sample_grid(coeff, t0, horizon)
    gam = profile.gamma(grid)
    if dense:
        c = coeff.c(grid)
        dev = np.abs(c - coeff.c_inf)
        d1, d2 = np.abs(coeff.dc(grid)), np.abs(coeff.ddc(grid))
        method = "dense"
        hyp_margin = float(np.min(np.minimum(c - params.lambda1, params.lambda2 - c)))
    else:
        if coeff.majorants is None:
            raise VerificationImpossibleError("oscillation too fast to sample and no majorants")
        dev, d1, d2 = coeff.majorants(grid)
        method = "majorant"
        hyp_margin = float(np.min(np.minimum(
            coeff.c_inf - dev - params.lambda1, params.lambda2 - coeff.c_inf - dev
        )))
    der_margin = float(np.min(np.minimum(gam - d1, gam * gam - d2)))
    # stabilization: tail integrals at geometric times
    times = np.unique(np.concatenate([
        t0 + np.expm1(np.linspace(0.0, math.log1p(horizon - t0), tail_points)),
        [p for p in coeff.breakpoints if t0 <= p <= horizon],
    ]))
    stab_margin = math.inf
    if coeff.support is not None and coeff.tail is None:
        ends = sorted({*times.tolist(), *[x for seg in coeff.support for x in seg]})
        ends = [e for e in ends if e >= t0]
        pieces = [coeff.abs_deviation_integral(x, y) for x, y in zip(ends[:-1], ends[1:])]
        tails = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        lookup = dict(zip(ends, tails))
        for t in times:
            stab_margin = min(stab_margin, float(profile.stab(t)) - lookup[float(t)])
    else:
        for t in times:
            tail = coeff.tail_integral(float(t))
            stab_margin = min(stab_margin, float(profile.stab(t)) - tail)
    return MembershipReport(
        hyperbolic=bool(hyp_margin >= 0),
        derivatives=bool(der_margin >= 0),
        stabilization=bool(stab_margin >= 0),
        hyperbolic_margin=float(hyp_margin),
        derivative_margin=float(der_margin),
        stabilization_margin=float(stab_margin),
        method=method,
        horizon=float(horizon),
    )


def lambda6_from_lambda3(lambda3: float) -> float:
    """Derivative control constant for g = gamma^2 given control lambda3 on gamma."""
    return 6.0 * lambda3**2 + 2.0 * lambda3


def _ratio_windows(a: float, b: float, oscillation: float, window_periods: int = 40) -> np.ndarray:
    period = 2 * math.pi / oscillation if oscillation > 0 else 1.0
    n_per = SAMPLES_PER_PERIOD * 4
    span = b - a
    total = span / period * n_per
    if total <= DENSE_SAMPLE_CAP:
        return np.linspace(a, b, int(total) + 2)[1:-1]
    width = window_periods * period
    starts = np.concatenate([
        [a, a + 1.0 - width / 2, b - 1.0 - width / 2, b - width],
        a + 1.0 + np.expm1(np.linspace(0.0, math.log1p(span - 2.0 - width), 24)),
        np.linspace(a, b - width, 24),
    ])
    pts = [np.linspace(s, s + width, window_periods * n_per) for s in np.clip(starts, a, b - width)]
    ramps = [np.linspace(a, a + 1.0, 200_000), np.linspace(b - 1.0, b, 200_000)]
    out = np.unique(np.concatenate(pts + ramps))
    return out[(out > a) & (out < b)]


def computation_bound_check(
    coeff: Coefficient,
    g: Scalar,
    lam: float,
    eps0: float,
    m: float,
    window: tuple[float, float] | None = None,
) -> tuple[float, bool]:
    """Empirical constant: grid max of max(lam^2|c-m^2|, lam|c'|, |c''|) / (eps0 g).

    Points where g or the deviation vanish are skipped.
    """
    if eps0 == 0:
        return 0.0, True
    if window is None:
        if not coeff.support:
            raise PreconditionError("window required for coefficients without compact support")
        window = coeff.support[0]
    ts = _ratio_windows(window[0], window[1], coeff.oscillation)
    gs = np.asarray(g(ts), dtype=float)
    c = coeff.c(ts)
    num = np.maximum.reduce([
        lam * lam * np.abs(c - m * m), lam * np.abs(coeff.dc(ts)), np.abs(coeff.ddc(ts))
    ])
    keep = (gs > 0) & (num > 0)
    if not np.any(keep):
        return 0.0, True
    ratio = float(np.max(num[keep] / (eps0 * gs[keep])))
    return ratio, math.isfinite(ratio)
