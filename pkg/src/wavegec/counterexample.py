"""Resonant activation blocks, their iteration, and the growth verification.

One block amplifies a single frequency: on [a, b] the coefficient is the
resonant family with modulation eps0 theta gamma^2 / lambda, and the mode
started at a with data (0, c_inf^(1/4)) has u'(b)^2 given in closed form.
Blocks are glued at increasing times and frequencies; a finite spectral
sample (one cluster of frequencies per block) then carries the growth.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .bounds import theorem_constants
from .coefficients import (
    Coefficient,
    CutoffModulation,
    CutoffShape,
    GluedBlock,
    computation_bound_check,
    lambda6_from_lambda3,
    make_cutoff,
    make_dgcs,
    make_glued,
    verify_membership,
)
from .errors import (
    CounterexampleImpossibleError,
    GECClassError,
    InternalError,
    PreconditionError,
    ResourceError,
)
from .mode_dynamics import (
    IntegratorConfig,
    closed_form_dgcs,
    dgcs_exponent_integral,
    propagate,
)
from .rates import (
    ClassParams,
    RateProfile,
    classify_power,
    exp_growth_constants,
    power_lambda3,
)

CUTOFF_BOUND = 100.0
GAMMA3_SAFETY = 1.1
HITTING_RATIO = 2.0
HORIZON_CAP = 1e12
DESK_STEPS = 200_000_000
BAND_SAMPLES = 5
BAND_COLLAPSE = 1e-6
A_GRID_RATIO = 1.01
K_CAP = 3


# ---------------------------------------------------------------------------
# Setup and parameter choices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Setup:
    """Everything fixed once per class: m, Lambda3, Gamma1, Gamma2, lambda0."""

    params: ClassParams
    profile: RateProfile
    m: float
    lambda3: float
    lambda6: float
    gamma1: float
    gamma2: float
    lambda0: float = 0.0
    horizon_cap: float = HORIZON_CAP

    @property
    def c_inf(self) -> float:
        return self.m * self.m

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": self.m, "c_inf": self.c_inf, "lambda3": self.lambda3,
            "lambda5": CUTOFF_BOUND, "lambda6": self.lambda6,
            "gamma1": self.gamma1, "gamma2": self.gamma2, "lambda0": self.lambda0,
        }


def _unbounded_envelope(profile: RateProfile) -> bool:
    if profile.form is not None:
        return not classify_power(profile.form.beta, profile.form.alpha).gec
    t0 = profile.t0
    ms = [profile.M(t0 + 10.0**k) for k in range(1, 7)]
    return ms[-1] > 4.0 * ms[-3] and ms[-1] > 0


def prepare(
    profile: RateProfile,
    params: ClassParams,
    lambda0: float = 0.0,
    horizon_cap: float = HORIZON_CAP,
) -> Setup:
    """Check the construction hypotheses and fix the class-wide constants."""
    if params.lambda2 <= params.lambda1:
        raise CounterexampleImpossibleError("need lambda2 > lambda1")
    if not _unbounded_envelope(profile):
        raise GECClassError("sup of G S is finite: the class conserves energy")
    c_inf = 0.5 * (params.lambda1 + params.lambda2)
    lambda3 = params.lambda3
    if lambda3 is None:
        if profile.form is None:
            raise PreconditionError("a derivative control constant lambda3 is required")
        lambda3 = power_lambda3(profile.form.beta, profile.t0)
    consts = exp_growth_constants(profile.g, 2.0 * lambda3, profile.t0, dg=profile.dg)
    return Setup(
        params=params, profile=profile, m=math.sqrt(c_inf), lambda3=lambda3,
        lambda6=lambda6_from_lambda3(lambda3), gamma1=consts.gamma1,
        gamma2=consts.gamma2, lambda0=lambda0, horizon_cap=horizon_cap,
    )


def _hitting_time(profile: RateProfile, level: float, hi_guess: float, cap: float) -> float:
    """min{t : G(t) S(t) >= level}, found as the hitting time of the monotone M."""
    t0 = profile.t0
    hi = max(hi_guess, t0 + 1.0)
    while profile.M(hi) < level:
        if hi > cap:
            raise ResourceError(f"envelope level {level} not reached below {cap}")
        hi = t0 + 2.0 * (hi - t0)
    lo = t0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if profile.M(mid) >= level:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            break
    return hi


@dataclass(frozen=True)
class BChecks:
    long_enough: bool
    envelope_gain: bool
    small_tail: bool
    cumulative_gain: bool
    frequency_room: bool
    at_hitting_time: bool

    @property
    def all(self) -> bool:
        return all(self.__dict__.values())


def b_checks(b: float, A: float, L: float, Lambda: float, setup: Setup) -> BChecks:
    prof = setup.profile
    G, S = float(prof.G(b)), float(prof.stab(b))
    need = max(16 * math.pi**2 / setup.m**2, 4.0, 4 * setup.lambda0**2, 4 * Lambda**2)
    M = prof.M(b)
    return BChecks(
        long_enough=b >= A + 4,
        envelope_gain=M >= L * prof.M(A),
        small_tail=4 * setup.gamma1 * S <= 1,
        cumulative_gain=G >= 2 * setup.gamma2 * float(prof.G(A + 2)),
        frequency_room=G / S >= need,
        at_hitting_time=abs(M - G * S) <= 1e-9 * M,
    )


def choose_b(A: float, L: float, Lambda: float, setup: Setup) -> float:
    """Smallest hitting time of a geometric level sequence meeting every requirement."""
    prof = setup.profile
    level = max(L * prof.M(A), float(prof.GS(A + 4)), 1e-300)
    guess = A + 4
    while True:
        b = _hitting_time(prof, level, guess, setup.horizon_cap)
        if b_checks(b, A, L, Lambda, setup).all:
            return b
        if b > setup.horizon_cap:
            raise ResourceError(f"b would exceed the horizon cap {setup.horizon_cap}")
        level *= HITTING_RATIO
        guess = b


def choose_lambda(b: float, profile: RateProfile, m: float) -> float:
    """(2 pi/(m b)) floor((G/S)^(1/2) m b / (2 pi))."""
    ratio = float(profile.G(b)) / float(profile.stab(b))
    if ratio < 16 * math.pi**2 / m**2:
        raise InternalError("G/S too small for the frequency choice")
    n = math.floor(math.sqrt(ratio) * m * b / (2 * math.pi))
    return 2 * math.pi * n / (m * b)


def choose_a(A: float, m: float, lam: float) -> float:
    """Smallest multiple of 2 pi/(m lam) not below A."""
    step = 2 * math.pi / (m * lam)
    if m * lam < 2 * math.pi:
        raise InternalError("m lambda below 2 pi")
    k0 = math.ceil(A / step - 1e-12)
    a = k0 * step
    if not (A - 1e-9 <= a <= A + 1):
        raise InternalError("grid point outside [A, A+1]")
    return a


def choose_eps0(params: ClassParams, gamma3: float, m: float) -> float:
    """min{(Lambda2-Lambda1)/(2 Gamma3), 1/(8 Gamma3), 4 m^3 log 2}."""
    if params.lambda2 <= params.lambda1:
        raise CounterexampleImpossibleError("need lambda2 > lambda1")
    if gamma3 <= 0:
        raise PreconditionError("Gamma3 must be positive")
    return min(
        (params.lambda2 - params.lambda1) / (2 * gamma3),
        1.0 / (8 * gamma3),
        4 * m**3 * math.log(2.0),
    )


# ---------------------------------------------------------------------------
# Activation step
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ActivationBlock:
    A: float
    L: float
    Lambda: float
    a: float
    b: float
    lam: float
    eps0: float
    m: float
    theta: CutoffShape
    modulation: CutoffModulation
    coeff: Coefficient
    gamma3: float
    h14: float
    M_b: float
    M_A: float
    exponent_integral: float

    @property
    def energy_at_b(self) -> float:
        """Kowaleskian energy at b of the mode started at a with (0, c_inf^(1/4))."""
        return math.exp(self.exponent_integral / (4 * self.m * self.m))

    @property
    def log_energy_at_b(self) -> float:
        return self.exponent_integral / (4 * self.m * self.m)

    def to_dict(self) -> dict[str, Any]:
        return {
            "A": self.A, "L": self.L, "Lambda": self.Lambda, "a": self.a, "b": self.b,
            "lambda": self.lam, "eps0": self.eps0, "m": self.m, "gamma3": self.gamma3,
            "H14": self.h14, "M_b": self.M_b, "M_A": self.M_A,
            "exponent_integral": self.exponent_integral,
            "log_energy_at_b": self.log_energy_at_b,
        }


@dataclass(frozen=True)
class BlockVerification:
    envelope_gain: bool
    compact_support: bool
    membership: bool
    half_tail: bool
    growth: bool
    margins: dict[str, float] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.envelope_gain and self.compact_support and self.membership
            and self.half_tail and self.growth
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "envelope_gain": self.envelope_gain, "compact_support": self.compact_support,
            "membership": self.membership, "half_tail": self.half_tail,
            "growth": self.growth, "passed": self.passed, "margins": self.margins,
            **self.details,
        }


def calibrate_gamma3(setup: Setup, a: float, b: float, lam: float) -> float:
    """1.1 times the grid maximum of the computation-lemma ratio with eps0 = 1."""
    theta = make_cutoff(a, b)
    trial = make_dgcs(setup.m, lam, CutoffModulation(1.0, lam, theta, setup.profile))
    ratio, ok = computation_bound_check(trial, setup.profile.g, lam, 1.0, setup.m, (a, b))
    if not ok or ratio <= 0:
        raise InternalError("computation-lemma ratio is not finite")
    return GAMMA3_SAFETY * ratio


def activation_step(
    A: float,
    L: float,
    Lambda: float,
    setup: Setup,
    gamma3: float | None = None,
    verify: bool = True,
    config: IntegratorConfig | None = None,
    strict: bool = True,
) -> tuple[ActivationBlock, BlockVerification | None]:
    """Build one block; with ``gamma3=None`` the constant is calibrated on this block."""
    prof = setup.profile
    if A < prof.t0 + 1:
        raise PreconditionError("A must be at least t0 + 1")
    b = choose_b(A, L, Lambda, setup)
    lam = choose_lambda(b, prof, setup.m)
    a = choose_a(A, setup.m, lam)
    if gamma3 is None:
        gamma3 = calibrate_gamma3(setup, a, b, lam)
    eps0 = choose_eps0(setup.params, gamma3, setup.m)
    theta = make_cutoff(a, b)
    mod = CutoffModulation(eps0, lam, theta, prof)
    coeff = make_dgcs(setup.m, lam, mod, domain=(a, b))
    integral = dgcs_exponent_integral(setup.m, lam, mod, a, b)
    block = ActivationBlock(
        A=A, L=L, Lambda=Lambda, a=a, b=b, lam=lam, eps0=eps0, m=setup.m, theta=theta,
        modulation=mod, coeff=coeff, gamma3=gamma3, h14=eps0 / (16 * setup.c_inf * setup.gamma2),
        M_b=prof.M(b), M_A=prof.M(A), exponent_integral=integral,
    )
    if not verify:
        return block, None
    ver = verify_block(block, setup, config)
    if strict and not ver.passed:
        raise InternalError(f"activation block failed its checks: {ver.margins}")
    return block, ver


def integration_steps(lam: float, span: float, oscillation: float, setup: Setup, config: IntegratorConfig) -> float:
    """Estimated accepted steps for one mode across a block of length ``span``."""
    rate = max(lam * math.sqrt(setup.params.lambda2), oscillation)
    return span * rate * config.eta / (2 * math.pi)


def verify_block(
    block: ActivationBlock, setup: Setup, config: IntegratorConfig | None = None
) -> BlockVerification:
    """The four activation statements, each with a margin."""
    config = config or IntegratorConfig()
    prof = setup.profile
    c_inf = setup.c_inf
    a, b, lam = block.a, block.b, block.lam
    margins: dict[str, float] = {}
    details: dict[str, Any] = {}

    margins["envelope_gain"] = block.M_b - block.L * block.M_A

    glued = make_glued(c_inf, [GluedBlock(a, b, block.coeff)], prof.t0)
    probe = np.array([prof.t0, a - 0.5, a, b, b + 0.5])
    support_ok = bool(np.all(glued.c(probe) == c_inf))

    report = verify_membership(glued, prof, setup.params, horizon=b + 1.0)
    margins["hyperbolic"] = report.hyperbolic_margin
    margins["derivatives"] = report.derivative_margin
    margins["stabilization"] = report.stabilization_margin
    details["membership_method"] = report.method
    ratio, _ = computation_bound_check(block.coeff, prof.g, lam, block.eps0, setup.m, (a, b))
    details["gamma3_ratio"] = ratio
    margins["gamma3"] = block.gamma3 - ratio

    dev = glued.abs_deviation_integral(a, b)
    details["deviation_integral"] = dev
    margins["half_tail"] = 0.5 * float(prof.stab(b)) - dev

    root = math.sqrt(float(prof.G(b)) / float(prof.stab(b)))
    details["lambda_sandwich"] = bool(0.5 * root <= lam <= root)
    margins["lambda_over_gamma"] = lam - max(float(prof.gamma(block.A)), float(prof.gamma(b)))
    details["phase_a"] = setup.m * lam * a / (2 * math.pi)
    details["phase_b"] = setup.m * lam * b / (2 * math.pi)

    # u'(b)^2 = c_inf^(1/2) exp(I / (4 c_inf)) against (1/2) c_inf^(1/2) exp(H14 M(b)^(1/2))
    log_lhs = 0.5 * math.log(c_inf) + block.log_energy_at_b
    log_rhs = math.log(0.5) + 0.5 * math.log(c_inf) + block.h14 * math.sqrt(block.M_b)
    margins["growth_log"] = log_lhs - log_rhs

    if integration_steps(lam, b - a, block.coeff.oscillation, setup, config) <= DESK_STEPS:
        mats, _ = propagate(glued, lam, a, [b], config)
        _, v = mats[0] @ np.array([0.0, c_inf**0.25])
        _, wp = closed_form_dgcs(setup.m, lam, block.modulation, a, b)
        closed = c_inf**0.25 * float(wp)
        details["ode_u_prime_b"] = float(v)
        details["closed_u_prime_b"] = closed
        details["ode_closed_rel_diff"] = abs(float(v) - closed) / abs(closed)

    return BlockVerification(
        envelope_gain=margins["envelope_gain"] >= 0,
        compact_support=support_ok,
        membership=report.passed and margins["gamma3"] >= 0,
        half_tail=margins["half_tail"] >= 0,
        growth=margins["growth_log"] >= 0,
        margins=margins,
        details=details,
    )


# ---------------------------------------------------------------------------
# Iteration
# ---------------------------------------------------------------------------


def next_start(b: float, profile: RateProfile) -> float:
    """First point of the grid b * 1.01^j with S at most half of S(b)."""
    target = 0.5 * float(profile.stab(b))
    t = b
    for _ in range(100_000):
        if float(profile.stab(t)) <= target:
            return t
        t *= A_GRID_RATIO
    raise ResourceError("stabilization rate does not halve on the search grid")


@dataclass(frozen=True, eq=False)
class Schedule:
    setup: Setup
    blocks: tuple[ActivationBlock, ...]
    verifications: tuple[BlockVerification | None, ...]
    coeff: Coefficient
    energies_t0: tuple[float, ...]
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def gamma3(self) -> float:
        return self.blocks[0].gamma3

    @property
    def h14(self) -> float:
        return self.blocks[0].h14

    @property
    def h5(self) -> float:
        return 0.5 * self.h14

    def to_dict(self) -> dict[str, Any]:
        return {
            "setup": self.setup.to_dict(),
            "gamma3": self.gamma3,
            "H14": self.h14,
            "H5": self.h5,
            "blocks": [
                {
                    **blk.to_dict(),
                    "energy_t0": e,
                    "verification": None if ver is None else ver.to_dict(),
                }
                for blk, ver, e in zip(self.blocks, self.verifications, self.energies_t0)
            ],
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=_plain)

    def to_csv(self, path: str) -> None:
        cols = ["k", "A", "a", "b", "lambda", "eps0", "M_A", "M_b", "log_energy_at_b", "energy_t0"]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(cols)
            for k, (blk, e) in enumerate(zip(self.blocks, self.energies_t0), start=1):
                vals = [blk.A, blk.a, blk.b, blk.lam, blk.eps0, blk.M_A, blk.M_b, blk.log_energy_at_b, e]
                out.writerow([k, *[f"{float(v):.17g}" for v in vals]])


def _plain(obj: Any) -> Any:
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def build_schedule(
    K: int,
    setup: Setup,
    config: IntegratorConfig | None = None,
    verify: bool = True,
    energies: bool = True,
) -> Schedule:
    """Iterate the activation step K times and glue the blocks."""
    if K < 1:
        raise PreconditionError("K must be at least 1")
    if K > K_CAP:
        raise ResourceError(f"K={K} exceeds the desk-scale cap {K_CAP}")
    config = config or IntegratorConfig()
    blocks: list[ActivationBlock] = []
    checks: list[BlockVerification | None] = []
    A = setup.profile.t0 + 1.0
    Lambda = setup.lambda0
    gamma3 = None
    for k in range(1, K + 1):
        blk, ver = activation_step(A, 4.0 * k * k, Lambda, setup, gamma3, verify, config)
        blocks.append(blk)
        checks.append(ver)
        gamma3 = blk.gamma3
        Lambda = blk.lam + 1.0
        A = next_start(blk.b, setup.profile)
    glued = make_glued(setup.c_inf, [GluedBlock(b.a, b.b, b.coeff) for b in blocks], setup.profile.t0)
    sched = Schedule(setup, tuple(blocks), tuple(checks), glued, ())
    if energies:
        e0 = tuple(
            mode_energies(sched, k, blk.lam, [setup.profile.t0], config)[0].value
            for k, blk in enumerate(blocks, start=1)
        )
        sched = Schedule(setup, tuple(blocks), tuple(checks), glued, e0, sched.cache)
    return sched


# ---------------------------------------------------------------------------
# Mode energies along the schedule
# ---------------------------------------------------------------------------

EXACT = "exact"
LOWER = "lower_bound"
UPPER = "upper_bound"


@dataclass(frozen=True)
class EnergyValue:
    value: float
    kind: str


def _kow(state: np.ndarray, lam: float, c_inf: float) -> float:
    u, v = state
    return float(v * v / math.sqrt(c_inf) + lam * lam * math.sqrt(c_inf) * u * u)


def mode_energies(
    sched: Schedule,
    k: int,
    lam: float,
    times: Sequence[float],
    config: IntegratorConfig | None = None,
) -> list[EnergyValue]:
    """Kowaleskian energy of the mode with data (0, c_inf^(1/4)) at a_k.

    Blocks are crossed by the integrator when affordable and by the closed
    form for the resonant frequency of block k. Otherwise the energy
    change across a block is bounded by exp(+-lam c_inf^(-1/2) int |c - c_inf|),
    which turns the result into a one-sided bound.
    """
    config = config or IntegratorConfig()
    key = (k, float(lam), config)
    known = sched.cache.setdefault(key, {})
    missing = [float(t) for t in times if float(t) not in known]
    if missing:
        known.update(_mode_energies(sched, k, lam, missing, config))
    return [known[float(t)] for t in times]


def _mode_energies(sched, k, lam, times, config) -> dict[float, EnergyValue]:
    setup = sched.setup
    c_inf = setup.c_inf
    start = sched.blocks[k - 1].a
    out: dict[float, EnergyValue] = {}
    for direction in (1.0, -1.0):
        targets = sorted((float(t) for t in times if direction * (t - start) >= 0), key=lambda t: direction * t)
        state: np.ndarray | None = np.array([0.0, c_inf**0.25])
        log_e = 0.0
        pos = start
        for t in targets:
            state, log_e = _advance(sched, k, lam, state, log_e, pos, t, config)
            pos = t
            energy = math.exp(log_e) if state is None else _kow(state, lam, c_inf)
            kind = EXACT if state is not None else (LOWER if direction > 0 else UPPER)
            out[t] = EnergyValue(energy, kind)
    return out


def _advance(sched, k, lam, state, log_e, x, y, config):
    """Move (state or log energy bound) from x to y across the glued blocks."""
    setup = sched.setup
    c_inf = setup.c_inf
    forward = y >= x
    lo, hi = min(x, y), max(x, y)
    order = sched.blocks if forward else sched.blocks[::-1]
    pos = x
    for j, blk in ((sched.blocks.index(b) + 1, b) for b in order):
        s, e = max(lo, blk.a), min(hi, blk.b)
        if e <= s:
            continue
        enter, leave = (s, e) if forward else (e, s)
        if state is not None:
            state = _rotate(state, lam, c_inf, enter - pos)
        resonant = forward and j == k and lam == blk.lam and enter == blk.a and state is not None
        steps = integration_steps(lam, e - s, blk.coeff.oscillation, setup, config)
        if resonant and steps > DESK_STEPS:
            scale = state[1]  # data at a_k is (0, scale)
            if leave == blk.b:
                growth = math.exp(blk.exponent_integral / (8 * setup.c_inf))
                phase = setup.m * lam * blk.b
                w, wp = math.sin(phase) / (setup.m * lam) * growth, math.cos(phase) * growth
            else:
                w, wp = closed_form_dgcs(setup.m, lam, blk.modulation, blk.a, leave)
            state = np.array([scale * float(w), scale * float(wp)])
        elif state is not None and steps <= DESK_STEPS:
            mats, _ = propagate(sched.coeff, lam, enter, [leave], config)
            state = mats[0] @ state
        else:
            if state is not None:
                log_e = math.log(_kow(state, lam, c_inf))
                state = None
            change = lam * sched.coeff.abs_deviation_integral(s, e) / math.sqrt(c_inf)
            log_e += -change if forward else change
        pos = leave
    if state is not None:
        state = _rotate(state, lam, c_inf, y - pos)
    return state, log_e


def _rotate(state: np.ndarray, lam: float, c_inf: float, dt: float) -> np.ndarray:
    if dt == 0:
        return state
    om = lam * math.sqrt(c_inf)
    cs, sn = math.cos(om * dt), math.sin(om * dt)
    u, v = state
    return np.array([cs * u + sn * v / om, -om * sn * u + cs * v])


# ---------------------------------------------------------------------------
# Spectral sample, superposition, growth
# ---------------------------------------------------------------------------

BAND = "band"
SINGLETON = "singleton"


@dataclass(frozen=True)
class Cluster:
    k: int
    lo: float
    hi: float
    nodes: tuple[float, ...]
    weights: tuple[float, ...]
    kind: str
    reason: str = ""

    @property
    def mass(self) -> float:
        return float(sum(self.weights))

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k, "lo": self.lo, "hi": self.hi, "nodes": list(self.nodes),
            "weights": list(self.weights), "mass": self.mass, "kind": self.kind,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class SpectralSample:
    clusters: tuple[Cluster, ...]

    def pairs(self) -> list[tuple[int, float, float]]:
        return [(c.k, lam, w) for c in self.clusters for lam, w in zip(c.nodes, c.weights)]

    def to_dict(self) -> dict[str, Any]:
        return {"clusters": [c.to_dict() for c in self.clusters]}


def singleton(k: int, sched: Schedule, reason: str = "") -> Cluster:
    lam = sched.blocks[k - 1].lam
    return Cluster(k, lam, lam, (lam,), (1.0,), SINGLETON, reason)


def atomic_sample(sched: Schedule) -> SpectralSample:
    """Unit point masses at the resonant frequencies."""
    return SpectralSample(tuple(singleton(k, sched, "atomic") for k in range(1, len(sched.blocks) + 1)))


def band_search(
    sched: Schedule,
    k: int,
    config: IntegratorConfig | None = None,
    samples: int = BAND_SAMPLES,
) -> Cluster:
    """Widest band [lambda_k, hat] on a halving search whose Gauss nodes and
    right end keep E(b_k) >= E_k(b_k)/2 and E(t0) <= 2 E_k(t0)."""
    config = config or IntegratorConfig()
    setup = sched.setup
    blk = sched.blocks[k - 1]
    t0 = setup.profile.t0
    if integration_steps(blk.lam, blk.b - blk.a, blk.coeff.oscillation, setup, config) > DESK_STEPS:
        return singleton(k, sched, "block not integrable at desk scale")
    upper = sched.blocks[k].lam if k < len(sched.blocks) else blk.lam + 1.0
    target_b = mode_energies(sched, k, blk.lam, [blk.b], config)[0].value
    e_t0 = sched.energies_t0[k - 1]
    xs, ws = np.polynomial.legendre.leggauss(samples)
    delta = 0.5 * (upper - blk.lam)
    while delta >= BAND_COLLAPSE * blk.lam:
        hi = blk.lam + delta
        nodes = blk.lam + 0.5 * delta * (xs + 1.0)
        ok = True
        for lam in [*nodes, hi]:
            if integration_steps(lam, blk.b - blk.a, blk.coeff.oscillation, setup, config) > DESK_STEPS:
                ok = False
                break
            e_b, e_0 = mode_energies(sched, k, float(lam), [blk.b, t0], config)
            if e_b.kind != EXACT or e_b.value < 0.5 * target_b or e_0.value > 2.0 * e_t0:
                ok = False
                break
        if ok:
            return Cluster(k, blk.lam, hi, tuple(map(float, nodes)), tuple(map(float, 0.5 * delta * ws)), BAND)
        delta *= 0.5
    return singleton(k, sched, "band collapsed")


def band_sample(sched: Schedule, config: IntegratorConfig | None = None) -> SpectralSample:
    return SpectralSample(tuple(band_search(sched, k, config) for k in range(1, len(sched.blocks) + 1)))


def superposition_energy(
    sched: Schedule,
    sample: SpectralSample,
    times: Sequence[float],
    config: IntegratorConfig | None = None,
) -> list[EnergyValue]:
    """Energy of u = sum_k k^-1 (E_k(t0) mass_k)^(-1/2) sum_j w_j^(1/2) v_(lambda_j, k).

    The modes are orthogonal in the spectral representation, so the energy
    is the weighted sum of mode energies.
    """
    if not sched.energies_t0:
        raise PreconditionError("schedule was built without energies at t0")
    totals = np.zeros(len(times))
    kinds: list[set[str]] = [set() for _ in times]
    for cl in sample.clusters:
        norm = 1.0 / (cl.k**2 * sched.energies_t0[cl.k - 1] * cl.mass)
        for lam, w in zip(cl.nodes, cl.weights):
            vals = mode_energies(sched, cl.k, lam, times, config)
            for i, ev in enumerate(vals):
                totals[i] += norm * w * ev.value
                kinds[i].add(ev.kind)
    out = []
    for total, ks in zip(totals, kinds):
        ks.discard(EXACT)
        if len(ks) > 1:
            raise InternalError("mixed lower and upper bounds in one energy")
        out.append(EnergyValue(float(total), ks.pop() if ks else EXACT))
    return out


@dataclass(frozen=True)
class GrowthRow:
    k: int
    b: float
    energy_t0: float
    energy_b: float
    energy_b_kind: str
    required: float
    mode_energy_t0: float
    mode_energy_t0_cap: float
    mode_energy_b: float
    mode_energy_b_floor: float
    chain_log_lhs: float
    chain_log_rhs: float

    @property
    def passed(self) -> bool:
        return self.energy_b >= self.required and self.energy_b_kind != UPPER

    @property
    def log_margin(self) -> float:
        return math.log(self.energy_b) - math.log(self.required)

    @property
    def estimates_ok(self) -> bool:
        """Upper estimate of E_k(t0) and lower estimate of E_k(b_k)."""
        return self.mode_energy_t0 <= self.mode_energy_t0_cap and self.mode_energy_b >= self.mode_energy_b_floor

    @property
    def chain_ok(self) -> bool:
        """Whether the worst-case arithmetic alone already forces growth at this k."""
        return self.chain_log_lhs >= self.chain_log_rhs

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.__dict__, "passed": self.passed, "log_margin": self.log_margin,
            "estimates_ok": self.estimates_ok, "chain_ok": self.chain_ok,
        }


@dataclass(frozen=True)
class GrowthReport:
    rows: tuple[GrowthRow, ...]
    sample: SpectralSample
    h5: float
    energy_t0_cap: float
    chain_threshold: float

    @property
    def k_min(self) -> int | None:
        """Smallest k from which every built block passes."""
        k_min = None
        for row in reversed(self.rows):
            if not row.passed:
                break
            k_min = row.k
        return k_min

    @property
    def passed(self) -> bool:
        return self.k_min is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows], "sample": self.sample.to_dict(),
            "H5": self.h5, "energy_t0_cap": self.energy_t0_cap, "k_min": self.k_min,
            "chain_threshold": self.chain_threshold,
        }


def verify_growth(
    sched: Schedule,
    sample: SpectralSample | None = None,
    config: IntegratorConfig | None = None,
) -> GrowthReport:
    """Check E_u(b_k) >= E_u(t0) exp(H5 M(b_k)^(1/2)) block by block."""
    config = config or IntegratorConfig()
    sample = sample or atomic_sample(sched)
    setup = sched.setup
    t0 = setup.profile.t0
    bs = [blk.b for blk in sched.blocks]
    values = superposition_energy(sched, sample, [t0, *bs], config)
    e0 = values[0]
    if e0.kind == LOWER:
        raise InternalError("energy at t0 is only bounded from below")
    h_cap, h_exp = theorem_constants(setup.params, setup.profile).pair(setup.profile.gamma_monotonicity)
    const = math.log(4 * h_cap * math.pi**2 / 3)
    rows = []
    for k, (blk, ev) in enumerate(zip(sched.blocks, values[1:]), start=1):
        e_b = mode_energies(sched, k, blk.lam, [blk.b], config)[0].value
        root_b, root_a = math.sqrt(blk.M_b), math.sqrt(blk.M_A)
        rows.append(GrowthRow(
            k=k, b=blk.b, energy_t0=e0.value, energy_b=ev.value, energy_b_kind=ev.kind,
            required=e0.value * math.exp(sched.h5 * math.sqrt(blk.M_b)),
            mode_energy_t0=sched.energies_t0[k - 1],
            mode_energy_t0_cap=h_cap * math.exp(h_exp * root_a),
            mode_energy_b=e_b,
            mode_energy_b_floor=0.5 * math.exp(blk.h14 * root_b),
            chain_log_lhs=blk.h14 * root_b - h_exp * root_a - 2 * math.log(k) - const,
            chain_log_rhs=0.5 * blk.h14 * root_b,
        ))
    # with M(b_k)^(1/2) >= 2k M(A_k)^(1/2) the chain closes once k H14 exceeds H16
    return GrowthReport(tuple(rows), sample, sched.h5, math.pi**2 / 3, h_exp / sched.h14)
