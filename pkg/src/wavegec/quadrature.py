"""Quadrature helpers: adaptive, piecewise Gauss-Legendre, and cosine-weighted."""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import NumericError

ABS_TOL = 1e-12
REL_TOL = 1e-9
# halvings of a probe interval when locating a sign change of the integrand
ROOT_BISECTIONS = 20

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def adaptive_quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    points: list[float] | None = None,
    abs_tol: float = ABS_TOL,
    rel_tol: float = REL_TOL,
    limit: int = 2000,
) -> float:
    """Integrate ``f`` over ``[a, b]`` with adaptive bisection (QUADPACK).

    Raises NumericError when the reported error exceeds the tolerance by
    more than a factor of 100, or when the value is not finite.
    """
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    kwargs: dict = {"epsabs": abs_tol, "epsrel": rel_tol, "limit": limit}
    if points and math.isfinite(b):
        inner = sorted(p for p in points if a < p < b)
        if inner:
            kwargs["points"] = inner
            kwargs["limit"] = max(limit, 4 * len(inner) + 50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(f, a, b, **kwargs)
    if not math.isfinite(value):
        raise NumericError(f"quadrature returned {value} on [{a}, {b}]")
    if err > 100.0 * max(abs_tol, rel_tol * abs(value)):
        raise NumericError(
            f"quadrature did not converge on [{a}, {b}]: value={value}, err={err}"
        )
    return sign * value


def piecewise_gauss(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    piece: float,
    nodes: int = 24,
    chunk: int = 200_000,
) -> tuple[float, float]:
    """Composite Gauss-Legendre rule on pieces of length at most ``piece``.

    ``f`` must accept arrays. Returns the value and an error estimate taken
    from the difference with a rule of ``nodes // 2 + 2`` points.
    """
    if b == a:
        return 0.0, 0.0
    if b < a:
        value, err = piecewise_gauss(f, b, a, piece, nodes, chunk)
        return -value, err
    count = max(1, int(math.ceil((b - a) / piece)))
    edges_step = (b - a) / count
    fine_x, fine_w = _gauss_nodes(nodes)
    coarse_x, coarse_w = _gauss_nodes(nodes // 2 + 2)
    total_fine = 0.0
    total_coarse = 0.0
    for start in range(0, count, chunk):
        stop = min(count, start + chunk)
        left = a + edges_step * np.arange(start, stop, dtype=float)
        half = 0.5 * edges_step
        mid = left + half
        xs = (mid[:, None] + half * fine_x[None, :]).ravel()
        total_fine += half * float(np.sum(f(xs).reshape(-1, nodes) @ fine_w))
        xc = (mid[:, None] + half * coarse_x[None, :]).ravel()
        total_coarse += half * float(
            np.sum(f(xc).reshape(-1, coarse_x.size) @ coarse_w)
        )
    if not math.isfinite(total_fine):
        raise NumericError("composite Gauss-Legendre rule produced a non-finite value")
    return total_fine, abs(total_fine - total_coarse)


def abs_gauss_pieces(
    f: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    nodes: int = 24,
    probes: int = 8,
) -> np.ndarray:
    """Integral of |f| over each piece [edges[i], edges[i+1]] for smooth ``f``.

    Each piece is probed at ``probes + 1`` points; every bracketed sign
    change is located by bisection and the Gauss rule is split there, so no
    rule straddles a kink of |f|.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _gauss_nodes(nodes)
    offsets = np.linspace(0.0, 1.0, probes + 1)
    width = np.diff(edges)
    grid = (edges[:-1, None] + width[:, None] * offsets[None, :]).ravel()
    vals = f(grid)
    lo, hi = grid[:-1], grid[1:]
    bracket = (np.sign(vals[:-1]) * np.sign(vals[1:]) < 0) & (hi > lo)
    lo, hi, flo = lo[bracket], hi[bracket], vals[:-1][bracket]
    for _ in range(ROOT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        same = np.sign(f(mid)) == np.sign(flo)
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    roots = 0.5 * (lo + hi)
    roots = roots[(roots > edges[0]) & (roots < edges[-1])]
    sub = np.unique(np.concatenate([edges, roots]))
    half = 0.5 * np.diff(sub)
    mid = sub[:-1] + half
    parts = half * (np.abs(f((mid[:, None] + half[:, None] * x[None, :]).ravel())).reshape(-1, nodes) @ w)
    owner = np.searchsorted(edges, sub[:-1], side="right") - 1
    return np.bincount(owner, weights=parts, minlength=edges.size - 1)


def abs_piecewise_gauss(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    piece: float,
    nodes: int = 24,
    chunk: int = 100_000,
) -> float:
    """Integral of |f| over [a, b] on pieces of length at most ``piece``."""
    if b <= a:
        return 0.0
    count = max(1, int(math.ceil((b - a) / piece)))
    step = (b - a) / count
    total = 0.0
    for start in range(0, count, chunk):
        stop = min(count, start + chunk)
        edges = a + step * np.arange(start, stop + 1, dtype=float)
        edges[-1] = min(edges[-1], b)
        total += float(np.sum(abs_gauss_pieces(f, edges, nodes)))
    if not math.isfinite(total):
        raise NumericError("absolute-value Gauss rule produced a non-finite value")
    return total


def cosine_weighted_quad(
    f: Callable[[float], float], a: float, b: float, omega: float
) -> float:
    """Integrate ``f(s) cos(omega s)`` over ``[a, b]`` for smooth ``f``.

    Uses modified Clenshaw-Curtis moments, which stay accurate when
    ``omega (b - a)`` is very large.
    """
    if b == a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            f, a, b, weight="cos", wvar=omega, epsabs=ABS_TOL, epsrel=REL_TOL,
            limit=2000,
        )
    if not math.isfinite(value):
        raise NumericError("cosine-weighted quadrature returned a non-finite value")
    if err > 1e3 * max(ABS_TOL, REL_TOL * abs(value)) and err > 1e-10:
        raise NumericError(
            f"cosine-weighted quadrature did not converge: value={value}, err={err}"
        )
    return value
