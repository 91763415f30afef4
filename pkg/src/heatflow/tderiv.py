"""Numerical differentiation in t, kept independent of the analytic pipeline.

Two oracles: a Chebyshev interpolant on Chebyshev-Lobatto nodes differentiated
through its coefficients, and central differences with Richardson
extrapolation. Both only ever see samples ``f(t)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb

__all__ = [
    "SampledCurve",
    "LowConfidenceWarning",
    "DerivativeAccuracyError",
    "TAIL_TOL",
    "TRUSTED_FRACTION",
    "chebyshev_fit",
    "adaptive_chebyshev_fit",
    "spectral_derivative",
    "spectral_derivative_with_error",
    "candidate_degrees",
    "fit_family",
    "best_spectral_derivative",
    "trusted_interval",
    "richardson_derivative",
]

TAIL_TOL = 1e-12
TRUSTED_FRACTION = 0.6
_TAIL_COUNT = 3
_EPS = float(np.finfo(float).eps)


class LowConfidenceWarning(RuntimeWarning):
    """Chebyshev coefficients have not decayed below the tail tolerance."""


class DerivativeAccuracyError(ArithmeticError):
    """A finite-difference estimate cannot be trusted."""


@dataclass(frozen=True)
class SampledCurve:
    """Chebyshev interpolant of samples of a scalar function of ``t``.

    ``noise`` is the absolute accuracy of each sample, used to bound the
    roundoff part of derivative errors.
    """

    interval: Tuple[float, float]
    nodes: np.ndarray
    values: np.ndarray
    coeffs: np.ndarray
    noise: float

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def tail(self) -> float:
        """Largest of the last few coefficients relative to the largest coefficient."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs[-_TAIL_COUNT:])) / scale)

    @property
    def trusted(self) -> bool:
        return self.tail <= TAIL_TOL or np.max(np.abs(self.coeffs[-_TAIL_COUNT:])) <= 4 * self.noise

    def to_unit(self, t):
        lo, hi = (np.longdouble(v) for v in self.interval)
        return (2 * np.asarray(t, dtype=np.longdouble) - lo - hi) / (hi - lo)

    def __call__(self, t):
        return np.asarray(cheb.chebval(self.to_unit(t), self.coeffs), dtype=float)


_PI = np.arccos(np.longdouble(-1))


def _lobatto(n: int) -> np.ndarray:
    # second-kind points, descending on [-1, 1]
    return np.cos(_PI * np.arange(n + 1) / n)


def chebyshev_fit(f: Callable[[float], float], interval, degree: int, noise: Optional[float] = None) -> SampledCurve:
    """Interpolate ``f`` at ``degree + 1`` Chebyshev-Lobatto points of ``interval``.

    Coefficients come from the discrete cosine relations for the Lobatto grid.
    Nodes are handed to ``f`` as long doubles and the fit is carried out in
    long double, so a sampler that returns long doubles keeps its extra digits.
    ``interval`` must lie in ``t > 0``.
    """
    lo, hi = (np.longdouble(v) for v in interval)
    if not (0 < lo < hi):
        raise ValueError(f"interval must satisfy 0 < t_lo < t_hi, got {interval}")
    if degree < 2:
        raise ValueError("degree must be at least 2")
    x = _lobatto(degree)
    nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
    samples = []
    for t in nodes:
        try:
            samples.append(f(t))
        except Exception as exc:
            raise type(exc)(f"sampling failed at node t={float(t)!r}: {exc}") from exc
    raw = np.asarray(samples)
    values = raw.astype(np.longdouble)
    j = np.arange(degree + 1)
    w = np.ones(degree + 1, dtype=np.longdouble)
    w[0] = w[-1] = 0.5
    coeffs = (2 / np.longdouble(degree)) * (np.cos(_PI * np.outer(j, j) / degree) @ (w * values))
    coeffs[0] *= 0.5
    coeffs[-1] *= 0.5
    if noise is None:
        eps = np.finfo(np.longdouble if raw.dtype == np.longdouble else float).eps
        noise = 16 * eps * float(np.max(np.abs(values)))
    return SampledCurve((float(lo), float(hi)), nodes, values, coeffs, float(noise))


def adaptive_chebyshev_fit(
    f: Callable[[float], float],
    interval,
    order: int,
    degree: Optional[int] = None,
    noise: Optional[float] = None,
    max_doublings: int = 1,
) -> SampledCurve:
    """Fit with the smallest degree whose coefficient tail has decayed.

    Starts at ``2 * order + 8`` and doubles (at most ``max_doublings`` times)
    while the tail test fails. Low starting degrees keep the amplification of
    sample noise by repeated differentiation small.
    """
    if degree is None:
        degree = 2 * order + 8
    curve = chebyshev_fit(f, interval, degree, noise)
    for _ in range(max_doublings):
        if curve.trusted:
            break
        curve = chebyshev_fit(f, interval, 2 * curve.degree, noise)
    return curve


def trusted_interval(t: float, half_width: float, floor_fraction: float = 0.2) -> Tuple[float, float]:
    """Sampling interval around ``t`` that keeps ``t`` inside the trusted region.

    Symmetric when ``t - half_width`` stays above ``floor_fraction * t``;
    otherwise the lower end is pinned there and the upper end stretched as far
    as the trusted-region rule allows, capped at ``t + half_width``.
    """
    if not (t > 0 and half_width > 0):
        raise ValueError("need t > 0 and half_width > 0")
    lo = t - half_width
    if lo >= floor_fraction * t:
        return lo, t + half_width
    lo = floor_fraction * t
    margin = 0.5 * (1.0 - TRUSTED_FRACTION)
    hi = min(t + half_width, lo + (t - lo) / margin * (1 - 1e-9))
    return lo, hi


def _check_trusted(curve: SampledCurve, t: float):
    u = curve.to_unit(t)
    if abs(u) > TRUSTED_FRACTION:
        lo, hi = curve.interval
        raise ValueError(
            f"t={t} lies outside the central {TRUSTED_FRACTION:.0%} of [{lo}, {hi}]; "
            "derivatives near the ends of a Chebyshev fit are unreliable"
        )
    return u


def _omitted_terms(curve: SampledCurve, m: int, u, scale, extra: int = 64) -> float:
    # coefficients past the degree, extrapolated geometrically from the tail;
    # derivatives amplify them by roughly k^m, so the last few retained
    # coefficients alone understate the truncation error at high order
    c = np.abs(np.asarray(curve.coeffs[-4:], dtype=float))
    rho = min(0.9, math.sqrt((c[-1] + c[-2]) / max(c[-3] + c[-4], 1e-300)))
    n = curve.degree
    ks = np.arange(n + 1, n + 1 + extra)
    basis = np.zeros((n + 1 + extra, extra))
    basis[ks, np.arange(extra)] = 1.0
    derivs = np.abs(cheb.chebval(float(u), cheb.chebder(basis, m)))
    # interpolation aliases the omitted tail once more: factor 2
    return float(2 * scale * max(c[-1], c[-2]) * np.sum(rho ** (ks - n) * derivs))


def spectral_derivative_with_error(curve: SampledCurve, m: int, t: float) -> Tuple[float, float]:
    """``m``-th derivative of the interpolant at ``t`` with an error estimate.

    The estimate adds three parts: the derivative of the last few
    coefficients, a geometric extrapolation of the coefficients beyond the
    degree (truncation and aliasing), and the sample noise propagated through
    every basis derivative (roundoff).
    """
    if m < 0 or m > curve.degree // 2:
        raise ValueError(f"order {m} exceeds degree/2 = {curve.degree // 2}")
    u = _check_trusted(curve, t)
    lo, hi = (np.longdouble(v) for v in curve.interval)
    scale = (2 / (hi - lo)) ** m
    value = float(cheb.chebval(u, cheb.chebder(curve.coeffs, m)) * scale)
    tail = np.zeros_like(curve.coeffs)
    tail[-_TAIL_COUNT:] = curve.coeffs[-_TAIL_COUNT:]
    trunc = abs(float(cheb.chebval(u, cheb.chebder(tail, m)))) * scale
    trunc += _omitted_terms(curve, m, u, float(scale))
    basis = np.eye(curve.degree + 1)
    amplification = float(np.sum(np.abs(cheb.chebval(float(u), cheb.chebder(basis, m)))) * scale)
    return value, float(trunc + curve.noise * amplification)


def candidate_degrees(order: int) -> Tuple[int, ...]:
    """Degrees tried by :func:`best_spectral_derivative` for derivatives up to ``order``."""
    base = 2 * order + 8
    return tuple(sorted({base, base + 4, base + 8, base + 12, base + 20, 4 * order + 16}))


def fit_family(f: Callable[[float], float], interval, degrees: Sequence[int], noise: Optional[float] = None):
    """One :func:`chebyshev_fit` per degree, keyed by degree."""
    return {d: chebyshev_fit(f, interval, d, noise) for d in degrees}


def best_spectral_derivative(curves, m: int, t: float) -> Tuple[float, float, int]:
    """Derivative from the fit with the smallest error estimate.

    ``curves`` maps degree to :class:`SampledCurve`; only degrees of at least
    ``2 m + 8`` are considered. Returns ``(value, error_estimate, degree)``.

    Low degrees truncate, high degrees amplify sample noise; picking the
    minimum of the combined estimate balances the two per order.
    """
    best = None
    for degree in sorted(curves):
        if degree < 2 * m + 8:
            continue
        value, err = spectral_derivative_with_error(curves[degree], m, t)
        if best is None or err < best[1]:
            best = (value, err, degree)
    if best is None:
        raise ValueError(f"no fit of degree >= {2 * m + 8} for order {m}")
    return best


def spectral_derivative(curve: SampledCurve, m: int, t: float) -> float:
    """``m``-th derivative of the interpolant at ``t`` (central 60% only)."""
    if not curve.trusted:
        warnings.warn(
            f"Chebyshev tail {curve.tail:.2e} above {TAIL_TOL:g}; derivative has low confidence",
            LowConfidenceWarning,
            stacklevel=2,
        )
    return spectral_derivative_with_error(curve, m, t)[0]


_STENCILS = {
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def richardson_derivative(f: Callable[[float], float], m: int, t: float, h0: float, levels: int = 3):
    """Central difference of order ``m`` extrapolated over ``h0, h0/2, h0/4``.

    The symmetric stencils have error series in ``h^2``, so each Richardson
    level removes one even power. Returns ``(value, error_estimate)`` where the
    estimate is the change produced by the last extrapolation level plus the
    sample roundoff carried through the stencil.

    Raises:
        DerivativeAccuracyError: the levels disagree so badly that the result is noise.
    """
    if m not in _STENCILS:
        raise ValueError(f"richardson_derivative supports orders 1..4, got {m}")
    if not t - m * h0 > 0:
        raise ValueError(f"stencil would leave t > 0: t={t}, m={m}, h0={h0}")
    stencil = _STENCILS[m]
    weight = sum(abs(c) for c in stencil.values())
    row = []
    roundoff = 0.0
    for level in range(levels):
        h = h0 / 2**level
        if t + h == t:
            raise DerivativeAccuracyError(f"step underflow at h={h}")
        samples = {k: f(t + k * h) for k in stencil}
        row.append(math.fsum(c * samples[k] for k, c in stencil.items()) / h**m)
        roundoff = max(roundoff, _EPS * weight * max(abs(v) for v in samples.values()) / h**m)
    prev = row
    for j in range(1, levels):
        factor = 4.0**j
        prev, row = row, [(factor * row[i + 1] - row[i]) / (factor - 1) for i in range(len(row) - 1)]
    value = row[-1]
    # extrapolation weights sum to under 2 in absolute value per level
    roundoff *= 2.0 ** (levels - 1)
    floor = 1e3 * roundoff
    err = abs(value - prev[-1]) + roundoff
    if not math.isfinite(value) or err > max(abs(value), floor):
        raise DerivativeAccuracyError(
            f"Richardson levels disagree at t={t}, m={m}: value {value:.6g}, change {err:.3g}"
        )
    return value, err
