"""Entropy, Fisher information and their time derivatives along the heat flow.

Everything is an x-integral over the real line, computed by adaptive
Gauss-Legendre panels. Time derivatives are taken under the integral sign,
with ``(d/dt)^k p`` supplied in closed form by the mixture and the derivatives
of ``log p`` recovered by inverting Faa di Bruno for ``exp``; nothing is
differentiated numerically in ``t``.

Sign convention: ``H(mu) = int p log p dx`` (the negative of Shannon's
differential entropy), ``y = -2H``, ``ydot = I``, ``N = exp(y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .bell import binomial_row, faa_di_bruno_exp, log_derivatives_from_function_derivatives
from .mixture import FlowedMixture, log_density, t_derivative_ratios, x_derivative_ratios

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "FlowFunctionals",
    "M_MAX",
    "integrate",
    "integrate_interval",
    "entropy",
    "fisher_information",
    "entropy_time_derivatives",
    "flow_functionals",
    "entropy_power_derivatives",
    "EntropyCurveSampler",
]

M_MAX = 6
GL_ORDER = 24
INITIAL_PANELS = 16
_EPS = float(np.finfo(float).eps)
# roundoff allowance, in units of eps * int |f|
_ROUNDOFF_FACTOR = 64.0


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_panels: int = 4096
    tail_sigma_multiplier: float = 12.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_panels < 8:
            raise ValueError("max_panels must be at least 8")
        if self.tail_sigma_multiplier < 6:
            raise ValueError("tail_sigma_multiplier must be at least 6")


class QuadratureError(ArithmeticError):
    """Adaptive quadrature ran out of panels before meeting its tolerance."""

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


_GL_CACHE = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_rules(f, a: np.ndarray, b: np.ndarray):
    """Coarse rule on each panel and the same rule on both halves.

    Returns ``(fine, coarse, fine_abs)`` with panels on the last axis.
    """
    nodes, weights = _gauss_legendre(GL_ORDER)
    mid = 0.5 * (a + b)
    lo = np.stack([a, a, mid])  # whole, left half, right half
    hi = np.stack([b, mid, b])
    half = 0.5 * (hi - lo)
    x = (0.5 * (hi + lo))[..., None] + half[..., None] * nodes
    vals = np.asarray(f(x.ravel()), dtype=float)
    vals = vals.reshape(vals.shape[:-1] + x.shape)
    sums = np.einsum("...n,n->...", vals, weights) * half
    abs_sums = np.einsum("...n,n->...", np.abs(vals), weights) * half
    coarse = sums[..., 0, :]
    fine = sums[..., 1, :] + sums[..., 2, :]
    return fine, coarse, abs_sums[..., 1, :] + abs_sums[..., 2, :]


def integrate_interval(f: Callable, a: float, b: float, cfg: QuadratureConfig = QuadratureConfig()):
    """Adaptive panel quadrature of ``f`` over ``[a, b]``.

    ``f`` maps a 1-d array of abscissae to values of shape ``(n,)`` or
    ``(k, n)``; vector integrands are refined until every row converges.
    Returns ``(value, error_estimate)`` with the shape of one row set.

    Raises:
        QuadratureError: the panel budget is exhausted; carries the best estimate.
    """
    total, total_err, _ = _adaptive(f, a, b, cfg)
    return total, total_err


def _adaptive(f, a, b, cfg):
    if not b > a:
        raise ValueError(f"empty integration interval [{a}, {b}]")
    edges = np.linspace(a, b, INITIAL_PANELS + 1)
    pa, pb = edges[:-1], edges[1:]
    fine, coarse, fabs = _panel_rules(f, pa, pb)
    width = b - a
    while True:
        err = np.abs(fine - coarse) + _ROUNDOFF_FACTOR * _EPS * fabs
        total = fine.sum(axis=-1)
        total_err = err.sum(axis=-1)
        tol = np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            return total, total_err, np.union1d(pa, pb)
        share = tol[..., None] * ((pb - pa) / width)
        noise = 2.0 * _ROUNDOFF_FACTOR * _EPS * fabs
        bad = (err > share) & (np.abs(fine - coarse) > noise)
        if bad.ndim > 1:
            bad = bad.any(axis=0)
        if not bad.any():
            # only roundoff left; the estimate already reflects it
            return total, total_err, np.union1d(pa, pb)
        n_panels = pa.size + int(bad.sum())
        if n_panels > cfg.max_panels:
            raise QuadratureError(
                f"quadrature did not converge within {cfg.max_panels} panels "
                f"(error {np.max(total_err / tol):.3g} x tolerance)",
                value=total,
                error=total_err,
            )
        mid = 0.5 * (pa[bad] + pb[bad])
        new_a = np.concatenate([pa[bad], mid])
        new_b = np.concatenate([mid, pb[bad]])
        nf, nc, nabs = _panel_rules(f, new_a, new_b)
        keep = ~bad
        pa = np.concatenate([pa[keep], new_a])
        pb = np.concatenate([pb[keep], new_b])
        fine = np.concatenate([fine[..., keep], nf], axis=-1)
        coarse = np.concatenate([coarse[..., keep], nc], axis=-1)
        fabs = np.concatenate([fabs[..., keep], nabs], axis=-1)


def integrate(f: Callable, support_hint, cfg: QuadratureConfig = QuadratureConfig()):
    """Integrate over the real line, truncated to the hull of ``center +- K spread``.

    ``support_hint`` is ``(centers, spreads)``, scalars or arrays, and ``K`` is
    ``cfg.tail_sigma_multiplier``.
    """
    centers, spreads = (np.atleast_1d(np.asarray(v, dtype=float)) for v in support_hint)
    k = cfg.tail_sigma_multiplier
    return integrate_interval(f, float(np.min(centers - k * spreads)), float(np.max(centers + k * spreads)), cfg)


def _as_float(value, err):
    return float(value), float(err)


def entropy(fm: FlowedMixture, cfg: QuadratureConfig = QuadratureConfig()):
    """``H = int p log p dx``; returns ``(H, error_estimate)``."""

    def f(x):
        logp = log_density(fm, x)
        return np.exp(logp) * logp

    return _as_float(*integrate(f, fm.support_hint(), cfg))


def fisher_information(fm: FlowedMixture, cfg: QuadratureConfig = QuadratureConfig()):
    """``I = int (p')^2 / p dx``; returns ``(I, error_estimate)``."""

    def f(x):
        score = x_derivative_ratios(fm, x, 1)[1]
        return np.exp(log_density(fm, x)) * score * score

    return _as_float(*integrate(f, fm.support_hint(), cfg))


def _time_derivative_integrands(fm: FlowedMixture, x, M: int):
    """Rows ``(d/dt)^m (p log p)`` for ``m = 1..M`` at the abscissae ``x``.

    Leibniz over ``p * log p``; with ``r_j = p^{(j)}/p`` and
    ``L_j = (log p)^{(j)}`` the row is ``p (r_m log p + sum_j C(m,j) r_{m-j} L_j)``.
    """
    logp = log_density(fm, x)
    p = np.exp(logp)
    r = t_derivative_ratios(fm, x, M)
    L = [None] + log_derivatives_from_function_derivatives(list(r), M)
    rows = []
    for m in range(1, M + 1):
        row = binomial_row(m)
        acc = r[m] * logp
        for j in range(1, m + 1):
            acc = acc + row[j] * r[m - j] * L[j]
        rows.append(p * acc)
    return np.stack(rows)


def _check_order(M: int):
    if M < 1 or M > M_MAX:
        raise ValueError(f"derivative order must be in 1..{M_MAX}, got {M}")


def entropy_time_derivatives(fm: FlowedMixture, M: int, cfg: QuadratureConfig = QuadratureConfig()):
    """``d^m H / dt^m`` for ``m = 1..M``; returns ``(values, error_estimates)`` tuples.

    Raises:
        QuadratureError: naming the orders that failed to converge.
    """
    _check_order(M)
    try:
        vals, errs = integrate(lambda x: _time_derivative_integrands(fm, x, M), fm.support_hint(), cfg)
    except QuadratureError as exc:
        tol = np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(exc.value))
        failed = [m for m in range(1, M + 1) if exc.error[m - 1] > tol[m - 1]]
        raise QuadratureError(
            f"d^mH/dt^m failed to converge for order(s) {failed} at t={fm.t}",
            value=exc.value,
            error=exc.error,
        ) from exc
    return tuple(float(v) for v in vals), tuple(float(e) for e in errs)


@dataclass(frozen=True)
class FlowFunctionals:
    """Entropy-flow quantities at one time ``t`` (dimension 1).

    ``H_t_derivs[m-1]`` is ``d^m H/dt^m``; ``*_err`` fields are the matching
    quadrature error estimates.
    """

    t: float
    H: float
    I: float
    H_t_derivs: Tuple[float, ...]
    H_err: float = 0.0
    I_err: float = 0.0
    H_t_derivs_err: Tuple[float, ...] = ()

    @property
    def y(self) -> float:
        return -2.0 * self.H

    @property
    def y_dot(self) -> float:
        return self.I

    @property
    def entropy_power(self) -> float:
        return math.exp(self.y)

    @property
    def order(self) -> int:
        return len(self.H_t_derivs)

    @property
    def derivs(self) -> Tuple[float, ...]:
        """``(ydot, ydot', ..., ydot^{(M-1)})`` with ``ydot^{(k)} = -2 d^{k+1}H/dt^{k+1}``."""
        return tuple(-2.0 * d for d in self.H_t_derivs)

    @property
    def derivs_err(self) -> Tuple[float, ...]:
        return tuple(2.0 * e for e in self.H_t_derivs_err)

    @property
    def error_estimates(self) -> Tuple[float, ...]:
        return (self.H_err, self.I_err) + tuple(self.H_t_derivs_err)

    @property
    def de_bruijn_residual(self) -> float:
        return self.H_t_derivs[0] + 0.5 * self.I

    @property
    def de_bruijn_tolerance(self) -> float:
        return self.H_t_derivs_err[0] + 0.5 * self.I_err


def flow_functionals(fm: FlowedMixture, M: int, cfg: QuadratureConfig = QuadratureConfig()) -> FlowFunctionals:
    """Entropy, Fisher information and ``d^mH/dt^m`` (``m <= M``) at ``fm.t``."""
    H, H_err = entropy(fm, cfg)
    I, I_err = fisher_information(fm, cfg)
    derivs, derivs_err = entropy_time_derivatives(fm, M, cfg)
    return FlowFunctionals(
        t=float(fm.t),
        H=H,
        I=I,
        H_t_derivs=derivs,
        H_err=H_err,
        I_err=I_err,
        H_t_derivs_err=derivs_err,
    )


def entropy_power_derivatives(ff: FlowFunctionals) -> Tuple[float, ...]:
    """``d^m N/dt^m`` for ``m = 1..ff.order`` as ``exp(y) B_m(ydot, ydot', ...)``."""
    return tuple(faa_di_bruno_exp(ff.y, ff.derivs, m) for m in range(1, ff.order + 1))


class EntropyCurveSampler:
    """``H(t)`` and ``N(t)`` on ``[t_lo, t_hi]`` for numerical differentiation in ``t``.

    Every sample uses one composite Gauss-Legendre rule, so quadrature bias
    varies smoothly with ``t`` instead of jumping when adaptive panels change,
    and the arithmetic is long double. Both matter because differentiating
    samples ``m`` times amplifies their noise by roughly ``(degree / width)^m``.
    The panel layout merges the adaptive layouts found at both ends and the
    middle of the interval over the widest truncation range.
    """

    def __init__(self, spec, t_lo: float, t_hi: float, cfg: QuadratureConfig = QuadratureConfig()):
        if not 0 <= t_lo < t_hi:
            raise ValueError(f"need 0 <= t_lo < t_hi, got {t_lo}, {t_hi}")
        self.spec = spec
        tight = QuadratureConfig(
            abs_tol=min(cfg.abs_tol, 1e-15),
            rel_tol=min(cfg.rel_tol, 1e-14),
            max_panels=cfg.max_panels,
            tail_sigma_multiplier=cfg.tail_sigma_multiplier,
        )
        centers, spreads = spec.at(t_hi).support_hint()
        k = tight.tail_sigma_multiplier
        a = float(np.min(centers - k * spreads))
        b = float(np.max(centers + k * spreads))
        edges = np.array([a, b])
        for t in (t_lo, 0.5 * (t_lo + t_hi), t_hi):
            fm = spec.at(t)
            _, _, e = _adaptive(lambda x: _plogp(fm, x), a, b, tight)
            edges = np.union1d(edges, e)
        # bisect once more: the adaptive value came from the half panels
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.union1d(edges, mids).astype(np.longdouble)
        nodes, weights = _gauss_legendre(GL_ORDER)
        lo, hi = edges[:-1, None], edges[1:, None]
        half = 0.5 * (hi - lo)
        self._x = ((0.5 * (hi + lo)) + half * nodes.astype(np.longdouble)).ravel()
        self._w = (half * weights.astype(np.longdouble)).ravel()
        self.panels = len(edges) - 1
        self._cache = {}

    def entropy(self, t) -> np.longdouble:
        t = np.longdouble(t)
        if t not in self._cache:
            self._cache[t] = np.sum(self._w * _plogp(self.spec.at(t), self._x))
        return self._cache[t]

    def entropy_power(self, t) -> np.longdouble:
        return np.exp(-2 * self.entropy(t))


def _plogp(fm, x):
    logp = log_density(fm, x)
    return np.exp(logp) * logp
