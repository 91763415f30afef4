"""One-dimensional Gaussian mixtures transported by the heat semigroup.

If ``X_0`` is a mixture of ``N(m_i, v_i)`` with weights ``w_i`` then
``X_0 + sqrt(t) G`` is the mixture of ``N(m_i, v_i + t)`` with the same
weights, so the density and all its x- and t-derivatives stay closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "MixtureSpec",
    "FlowedMixture",
    "hermite_he",
    "density",
    "log_density",
    "density_x_derivative",
    "density_t_derivative",
    "x_derivative_ratios",
    "t_derivative_ratios",
    "moments",
]

WEIGHT_SUM_TOL = 1e-12
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureSpec:
    """Initial measure as a finite Gaussian mixture on the real line.

    Weights are normalized on construction; callers that want to reject badly
    normalized input (see :mod:`heatflow.cli`) check before building.
    """

    weights: Tuple[float, ...]
    means: Tuple[float, ...]
    variances: Tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        m = tuple(float(x) for x in self.means)
        v = tuple(float(x) for x in self.variances)
        if not w:
            raise ValueError("mixture needs at least one component")
        if not len(w) == len(m) == len(v):
            raise ValueError("weights, means and variances must have equal length")
        for i, (wi, mi, vi) in enumerate(zip(w, m, v)):
            if not (math.isfinite(wi) and wi > 0):
                raise ValueError(f"component {i}: weight must be positive, got {wi}")
            if not math.isfinite(mi):
                raise ValueError(f"component {i}: mean must be finite, got {mi}")
            if not (math.isfinite(vi) and vi > 0):
                raise ValueError(f"component {i}: variance must be positive, got {vi}")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            w = tuple(x / total for x in w)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @classmethod
    def from_components(cls, components: Iterable[Tuple[float, float, float]]) -> "MixtureSpec":
        """Build from ``(weight, mean, variance)`` triples."""
        comps = list(components)
        return cls(
            tuple(c[0] for c in comps),
            tuple(c[1] for c in comps),
            tuple(c[2] for c in comps),
        )

    @classmethod
    def gaussian(cls, mean: float = 0.0, variance: float = 1.0) -> "MixtureSpec":
        return cls((1.0,), (mean,), (variance,))

    @property
    def components(self):
        return list(zip(self.weights, self.means, self.variances))

    def __len__(self):
        return len(self.weights)

    def at(self, t: float) -> "FlowedMixture":
        return FlowedMixture(self, t)


@dataclass(frozen=True)
class FlowedMixture:
    """The law at time ``t`` of the heat flow started from ``spec``."""

    spec: MixtureSpec
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ValueError(f"flow time must be nonnegative, got {self.t}")

    @property
    def variances(self) -> np.ndarray:
        # keeps the dtype of t, so a long double time gives long double variances
        return np.asarray(self.spec.variances) + self.t

    @property
    def means(self) -> np.ndarray:
        return np.asarray(self.spec.means)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.spec.weights)

    def as_spec(self) -> MixtureSpec:
        """Freeze the flowed law into a new initial measure."""
        return MixtureSpec(self.spec.weights, self.spec.means, tuple(self.variances.tolist()))

    def total_variance(self) -> float:
        return moments(self.spec)[1] + self.t

    def support_hint(self) -> Tuple[np.ndarray, np.ndarray]:
        """Component centers and spreads, for choosing integration ranges."""
        return self.means, np.sqrt(self.variances)


def hermite_he(n: int, z) -> np.ndarray:
    """Probabilists' Hermite polynomials ``He_0..He_n`` at ``z``, stacked on axis 0."""
    z = _as_real(z)
    out = np.empty((n + 1,) + z.shape, dtype=z.dtype)
    out[0] = 1.0
    if n >= 1:
        out[1] = z
    for k in range(1, n):
        out[k + 1] = z * out[k] - k * out[k - 1]
    return out


def _as_real(x) -> np.ndarray:
    # long double passes through for extended-precision sampling; all else is float64
    x = np.asarray(x)
    return x if x.dtype == np.longdouble else x.astype(float)


def _component_log_terms(fm: FlowedMixture, x):
    # log(w_i phi(x; m_i, s_i^2)) with components on axis 0
    x = _as_real(x)
    s2 = fm.variances.reshape((-1,) + (1,) * x.ndim)
    m = fm.means.reshape(s2.shape)
    w = fm.weights.reshape(s2.shape)
    z = (x - m) / np.sqrt(s2)
    logs = np.log(w) - LOG_SQRT_2PI - 0.5 * np.log(s2) - 0.5 * z * z
    return logs, z, np.sqrt(s2)


def log_density(fm: FlowedMixture, x):
    """``log p_t(x)`` via log-sum-exp over components."""
    logs, _, _ = _component_log_terms(fm, x)
    return logsumexp(logs, axis=0)


def density(fm: FlowedMixture, x):
    """``p_t(x) = sum_i w_i phi(x; m_i, v_i + t)``."""
    out = np.exp(log_density(fm, x))
    return float(out) if np.ndim(out) == 0 else out


def x_derivative_ratios(fm: FlowedMixture, x, n: int):
    """``(d/dx)^j p / p`` for ``j = 0..n``, stacked on axis 0.

    Components are weighted by their posterior responsibilities, which keeps
    the ratios finite where ``p`` itself underflows.
    """
    logs, z, s = _component_log_terms(fm, x)
    resp = np.exp(logs - logsumexp(logs, axis=0))
    he = hermite_he(n, z)
    out = np.empty((n + 1,) + np.shape(x), dtype=he.dtype)
    for j in range(n + 1):
        out[j] = np.sum(resp * he[j] * (-1.0 / s) ** j, axis=0)
    return out


def t_derivative_ratios(fm: FlowedMixture, x, k: int):
    """``(d/dt)^j p / p = 2^{-j} (d/dx)^{2j} p / p`` for ``j = 0..k``."""
    xr = x_derivative_ratios(fm, x, 2 * k)
    return np.stack([xr[2 * j] * 0.5**j for j in range(k + 1)])


def density_x_derivative(fm: FlowedMixture, x, n: int):
    """``(d/dx)^n p_t(x)`` from ``(-1)^n s^{-n} He_n((x-m)/s) phi``."""
    logs, z, s = _component_log_terms(fm, x)
    he = hermite_he(n, z)[n]
    out = np.sum(np.exp(logs) * he * (-1.0 / s) ** n, axis=0)
    return float(out) if np.ndim(out) == 0 else out


def density_t_derivative(fm: FlowedMixture, x, k: int):
    """``(d/dt)^k p_t(x)``; the heat equation turns it into ``2^{-k} (d/dx)^{2k} p``."""
    return 0.5**k * density_x_derivative(fm, x, 2 * k)


def moments(spec: MixtureSpec) -> Tuple[float, float]:
    """Mean and variance of the mixture."""
    w = np.asarray(spec.weights)
    m = np.asarray(spec.means)
    v = np.asarray(spec.variances)
    mean = float(np.dot(w, m))
    # centered form of sum w (v + m^2) - mean^2; no cancellation for large means
    var = float(np.dot(w, v + (m - mean) ** 2))
    return mean, var
