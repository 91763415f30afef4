"""Conjecture predicates along the heat flow and the EP => McKean chain.

For each time ``t`` and order ``m`` a cell records

* ``ep_value  = (-1)^{m-1} d^m N/dt^m``                 (entropy power),
* ``gcm_value = (-1)^{m-1} ydot^{(m-1)}``                (completely monotone),
* ``mck_bound = (m-1)! / sigma_t^{2m}`` and ``mck_slack = gcm_value - mck_bound``.

A predicate passes when its value is at least minus its error estimate. A value
below that is a *violation candidate*: evidence worth re-running at tighter
tolerance, never a refutation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bell import Lemma1Report, bell_complete_all, binomial_row, faa_di_bruno_exp, lemma1_check, sign_flip
from .functionals import (
    M_MAX,
    EntropyCurveSampler,
    FlowFunctionals,
    QuadratureConfig,
    entropy,
    fisher_information,
    flow_functionals,
)
from .mixture import MixtureSpec, moments
from .tderiv import best_spectral_derivative, candidate_degrees, fit_family, trusted_interval

__all__ = [
    "METHODS",
    "DEFAULT_M",
    "CRAMER_RAO_TOL",
    "default_t_grid",
    "ConjectureCell",
    "ConjectureReport",
    "PropositionStep",
    "PropositionReport",
    "ConsistencyError",
    "PropositionChainError",
    "evaluate_conjectures",
    "verify_proposition_chain",
    "spectral_values",
]

METHODS = ("analytic", "spectral", "both")
DEFAULT_M = 4
CRAMER_RAO_TOL = 1e-9
_EPS = float(np.finfo(float).eps)


class ConsistencyError(AssertionError):
    """Analytic and spectral values disagree beyond their combined error."""


class PropositionChainError(AssertionError):
    """The sign identity or the EP => McKean chain failed on computed data."""


def default_t_grid() -> Tuple[float, ...]:
    """16 log-spaced times in ``[0.05, 5]``."""
    return tuple(float(t) for t in np.geomspace(0.05, 5.0, 16))


def _bell_error(scale: float, X: Sequence[float], X_err: Sequence[float], m: int, y_err: float) -> float:
    """First-order error bound for ``scale * B_m(X)`` with ``scale = exp(y)``.

    Uses ``dB_m/dX_k = C(m, k) B_{m-k}``; adds a roundoff term on ``B_m(|X|)``.
    """
    B = bell_complete_all(X, m)
    row = binomial_row(m)
    linear = sum(row[k] * abs(B[m - k]) * X_err[k - 1] for k in range(1, m + 1))
    roundoff = 8 * m * _EPS * bell_complete_all([abs(x) for x in X], m)[m]
    return scale * (linear + roundoff + abs(B[m]) * y_err)


@dataclass(frozen=True)
class ConjectureCell:
    t: float
    m: int
    sigma_t2: float
    method: str
    ep_value: float = math.nan
    ep_err: float = math.nan
    gcm_value: float = math.nan
    gcm_err: float = math.nan
    mck_bound: float = math.nan
    ep_spectral: Optional[float] = None
    ep_spectral_err: Optional[float] = None
    gcm_spectral: Optional[float] = None
    gcm_spectral_err: Optional[float] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def mck_slack(self) -> float:
        return self.gcm_value - self.mck_bound

    @property
    def ep_ok(self) -> bool:
        return not self.failed and self.ep_value >= -self.ep_err

    @property
    def gcm_ok(self) -> bool:
        return not self.failed and self.gcm_value >= -self.gcm_err

    @property
    def mck_ok(self) -> bool:
        return not self.failed and self.mck_slack >= -self.gcm_err

    @property
    def violation_candidate(self) -> bool:
        return not self.failed and not (self.ep_ok and self.gcm_ok and self.mck_ok)

    @property
    def consistent(self) -> Optional[bool]:
        """Analytic vs spectral agreement; ``None`` unless both were computed."""
        if self.method != "both" or self.failed:
            return None
        ok_ep = abs(self.ep_value - self.ep_spectral) <= self.ep_err + self.ep_spectral_err
        ok_gcm = abs(self.gcm_value - self.gcm_spectral) <= self.gcm_err + self.gcm_spectral_err
        return ok_ep and ok_gcm

    @property
    def ydot_derivative(self) -> float:
        """``ydot^{(m-1)}`` recovered from the sign convention of ``gcm_value``."""
        return self.gcm_value if self.m % 2 else -self.gcm_value

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(
            mck_slack=self.mck_slack,
            ep_ok=self.ep_ok,
            gcm_ok=self.gcm_ok,
            mck_ok=self.mck_ok,
            violation_candidate=self.violation_candidate,
            consistent=self.consistent,
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConjectureCell":
        names = {f.name for f in fields(cls)}
        return cls(**{k: (math.nan if v is None and k in _NAN_FIELDS else v) for k, v in d.items() if k in names})


_NAN_FIELDS = {"ep_value", "ep_err", "gcm_value", "gcm_err", "mck_bound"}


@dataclass(frozen=True)
class TimePoint:
    """Per-time data shared by the cells at ``t``."""

    t: float
    sigma_t2: float
    H: float = math.nan
    I: float = math.nan
    y: float = math.nan
    H_err: float = math.nan
    y_err: float = math.nan
    derivs: Tuple[float, ...] = ()
    derivs_err: Tuple[float, ...] = ()
    error: Optional[str] = None

    @property
    def y_dot(self) -> float:
        return self.I

    @property
    def entropy_power(self) -> float:
        return math.exp(self.y)

    @property
    def cramer_rao_ratio(self) -> float:
        """``ydot * sigma_t^2``; at least 1, with equality only for Gaussians."""
        return self.I * self.sigma_t2


@dataclass(frozen=True)
class ConjectureReport:
    spec: MixtureSpec
    sigma2: float
    t_grid: Tuple[float, ...]
    M: int
    method: str
    cfg: QuadratureConfig
    points: Tuple[TimePoint, ...]
    cells: Tuple[ConjectureCell, ...]
    coverage: str = "grid-only"

    def cell(self, t: float, m: int) -> ConjectureCell:
        for c in self.cells:
            if c.t == t and c.m == m:
                return c
        raise KeyError((t, m))

    def cells_at(self, t: float) -> List[ConjectureCell]:
        return [c for c in self.cells if c.t == t]

    @property
    def failures(self) -> Dict[float, str]:
        return {p.t: p.error for p in self.points if p.error is not None}

    @property
    def violation_candidates(self) -> List[ConjectureCell]:
        return [c for c in self.cells if c.violation_candidate]

    @property
    def inconsistent_cells(self) -> List[ConjectureCell]:
        return [c for c in self.cells if c.consistent is False]

    @property
    def cramer_rao_failures(self) -> List[TimePoint]:
        return [p for p in self.points if p.error is None and not math.isnan(p.I)
                and p.cramer_rao_ratio < 1 - CRAMER_RAO_TOL]

    @property
    def all_ok(self) -> bool:
        return not self.failures and all(c.ep_ok and c.gcm_ok and c.mck_ok for c in self.cells)

    def to_dict(self) -> dict:
        return {
            "spec": {
                "weights": list(self.spec.weights),
                "means": list(self.spec.means),
                "variances": list(self.spec.variances),
            },
            "sigma2": self.sigma2,
            "t_grid": list(self.t_grid),
            "M": self.M,
            "method": self.method,
            "quadrature": asdict(self.cfg),
            "coverage": self.coverage,
            "points": [
                dict(asdict(p), cramer_rao_ratio=None if math.isnan(p.I) else p.cramer_rao_ratio)
                for p in self.points
            ],
            "cells": [c.to_dict() for c in self.cells],
            "summary": {
                "all_ok": self.all_ok,
                "violation_candidates": len(self.violation_candidates),
                "inconsistent_cells": len(self.inconsistent_cells),
                "failed_times": len(self.failures),
                "cramer_rao_failures": len(self.cramer_rao_failures),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConjectureReport":
        point_names = {f.name for f in fields(TimePoint)}
        points = []
        for p in d["points"]:
            p = {k: v for k, v in p.items() if k in point_names}
            for k in ("H", "I", "y", "H_err", "y_err"):
                if p.get(k) is None:
                    p[k] = math.nan
            p["derivs"] = tuple(p.get("derivs", ()))
            p["derivs_err"] = tuple(p.get("derivs_err", ()))
            points.append(TimePoint(**p))
        spec = d["spec"]
        return cls(
            spec=MixtureSpec(tuple(spec["weights"]), tuple(spec["means"]), tuple(spec["variances"])),
            sigma2=d["sigma2"],
            t_grid=tuple(d["t_grid"]),
            M=d["M"],
            method=d["method"],
            cfg=QuadratureConfig(**d["quadrature"]),
            points=tuple(points),
            cells=tuple(ConjectureCell.from_dict(c) for c in d["cells"]),
            coverage=d.get("coverage", "grid-only"),
        )


def spectral_window(spec: MixtureSpec, t: float) -> Tuple[float, float]:
    """Sampling interval for the spectral oracle at ``t``.

    ``H`` is analytic in ``t > -min(variances)``; a half-width of half the
    distance to that point, capped at 1, keeps Chebyshev coefficients decaying
    fast at moderate degree.
    """
    half_width = min(1.0, 0.5 * (t + min(spec.variances)))
    return trusted_interval(t, half_width)


def spectral_values(spec: MixtureSpec, t: float, M: int, cfg: QuadratureConfig = QuadratureConfig()):
    """Spectral estimates of ``d^m N/dt^m`` and ``ydot^{(m-1)}`` for ``m = 1..M``.

    Returns ``(N_derivs, N_errs, ydot_derivs, ydot_errs)``. A few fits of
    different degree share the sampled curve, and each order takes the fit
    with the smallest error estimate.
    """
    lo, hi = spectral_window(spec, t)
    sampler = EntropyCurveSampler(spec, lo, hi, cfg)
    degrees = candidate_degrees(M)
    n_curves = fit_family(sampler.entropy_power, (lo, hi), degrees)
    h_curves = fit_family(sampler.entropy, (lo, hi), degrees)
    n_d, n_e, y_d, y_e = [], [], [], []
    for m in range(1, M + 1):
        v, e, _ = best_spectral_derivative(n_curves, m, t)
        n_d.append(v)
        n_e.append(e)
        v, e, _ = best_spectral_derivative(h_curves, m, t)
        y_d.append(-2.0 * v)
        y_e.append(2.0 * e)
    return n_d, n_e, y_d, y_e


def _analytic_point(spec, t, M, cfg, sigma_t2) -> Tuple[TimePoint, FlowFunctionals]:
    ff = flow_functionals(spec.at(t), M, cfg)
    point = TimePoint(
        t=t,
        sigma_t2=sigma_t2,
        H=ff.H,
        I=ff.I,
        y=ff.y,
        H_err=ff.H_err,
        y_err=2.0 * ff.H_err,
        derivs=ff.derivs,
        derivs_err=ff.derivs_err,
    )
    return point, ff


def _evaluate_time(spec, t, M, cfg, method, sigma2):
    sigma_t2 = sigma2 + t
    point = None
    analytic = None
    spectral = None
    try:
        if method in ("analytic", "both"):
            point, _ = _analytic_point(spec, t, M, cfg, sigma_t2)
            analytic = []
            for m in range(1, M + 1):
                sign = 1 if m % 2 else -1
                ep = sign * faa_di_bruno_exp(point.y, point.derivs, m)
                ep_err = _bell_error(point.entropy_power, point.derivs, point.derivs_err, m, point.y_err)
                gcm = sign * point.derivs[m - 1]
                gcm_err = point.derivs_err[m - 1] + 4 * _EPS * abs(gcm)
                analytic.append((ep, ep_err, gcm, gcm_err))
        if method in ("spectral", "both"):
            n_d, n_e, y_d, y_e = spectral_values(spec, t, M, cfg)
            spectral = []
            for m in range(1, M + 1):
                sign = 1 if m % 2 else -1
                spectral.append((sign * n_d[m - 1], n_e[m - 1], sign * y_d[m - 1], y_e[m - 1]))
            if point is None:
                fm = spec.at(t)
                H, H_err = entropy(fm, cfg)
                I, _ = fisher_information(fm, cfg)
                point = TimePoint(
                    t=t, sigma_t2=sigma_t2, H=H, I=I, y=-2.0 * H, H_err=H_err, y_err=2.0 * H_err,
                    derivs=tuple(y_d), derivs_err=tuple(y_e),
                )
    except (ArithmeticError, ValueError) as exc:
        point = TimePoint(t=t, sigma_t2=sigma_t2, error=f"{type(exc).__name__}: {exc}")
        cells = tuple(
            ConjectureCell(t=t, m=m, sigma_t2=sigma_t2, method=method, error=point.error) for m in range(1, M + 1)
        )
        return point, cells

    cells = []
    for m in range(1, M + 1):
        bound = math.factorial(m - 1) / sigma_t2**m
        kw = dict(t=t, m=m, sigma_t2=sigma_t2, method=method, mck_bound=bound)
        if analytic is not None:
            ep, ep_err, gcm, gcm_err = analytic[m - 1]
        else:
            ep, ep_err, gcm, gcm_err = spectral[m - 1]
        kw.update(ep_value=ep, ep_err=ep_err, gcm_value=gcm, gcm_err=gcm_err)
        if spectral is not None:
            s_ep, s_ep_err, s_gcm, s_gcm_err = spectral[m - 1]
            kw.update(ep_spectral=s_ep, ep_spectral_err=s_ep_err, gcm_spectral=s_gcm, gcm_spectral_err=s_gcm_err)
        cells.append(ConjectureCell(**kw))
    return point, tuple(cells)


def evaluate_conjectures(
    spec: MixtureSpec,
    t_grid: Optional[Sequence[float]] = None,
    M: int = DEFAULT_M,
    cfg: QuadratureConfig = QuadratureConfig(),
    method: str = "both",
) -> ConjectureReport:
    """Evaluate EP, GCM and McKean at every ``(t, m)`` of the grid.

    The analytic route builds ``d^m N/dt^m`` as ``exp(y) B_m(ydot, ydot', ...)``
    from derivatives taken under the integral sign; the spectral route
    differentiates sampled ``N(t)`` and ``H(t)``. With ``method="both"`` the
    analytic numbers are reported and each cell records the spectral
    cross-check. A failure at one time is recorded on that time's cells.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if not 1 <= M <= M_MAX:
        raise ValueError(f"M must be in 1..{M_MAX}, got {M}")
    grid = default_t_grid() if t_grid is None else tuple(float(t) for t in t_grid)
    if not grid or any(t <= 0 for t in grid):
        raise ValueError("t_grid must be nonempty and strictly positive")
    if list(grid) != sorted(grid):
        raise ValueError("t_grid must be sorted")
    sigma2 = moments(spec)[1]
    points, cells = [], []
    for t in grid:
        point, row = _evaluate_time(spec, t, M, cfg, method, sigma2)
        points.append(point)
        cells.extend(row)
    return ConjectureReport(
        spec=spec,
        sigma2=sigma2,
        t_grid=grid,
        M=M,
        method=method,
        cfg=cfg,
        points=tuple(points),
        cells=tuple(cells),
    )


@dataclass(frozen=True)
class PropositionStep:
    """The proof chain replayed at one time ``t``.

    ``identity_residuals[m-1]`` compares ``(-1)^{m-1} d^mN/dt^m`` with
    ``-exp(y) B_m(Y)``; ``intermediate_margins`` are
    ``(-1)^{m-1} ydot^{(m-1)} - (m-1)! ydot^m`` and ``mck_margins`` are
    ``(m-1)! ydot^m - (m-1)!/sigma_t^{2m}``.
    """

    t: float
    Y: Tuple[float, ...]
    identity_residuals: Tuple[float, ...]
    identity_tols: Tuple[float, ...]
    lemma: Lemma1Report
    ep_holds: bool
    intermediate_margins: Tuple[float, ...]
    mck_margins: Tuple[float, ...]
    tols: Tuple[float, ...]

    @property
    def identity_ok(self) -> bool:
        return all(abs(r) <= e for r, e in zip(self.identity_residuals, self.identity_tols))

    @property
    def non_vacuous(self) -> bool:
        return self.ep_holds

    @property
    def chain_holds(self) -> bool:
        return all(a >= -e for a, e in zip(self.intermediate_margins, self.tols)) and all(
            b >= -e for b, e in zip(self.mck_margins, self.tols)
        )

    @property
    def satisfied(self) -> bool:
        """The implication EP => McK holds here (vacuously when EP fails)."""
        return not self.ep_holds or (self.chain_holds and self.lemma.implication_holds)


@dataclass(frozen=True)
class PropositionReport:
    M: int
    steps: Tuple[PropositionStep, ...]
    skipped: Tuple[float, ...] = ()

    @property
    def all_satisfied(self) -> bool:
        return all(s.satisfied for s in self.steps)

    @property
    def all_non_vacuous(self) -> bool:
        return not self.skipped and all(s.non_vacuous for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "all_satisfied": self.all_satisfied,
            "all_non_vacuous": self.all_non_vacuous,
            "skipped_times": list(self.skipped),
            "steps": [
                {
                    "t": s.t,
                    "Y": list(s.Y),
                    "identity_ok": s.identity_ok,
                    "identity_residuals": list(s.identity_residuals),
                    "lemma_premises": list(s.lemma.premise_holds),
                    "lemma_conclusions": list(s.lemma.conclusion_holds),
                    "lemma_implication_holds": s.lemma.implication_holds,
                    "ep_holds": s.ep_holds,
                    "intermediate_margins": list(s.intermediate_margins),
                    "mck_margins": list(s.mck_margins),
                    "satisfied": s.satisfied,
                    "non_vacuous": s.non_vacuous,
                }
                for s in self.steps
            ],
        }


def _chain_step(t, y, y_err, derivs, derivs_err, ep_values, ep_errs, sigma_t2, M) -> PropositionStep:
    Y = sign_flip(derivs[:M])
    scale = math.exp(y)
    residuals, id_tols = [], []
    for m in range(1, M + 1):
        rhs = -scale * bell_complete_all(Y, m)[m]
        residuals.append(ep_values[m - 1] - rhs)
        id_tols.append(ep_errs[m - 1] + _bell_error(scale, Y, derivs_err, m, y_err))
    # tolerance on B_m(Y) and on the lemma's conclusion margins, per order
    ydot, ydot_err = derivs[0], derivs_err[0]
    tols = []
    for m in range(1, M + 1):
        bell_tol = _bell_error(1.0, Y, derivs_err, m, 0.0)
        power_tol = math.factorial(m - 1) * m * abs(ydot) ** (m - 1) * ydot_err
        tols.append(bell_tol + power_tol + derivs_err[m - 1] + 8 * _EPS * math.factorial(m - 1) * abs(ydot) ** m)
    lemma = lemma1_check(list(Y), M, tol=tols)
    intermediate, mck = [], []
    for m in range(1, M + 1):
        lhs = (-1) ** (m - 1) * derivs[m - 1]
        middle = math.factorial(m - 1) * ydot**m
        intermediate.append(lhs - middle)
        mck.append(middle - math.factorial(m - 1) / sigma_t2**m)
    ep_holds = all(v >= -e for v, e in zip(ep_values, ep_errs)) and lemma.all_premises
    return PropositionStep(
        t=t,
        Y=tuple(Y),
        identity_residuals=tuple(residuals),
        identity_tols=tuple(id_tols),
        lemma=lemma,
        ep_holds=ep_holds,
        intermediate_margins=tuple(intermediate),
        mck_margins=tuple(mck),
        tols=tuple(tols),
    )


def verify_proposition_chain(report: ConjectureReport, M: Optional[int] = None) -> PropositionReport:
    """Replay the EP => McKean argument on every time of ``report``.

    At each ``t``: check ``(-1)^{m-1} d^mN/dt^m = -exp(y) B_m(Y)`` with
    ``Y_k = (-1)^k ydot^{(k-1)}``, run the Bell inequality lemma on ``Y``, and
    where all EP premises hold confirm
    ``(-1)^{m-1} ydot^{(m-1)} >= (m-1)! ydot^m >= (m-1)!/sigma_t^{2m}``.

    Raises:
        PropositionChainError: the identity fails beyond tolerance, or EP holds
            while the chain breaks. Either points at a bug, not at mathematics.
    """
    M = report.M if M is None else M
    if M > report.M:
        raise ValueError(f"report only has orders up to {report.M}")
    steps, skipped = [], []
    for point in report.points:
        if point.error is not None:
            skipped.append(point.t)
            continue
        cells = sorted(report.cells_at(point.t), key=lambda c: c.m)[:M]
        step = _chain_step(
            point.t,
            point.y,
            point.y_err,
            point.derivs,
            point.derivs_err,
            [c.ep_value for c in cells],
            [c.ep_err for c in cells],
            point.sigma_t2,
            M,
        )
        if not step.identity_ok:
            worst = max(range(M), key=lambda i: abs(step.identity_residuals[i]) / step.identity_tols[i])
            raise PropositionChainError(
                f"sign identity fails at t={point.t}, m={worst + 1}: residual "
                f"{step.identity_residuals[worst]:.3g} > tolerance {step.identity_tols[worst]:.3g}"
            )
        if step.ep_holds and not step.satisfied:
            raise PropositionChainError(f"EP holds at t={point.t} but the McKean chain breaks")
        steps.append(step)
    return PropositionReport(M=M, steps=tuple(steps), skipped=tuple(skipped))
