"""Command-line front end: mixture file in, conjecture report and CSV tables out.

Mixture files are YAML (JSON is also valid YAML)::

    name: symmetric-bimodal        # optional
    components:
      - {weight: 0.5, mean: -2.0, variance: 1.0}
      - {weight: 0.5, mean: 2.0, variance: 1.0}

``w`` and ``var`` are accepted as short keys. Weights summing to within 1e-3
of one are renormalized with a warning; anything further off is rejected.

Exit status: 0 when every cell passes, 2 when some cell is a violation
candidate, 1 on any error or hard failure (method disagreement, a broken
proof chain, a Cramer-Rao failure, or no time evaluated at all).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import yaml

from .conjectures import (
    DEFAULT_M,
    METHODS,
    ConjectureReport,
    PropositionChainError,
    evaluate_conjectures,
    verify_proposition_chain,
)
from .functionals import M_MAX, QuadratureConfig
from .mixture import MixtureSpec

__all__ = [
    "SpecFileError",
    "RunConfig",
    "load_mixture_spec",
    "parse_t_grid",
    "run",
    "main",
    "EXIT_OK",
    "EXIT_ERROR",
    "EXIT_VIOLATION",
]

log = logging.getLogger("heatflow")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2
WEIGHT_RENORMALIZE_TOL = 1e-3
SAFE_ORDER = 4
CSV_DIGITS = 12

_KEYS = {
    "weight": ("weight", "w"),
    "mean": ("mean", "mu", "m"),
    "variance": ("variance", "var", "v"),
}


class SpecFileError(ValueError):
    """The mixture file is unreadable or describes an invalid mixture."""


def _field(comp: dict, name: str, index: int) -> float:
    for key in _KEYS[name]:
        if key in comp:
            value = comp[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SpecFileError(f"component {index}: {name} must be a number, got {value!r}")
            return float(value)
    raise SpecFileError(f"component {index}: missing {name}")


def load_mixture_spec(path) -> MixtureSpec:
    """Read and validate a mixture file.

    Raises:
        SpecFileError: malformed document, bad component, or weights too far from 1.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = yaml.safe_load(handle)
    except OSError as exc:
        raise SpecFileError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise SpecFileError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict) or "components" not in doc:
        raise SpecFileError(f"{path}: expected a mapping with a 'components' list")
    comps = doc["components"]
    if not isinstance(comps, list) or not comps:
        raise SpecFileError(f"{path}: 'components' must be a nonempty list")
    triples = []
    for i, comp in enumerate(comps):
        if not isinstance(comp, dict):
            raise SpecFileError(f"component {i}: expected a mapping, got {comp!r}")
        w, m, v = (_field(comp, k, i) for k in ("weight", "mean", "variance"))
        if not (math.isfinite(w) and w > 0):
            raise SpecFileError(f"component {i}: weight must be positive, got {w}")
        if not math.isfinite(m):
            raise SpecFileError(f"component {i}: mean must be finite, got {m}")
        if not (math.isfinite(v) and v > 0):
            raise SpecFileError(f"component {i}: variance must be positive, got {v}")
        triples.append((w, m, v))
    total = math.fsum(w for w, _, _ in triples)
    if abs(total - 1.0) > WEIGHT_RENORMALIZE_TOL:
        raise SpecFileError(f"{path}: weights sum to {total}, more than {WEIGHT_RENORMALIZE_TOL:g} away from 1")
    if abs(total - 1.0) > 1e-12:
        log.warning("weights sum to %.12g; renormalizing", total)
    return MixtureSpec.from_components(triples)


def parse_t_grid(text: str) -> Tuple[float, ...]:
    """``log:COUNT:LO:HI`` (log-spaced, inclusive) or ``list:T1,T2,...``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "log":
            count, lo, hi = rest.split(":")
            count, lo, hi = int(count), float(lo), float(hi)
            if count < 1 or not 0 < lo <= hi:
                raise ValueError
            grid = tuple(float(t) for t in np.geomspace(lo, hi, count))
        elif kind == "list":
            grid = tuple(sorted(float(t) for t in rest.split(",") if t.strip()))
        else:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad t-grid {text!r}; use 'log:16:0.05:5' or 'list:0.1,0.5,1'") from None
    if not grid or any(not (t > 0 and math.isfinite(t)) for t in grid):
        raise ValueError(f"t-grid must be nonempty and strictly positive, got {text!r}")
    return grid


@dataclass
class RunConfig:
    input: str
    out: str
    order: int = DEFAULT_M
    t_grid: Tuple[float, ...] = field(default_factory=lambda: parse_t_grid("log:16:0.05:5"))
    method: str = "both"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    allow_high_order: bool = False

    def validate(self):
        limit = M_MAX if self.allow_high_order else SAFE_ORDER
        if not 1 <= self.order <= limit:
            hint = "" if self.allow_high_order else " (use --allow-high-order for up to 6)"
            raise ValueError(f"order must be in 1..{limit}{hint}, got {self.order}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.t_grid or any(t <= 0 for t in self.t_grid):
            raise ValueError("t-grid must be nonempty and positive")


def _clean(obj):
    """JSON-ready copy: NaN/inf become null, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "" if math.isnan(x) else f"{x:.{CSV_DIGITS}g}"
    return str(x)


TABLE_COLUMNS = (
    "t", "m", "method", "sigma_t2",
    "ep_value", "ep_err", "ep_ok",
    "gcm_value", "gcm_err", "gcm_ok",
    "mck_bound", "mck_slack", "mck_ok",
    "ep_spectral", "ep_spectral_err", "gcm_spectral", "gcm_spectral_err",
    "consistent", "violation_candidate", "error",
)
CURVE_COLUMNS = ("t", "H", "I", "y", "ydot", "N")


def write_outputs(report: ConjectureReport, chain, config: RunConfig, status: dict):
    os.makedirs(config.out, exist_ok=True)
    doc = {
        "config": {
            "input": os.path.basename(config.input),
            "order": config.order,
            "t_grid": list(config.t_grid),
            "method": config.method,
            "abs_tol": config.abs_tol,
            "rel_tol": config.rel_tol,
            "allow_high_order": config.allow_high_order,
        },
        "status": status,
        "report": report.to_dict(),
        "proposition": chain.to_dict() if chain is not None else None,
    }
    with open(os.path.join(config.out, "report.json"), "w", encoding="utf-8") as handle:
        json.dump(_clean(doc), handle, indent=1, sort_keys=True, allow_nan=False)
        handle.write("\n")
    with open(os.path.join(config.out, "table.csv"), "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for cell in report.cells:
            d = cell.to_dict()
            writer.writerow([_fmt(d[c]) for c in TABLE_COLUMNS])
    with open(os.path.join(config.out, "curves.csv"), "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for p in report.points:
            if p.error is not None:
                writer.writerow([_fmt(p.t)] + [""] * 5)
                continue
            writer.writerow([_fmt(v) for v in (p.t, p.H, p.I, p.y, p.y_dot, p.entropy_power)])


def load_report(path) -> ConjectureReport:
    """Rebuild the :class:`ConjectureReport` stored in a ``report.json``."""
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    return ConjectureReport.from_dict(doc["report"])


def _summary(report: ConjectureReport, chain) -> str:
    lines = [
        f"sigma^2 = {report.sigma2:.6g}, M = {report.M}, method = {report.method}, "
        f"{len(report.t_grid)} times (coverage: {report.coverage})",
        f"{'t':>9} {'m':>2} {'EP':>14} {'GCM':>14} {'McK slack':>14}  flags",
    ]
    for c in report.cells:
        if c.failed:
            lines.append(f"{c.t:9.4g} {c.m:2d}  FAILED: {c.error}")
            continue
        flags = "".join("+" if ok else "-" for ok in (c.ep_ok, c.gcm_ok, c.mck_ok))
        mark = "  VIOLATION-CANDIDATE" if c.violation_candidate else ""
        lines.append(f"{c.t:9.4g} {c.m:2d} {c.ep_value:14.6g} {c.gcm_value:14.6g} {c.mck_slack:14.6g}  {flags}{mark}")
    if chain is not None:
        lines.append(
            f"EP => McK chain: satisfied at all times = {chain.all_satisfied}, "
            f"non-vacuous at all times = {chain.all_non_vacuous}"
        )
    return "\n".join(lines)


def run(config: RunConfig, stream=None) -> int:
    """Run the whole pipeline and write ``report.json``, ``table.csv``, ``curves.csv``."""
    stream = sys.stdout if stream is None else stream
    try:
        config.validate()
        spec = load_mixture_spec(config.input)
    except (SpecFileError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    cfg = QuadratureConfig(abs_tol=config.abs_tol, rel_tol=config.rel_tol)
    report = evaluate_conjectures(spec, config.t_grid, config.order, cfg, config.method)
    hard = []
    chain = None
    try:
        chain = verify_proposition_chain(report)
    except PropositionChainError as exc:
        hard.append(f"proposition chain: {exc}")
    if report.inconsistent_cells:
        hard.append(f"{len(report.inconsistent_cells)} cell(s) where analytic and spectral values disagree")
    if report.cramer_rao_failures:
        hard.append(f"Cramer-Rao bound fails at {len(report.cramer_rao_failures)} time(s)")
    if len(report.failures) == len(report.points):
        hard.append("no time could be evaluated")
    violations = report.violation_candidates
    if hard:
        code = EXIT_ERROR
    elif violations:
        code = EXIT_VIOLATION
    else:
        code = EXIT_OK
    status = {
        "exit_code": code,
        "hard_failures": hard,
        "violation_candidates": len(violations),
        "failed_times": sorted(report.failures),
        "note": (
            "violation candidates are numerical evidence only; re-run with tighter "
            "--abs-tol/--rel-tol before drawing conclusions"
            if violations
            else ""
        ),
    }
    write_outputs(report, chain, config, status)
    print(_summary(report, chain), file=stream)
    for msg in hard:
        log.error("%s", msg)
    if violations and not hard:
        log.warning("%d violation candidate(s); see %s", len(violations), os.path.join(config.out, "report.json"))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatflow",
        description="Check the entropy power, McKean and Gaussian completely monotone "
        "inequalities along the heat flow of a 1-D Gaussian mixture.",
    )
    parser.add_argument("--input", required=True, help="mixture file (YAML or JSON)")
    parser.add_argument("--order", type=int, default=DEFAULT_M, help="highest order M (default 4)")
    parser.add_argument("--t-grid", default="log:16:0.05:5", help="'log:COUNT:LO:HI' or 'list:T1,T2,...'")
    parser.add_argument("--method", choices=METHODS, default="both")
    parser.add_argument("--abs-tol", type=float, default=1e-12)
    parser.add_argument("--rel-tol", type=float, default=1e-10)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--allow-high-order", action="store_true", help="permit --order 5 or 6")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        grid = parse_t_grid(args.t_grid)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    config = RunConfig(
        input=args.input,
        out=args.out,
        order=args.order,
        t_grid=grid,
        method=args.method,
        abs_tol=args.abs_tol,
        rel_tol=args.rel_tol,
        allow_high_order=args.allow_high_order,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
