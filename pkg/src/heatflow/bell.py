"""Complete exponential Bell polynomials and the manipulations built on them.

Every routine here is written against plain Python arithmetic so the same code
runs on :class:`fractions.Fraction` (exact) and ``float`` (numeric pipeline)
payloads. Sequences are ordinary Python sequences read with 1-based meaning:
``seq[0]`` holds ``X_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Number
from typing import Iterator, List, Sequence, Tuple

__all__ = [
    "RealSequence",
    "SignFlippedSequence",
    "Lemma1Report",
    "Lemma1Violation",
    "PARTITION_ORACLE_LIMIT",
    "binomial_row",
    "bell_complete_all",
    "bell_complete",
    "bell_partition_oracle",
    "set_partitions",
    "bell_scale",
    "sign_flip",
    "faa_di_bruno_exp",
    "log_derivatives_from_function_derivatives",
    "lemma1_check",
]

RealSequence = Sequence[Number]

PARTITION_ORACLE_LIMIT = 12
FLOAT_LEMMA_TOL = 1e-9


class Lemma1Violation(AssertionError):
    """Premises of the Bell inequality lemma hold but a conclusion fails in exact arithmetic."""


class SignFlippedSequence(tuple):
    """``Y_k = (-1)^k * ydot^{(k-1)}``; build it with :func:`sign_flip`."""

    __slots__ = ()

    def source(self) -> tuple:
        """Recover the derivative sequence the values were flipped from."""
        return tuple(-v if k % 2 else v for k, v in enumerate(self, start=1))


@lru_cache(maxsize=None)
def binomial_row(n: int) -> Tuple[int, ...]:
    """Row ``n`` of Pascal's triangle as exact integers."""
    if n < 0:
        raise ValueError(f"binomial row index must be nonnegative, got {n}")
    if n == 0:
        return (1,)
    prev = binomial_row(n - 1)
    return (1,) + tuple(prev[i] + prev[i + 1] for i in range(n - 1)) + (1,)


def _one_like(seq: RealSequence):
    # keep exact payloads exact: B_0 takes the type of the data
    for v in seq:
        if isinstance(v, float):
            return 1.0
        if isinstance(v, Fraction):
            return Fraction(1)
    return 1


def bell_complete_all(seq: RealSequence, n_max: int) -> List:
    """Return ``[B_0, B_1, ..., B_{n_max}]`` evaluated at ``seq``.

    Uses ``B_{n+1} = sum_{i=0}^{n} C(n, i) B_{n-i} X_{i+1}`` with integer
    binomials, so rational input gives exact output.

    Raises:
        ValueError: if ``n_max`` is negative or exceeds ``len(seq)``.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be nonnegative, got {n_max}")
    if n_max > len(seq):
        raise ValueError(
            f"B_{n_max} needs {n_max} arguments but the sequence has {len(seq)}"
        )
    out = [_one_like(seq)]
    for n in range(n_max):
        row = binomial_row(n)
        acc = 0
        for i in range(n + 1):
            acc += row[i] * out[n - i] * seq[i]
        out.append(acc)
    return out


def bell_complete(seq: RealSequence, n: int):
    """Single value ``B_n(seq)``."""
    return bell_complete_all(seq, n)[n]


def set_partitions(n: int) -> Iterator[List[List[int]]]:
    """Yield every set partition of ``{1..n}`` (restricted growth strings)."""
    if n == 0:
        yield []
        return
    labels = [0] * n
    maxima = [0] * n

    def emit():
        blocks: List[List[int]] = [[] for _ in range(max(labels) + 1)]
        for element, label in enumerate(labels, start=1):
            blocks[label].append(element)
        return blocks

    while True:
        yield emit()
        # advance the restricted growth string: labels[i] <= 1 + max(labels[:i])
        i = n - 1
        while i > 0 and labels[i] == maxima[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        maxima[i] = max(maxima[i - 1], labels[i])
        for j in range(i + 1, n):
            labels[j] = 0
            maxima[j] = maxima[i]


@lru_cache(maxsize=None)
def _block_size_tally(n: int) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    # each set partition contributes prod X_{|b|}, which depends only on the
    # sorted block sizes; count partitions per size signature by enumeration
    tally: dict = {}
    for blocks in set_partitions(n):
        key = tuple(sorted(len(b) for b in blocks))
        tally[key] = tally.get(key, 0) + 1
    return tuple(sorted(tally.items()))


def bell_partition_oracle(seq: RealSequence, n: int):
    """``B_n`` as a sum over set partitions: test oracle only.

    Partitions are enumerated once per ``n`` and grouped by block sizes, so
    repeated calls only pay for the products.

    Raises:
        ValueError: if ``n`` exceeds the enumeration guard or the sequence length.
    """
    if n > PARTITION_ORACLE_LIMIT:
        raise ValueError(
            f"partition oracle refuses n={n} > {PARTITION_ORACLE_LIMIT}; "
            "use bell_complete_all outside of tests"
        )
    if n > len(seq):
        raise ValueError(f"B_{n} needs {n} arguments but the sequence has {len(seq)}")
    total = 0 * _one_like(seq)
    for sizes, count in _block_size_tally(n):
        term = _one_like(seq)
        for size in sizes:
            term = term * seq[size - 1]
        total += count * term
    return total


def bell_scale(seq: RealSequence, beta) -> tuple:
    """Return ``(beta X_1, beta^2 X_2, ..., beta^n X_n)``."""
    out = []
    power = beta
    for x in seq:
        out.append(power * x)
        power = power * beta
    return tuple(out)


def sign_flip(derivs: RealSequence) -> SignFlippedSequence:
    """Map ``(ydot, ydot', ydot'', ...)`` to ``Y_k = (-1)^k ydot^{(k-1)}``."""
    return SignFlippedSequence(-v if k % 2 else v for k, v in enumerate(derivs, start=1))


def faa_di_bruno_exp(y_value, derivs: RealSequence, m: int):
    """``d^m/dt^m exp(y(t)) = exp(y) * B_m(y', y'', ...)``.

    ``derivs`` starts at the first derivative of ``y``. An exact ``y_value`` of
    zero keeps rational input exact.
    """
    if m > len(derivs):
        raise ValueError(f"order {m} needs {m} derivatives, got {len(derivs)}")
    scale = 1 if (y_value == 0 and not isinstance(y_value, float)) else math.exp(y_value)
    return scale * bell_complete_all(derivs, m)[m]


def log_derivatives_from_function_derivatives(p_derivs: RealSequence, n: int) -> list:
    """Derivatives ``f', ..., f^{(n)}`` of ``f = log p`` from ``p, p', ..., p^{(n)}``.

    Inverts ``p^{(n)} = sum_{k=0}^{n-1} C(n-1, k) p^{(k)} f^{(n-k)}``. The
    recursion is homogeneous in ``p``, so callers may pass derivatives already
    divided by ``p``.

    Raises:
        ValueError: if ``p <= 0`` or fewer than ``n + 1`` entries are given.
    """
    if n > len(p_derivs) - 1:
        raise ValueError(f"order {n} needs {n + 1} entries, got {len(p_derivs)}")
    p = p_derivs[0]
    positive = p > 0
    # elementwise use: numpy arrays of evaluation points are accepted
    if not (positive.all() if hasattr(positive, "all") else positive):
        raise ValueError(f"log-derivative needs p > 0, got p = {p}")
    f: list = [None]  # f[j] holds f^{(j)}; index 0 unused
    for order in range(1, n + 1):
        row = binomial_row(order - 1)
        acc = p_derivs[order]
        for k in range(1, order):
            acc = acc - row[k] * p_derivs[k] * f[order - k]
        f.append(acc / p)
    return f[1:]


@dataclass(frozen=True)
class Lemma1Report:
    """Outcome of checking the Bell inequality lemma on one sequence.

    ``premise_margins[n-1] = -B_n(Y)`` and
    ``conclusion_margins[n-1] = -(n-1)! (-Y_1)^n - Y_n``; a flag holds when its
    margin is at least ``-tol[n-1]``.
    """

    premise_holds: Tuple[bool, ...]
    conclusion_holds: Tuple[bool, ...]
    premise_margins: tuple
    conclusion_margins: tuple
    tol: tuple
    exact: bool
    implication_holds: bool = field(init=False)
    vacuous: bool = field(init=False)

    def __post_init__(self):
        ok = True
        for n in range(1, len(self.premise_holds) + 1):
            if all(self.premise_holds[:n]) and not self.conclusion_holds[n - 1]:
                ok = False
        object.__setattr__(self, "implication_holds", ok)
        object.__setattr__(self, "vacuous", not all(self.premise_holds))

    @property
    def all_premises(self) -> bool:
        return all(self.premise_holds)


def lemma1_check(Y: RealSequence, N: int, tol=None) -> Lemma1Report:
    """Check ``B_n(Y) <= 0 for n <= N  =>  Y_n <= -(n-1)! (-Y_1)^n``.

    The implication is tested on every prefix: if the premises hold for all
    ``j <= n`` then conclusion ``n`` must hold. ``tol`` is a scalar or one
    value per order; it defaults to 0 for exact input and ``1e-9`` for floats.

    Raises:
        Lemma1Violation: exact input whose premises hold while a conclusion fails.
    """
    if N > len(Y):
        raise ValueError(f"N={N} exceeds sequence length {len(Y)}")
    exact = not any(isinstance(v, float) for v in Y[:N])
    if tol is None:
        tol = 0 if exact else FLOAT_LEMMA_TOL
    tols = tuple(tol) if isinstance(tol, Sequence) else (tol,) * N
    if len(tols) != N:
        raise ValueError(f"expected {N} tolerances, got {len(tols)}")
    B = bell_complete_all(Y[:N], N)
    premise_margins = tuple(-B[n] for n in range(1, N + 1))
    conclusion_margins = tuple(
        -math.factorial(n - 1) * (-Y[0]) ** n - Y[n - 1] for n in range(1, N + 1)
    )
    report = Lemma1Report(
        premise_holds=tuple(m >= -e for m, e in zip(premise_margins, tols)),
        conclusion_holds=tuple(m >= -e for m, e in zip(conclusion_margins, tols)),
        premise_margins=premise_margins,
        conclusion_margins=conclusion_margins,
        tol=tols,
        exact=exact,
    )
    if exact and not report.implication_holds:
        raise Lemma1Violation(f"lemma premises hold but a conclusion fails for Y={tuple(Y[:N])}")
    return report
