"""Cost functions d(i, j) = |rho(i) - rho(j)| on the non-negative integers.

A cost is described by a strictly increasing profile rho tabulated a few
states past the working truncation point, together with its first and
second forward differences, its shape (convex / concave / neither), and
the increment-ratio constant m_rho = sup_i Drho(i)/Drho(i+1) that scales
the closed-form factor bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["CostRho", "make_cost", "lip_seminorm"]

_KINDS = ("linear", "power", "sqrt_case", "table")

# Shape classification tolerance, relative to the largest increment.
_SHAPE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CostRho:
    """An increasing cost profile with its difference data.

    ``values`` covers states 0..N+3 so that third differences of solutions
    indexed up to N stay computable; ``d1`` and ``d2`` are the first and
    second forward differences on 0..N+2 and 0..N+1.
    """

    kind: str
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    shape: str
    m_rho: float
    p: float | None = None  # exponent, for kind == "power" only

    @property
    def trunc_index(self) -> int:
        """The working truncation point N (values run to N+3)."""
        return len(self.values) - 4

    def distance(self, i: int, j: int) -> float:
        return float(abs(self.values[i] - self.values[j]))


def _classify_shape(d2: np.ndarray) -> str:
    tol = _SHAPE_RTOL * max(1.0, float(np.max(np.abs(d2), initial=0.0)))
    if np.all(d2 >= -tol):
        return "convex"
    if np.all(d2 <= tol):
        return "concave"
    return "neither"


def make_cost(kind: str, lam: float, N: int, p: float | None = None,
              values=None) -> CostRho:
    """Build a cost profile of the given kind, tabulated on 0..N+3.

    kind
        "linear" for rho(i) = i, "power" for rho(i) = i**p with p >= 1,
        "sqrt_case" for the concave profile lam + sqrt(i) - lam/sqrt(i+1),
        or "table" for an explicit vector (the first N+4 entries are used).
    """
    if kind not in _KINDS:
        raise InvalidArgumentError(f"unknown cost kind {kind!r}")
    if N < 2:
        raise InvalidArgumentError("N must be at least 2")

    i = np.arange(N + 4, dtype=float)
    if kind == "linear":
        vals = i.copy()
    elif kind == "power":
        if p is None or not (math.isfinite(p) and p >= 1):
            raise InvalidArgumentError("power cost needs an exponent p >= 1")
        vals = i**float(p)
    elif kind == "sqrt_case":
        if not (math.isfinite(lam) and lam > 0):
            raise InvalidArgumentError("sqrt_case needs lambda > 0")
        vals = lam + np.sqrt(i) - lam / np.sqrt(i + 1)
    else:
        if values is None:
            raise InvalidArgumentError("table cost needs an explicit values vector")
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or len(vals) < N + 4:
            raise InvalidArgumentError(
                f"table cost needs at least N+4 = {N + 4} values, got {vals.shape}"
            )
        vals = vals[: N + 4].copy()
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("table values must be finite")

    d1 = np.diff(vals)
    if np.any(d1 <= 0):
        bad = int(np.argmax(d1 <= 0))
        raise InvalidArgumentError(
            f"cost profile must be strictly increasing (violated between {bad} and {bad + 1})"
        )
    d2 = np.diff(vals, 2)
    shape = _classify_shape(d2)

    if kind in ("linear", "power"):
        # Increment ratios (i+1..)/(...) climb toward 1 from below for any
        # p >= 1, so the supremum over all states is exactly 1; a direct
        # max over the finite table would understate it.
        m_rho = 1.0
    elif kind == "sqrt_case":
        # The first ratio dominates every later one for this concave
        # profile, at every lambda, so the supremum is attained at i = 0.
        m_rho = float(d1[0] / d1[1])
    else:
        m_rho = float(np.max(d1[:-1] / d1[1:]))

    return CostRho(kind=kind, values=vals, d1=d1, d2=d2, shape=shape, m_rho=m_rho,
                   p=float(p) if kind == "power" else None)


def lip_seminorm(f, cost: CostRho) -> float:
    """Lipschitz seminorm of f with respect to the cost increments.

    sup over consecutive states of |f(i+1) - f(i)| / (rho(i+1) - rho(i)),
    taken on the range where f is tabulated.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 1:
        raise InvalidArgumentError("f must be a vector")
    if len(f) < 2:
        return 0.0
    if len(f) - 1 > len(cost.d1):
        raise InvalidArgumentError(
            f"f has {len(f)} entries but the cost only covers {len(cost.d1) + 1} states"
        )
    return float(np.max(np.abs(np.diff(f)) / cost.d1[: len(f) - 1]))
