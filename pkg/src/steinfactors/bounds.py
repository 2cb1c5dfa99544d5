"""Closed-form upper bounds on the exact factors, and the constant scan.

The two universal functions xi1 and xi2 are integrals of e^{-st} (s = 2, 3)
against the largest transition probability of the immigration-death
semigroup out of state 0.  That integrand is the exact Poisson mode mass
while the running mode is 0 and a Stirling constant on each later
mode-plateau, which makes the integral a finite sum of elementary terms —
the piecewise closed forms below.  The factor bounds combine them with the
increment-ratio constant of the cost and two seminorms of the cumulative
solution profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostRho
from .distributions import Pmf
from .errors import ConstantViolationError, InvalidArgumentError
from .stein import _centered, _certify_sup, _guarded_frame, _require_poisson, solve_stein

__all__ = [
    "FactorBounds",
    "ScanReport",
    "ScanRow",
    "xi1",
    "xi2",
    "theorem_bounds",
    "boundary_values",
    "scan_constants",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_lambda(lam) -> float:
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)) or lam <= 0:
        raise InvalidArgumentError(f"lambda must be a finite positive real, got {lam!r}")
    return float(lam)


def xi1(lam: float) -> float:
    """First-difference smoothing constant.

    Equals int_0^infty e^{-2t} sup_j P_t(0, j) dt with the mode-plateau
    majorant; below lam = 1 the mode never leaves 0 and the integral is
    exactly (e^{-lam} + lam - 1)/lam^2.
    """
    lam = _check_lambda(lam)
    if lam <= 1.0:
        return (math.expm1(-lam) + lam) / lam**2
    k = math.floor(lam)
    total = ((math.e - 1.0) * (lam - 1.0) + 1.0) / (lam**2 * math.e)
    for n in range(1, k):
        total += (6.0 * math.sqrt(n) * (2.0 * (lam - n) - 1.0)) / (
            _SQRT_2PI * lam**2 * (12 * n + 1)
        )
    total += 6.0 * math.sqrt(k) * (lam - k) ** 2 / (_SQRT_2PI * lam**2 * (12 * k + 1))
    return total


def xi2(lam: float) -> float:
    """Second-difference smoothing constant.

    Equals int_0^infty e^{-3t} sup_j P_t(0, j) dt with the mode-plateau
    majorant; below lam = 1 it is exactly ((lam-1)^2 - 2e^{-lam} + 1)/lam^3.
    """
    lam = _check_lambda(lam)
    if lam <= 1.0:
        return (lam * lam - 2.0 * (math.expm1(-lam) + lam)) / lam**3
    k = math.floor(lam)
    total = ((math.e - 1.0) * (lam - 1.0) ** 2 + 2.0 * lam + math.e - 4.0) / (lam**3 * math.e)
    for n in range(1, k):
        d = lam - n
        total += (4.0 * math.sqrt(n) * (3.0 * d * d - 3.0 * d + 1.0)) / (
            _SQRT_2PI * lam**3 * (12 * n + 1)
        )
    total += 4.0 * math.sqrt(k) * (lam - k) ** 3 / (_SQRT_2PI * lam**3 * (12 * k + 1))
    return total


@dataclass(frozen=True)
class FactorBounds:
    """Closed-form upper bounds B0/B1/B2 for the exact factors M0/M1/M2.

    ``lip_dh`` and ``lip_d2h`` are the cost-relative seminorms of the first
    and second differences of the cumulative solution profile,
    ``norm_Qinv`` the row norm of the inverse generator under the cost
    seminorm.  ``mode`` records which branch produced B1: "convex",
    "concave", or "unsupported-shape" (B1 is NaN then; B0 and B2 do not
    need a shape).
    """

    B0: float
    B1: float
    B2: float
    xi1: float
    xi2: float
    lip_dh: float
    lip_d2h: float
    norm_Qinv: float
    mode: str


def theorem_bounds(cost: CostRho, lam: float, pmf: Pmf) -> FactorBounds:
    """Upper bounds for the factors of ``cost`` at Poisson(lam).

    B0 = m_rho * norm_Qinv; B1 = m_rho*lip_dh + 2*m_rho*xi1 for convex
    costs and m_rho*lip_dh + 2*xi1 for concave ones; B2 = m_rho*lip_d2h +
    2*((2*xi2) min 1/lam).  The three suprema behind norm_Qinv, lip_dh and
    lip_d2h are certified with the same tail rule as the exact factors.
    """
    _require_poisson(pmf, lam)
    cost, pmf_g, tf, n_rep = _guarded_frame(cost, lam, pmf, extend_range=True)
    n_guard = pmf_g.trunc_index
    i_hi = min(n_rep, n_guard - 2)
    if i_hi < 2:
        raise InvalidArgumentError("truncation too small for bound computation")
    rho = cost.values
    d1 = cost.d1

    # Row norm of the inverse generator: per-i value is the upper-tail sum
    # of the centered cost over i*pi_i*Drho(i-1).  Left of the bulk the
    # upper-tail sum is evaluated through the (identical) forward sum.
    _, pi_ld, prefix, suffix = _centered(rho[: n_guard + 1], tf)
    cum = np.cumsum(pi_ld)
    split = int(np.searchsorted(cum, 0.5 * float(cum[-1])))
    perq = np.empty(i_hi)
    for i in range(1, i_hi + 1):
        num = -prefix[i] if i <= split else suffix[i]
        perq[i - 1] = abs(float(num)) / (i * float(pi_ld[i]) * d1[i - 1])
    nq, _, _ = _certify_sup(perq, 1, "norm_Qinv")

    # Cost-relative seminorms of the solution-profile differences.
    dh = solve_stein(rho[: n_guard + 1], lam, pmf_g).dh
    per_l1 = np.abs(np.diff(dh))[:i_hi] / d1[:i_hi]
    per_l2 = np.abs(np.diff(dh, 2))[:i_hi] / d1[:i_hi]
    lip_dh, _, _ = _certify_sup(per_l1, 0, "lip_dh")
    lip_d2h, _, _ = _certify_sup(per_l2, 0, "lip_d2h")

    x1 = xi1(lam)
    x2 = xi2(lam)
    m = cost.m_rho
    if cost.shape == "convex":
        b1 = m * lip_dh + 2.0 * m * x1
        mode = "convex"
    elif cost.shape == "concave":
        b1 = m * lip_dh + 2.0 * x1
        mode = "concave"
    else:
        b1 = math.nan
        mode = "unsupported-shape"
    return FactorBounds(
        B0=m * nq,
        B1=b1,
        B2=m * lip_d2h + 2.0 * min(2.0 * x2, 1.0 / lam),
        xi1=x1,
        xi2=x2,
        lip_dh=lip_dh,
        lip_d2h=lip_d2h,
        norm_Qinv=nq,
        mode=mode,
    )


def boundary_values(cost: CostRho, lam: float, pmf: Pmf):
    """Closed-form boundary companions (b0, b1, b2) at index 0.

    b0 = (pi(rho) - rho(0))/(lam*Drho(0)) — the exact value of the
    zeroth-order ratio at i = 1 under the g(0) = g(1) convention.  b1 = 0
    identically.  b2 is an upper bound whose smoothing term depends on the
    cost's shape; NaN when the cost is neither convex nor concave.
    """
    _require_poisson(pmf, lam)
    cost_g, pmf_g, _, _ = _guarded_frame(cost, lam, pmf, extend_range=False)
    rho = np.asarray(cost_g.values[: pmf_g.trunc_index + 1], dtype=np.longdouble)
    pi = pmf_g.probs.astype(np.longdouble)
    pi_rho = float((pi * rho).sum() / pi.sum())
    d1 = cost_g.d1
    rho0 = float(rho[0])

    b0 = (pi_rho - rho0) / (lam * d1[0])
    b1 = 0.0
    base = abs(1.0 / lam + (rho0 - pi_rho) / (lam**2 * d1[0]))
    smooth = (math.expm1(-lam) + lam) / lam**2
    if cost_g.shape == "convex":
        b2 = base + 2.0 * smooth
    elif cost_g.shape == "concave":
        b2 = base + 2.0 * d1[1] * smooth / d1[0]
    else:
        b2 = math.nan
    return float(b0), b1, float(b2)


@dataclass(frozen=True)
class ScanRow:
    """One grid point of the universal-constant scan."""

    lam: float
    xi1: float
    xi2: float
    envelope1: float
    envelope2: float
    ok1: bool
    ok2: bool


@dataclass(frozen=True)
class ScanReport:
    """Scan result: per-lambda rows plus observed suprema of sqrt(lam)*xi."""

    rows: tuple
    max_sqrt_xi1: float
    max_sqrt_xi2: float


def _envelopes(lam: float):
    e1 = 0.5 if lam <= 1.0 else 0.532 / math.sqrt(lam)
    e2 = 1.0 / 3.0 if lam <= 1.0 else 0.426 / math.sqrt(lam)
    return e1, e2


def _assert_envelopes(lam: float, x1: float, x2: float):
    e1, e2 = _envelopes(lam)
    if x1 > e1 or x2 > e2:
        raise ConstantViolationError(
            f"universal-constant envelope violated at lambda={lam!r}: "
            f"xi1={x1!r} (cap {e1!r}), xi2={x2!r} (cap {e2!r})",
            lam=lam,
        )


def scan_constants(lambda_grid) -> ScanReport:
    """Evaluate xi1/xi2 over a grid and verify their universal envelopes.

    Raises ConstantViolationError (carrying the offending lambda) if any
    grid point exceeds its envelope; otherwise returns per-point rows and
    the observed maxima of sqrt(lam)*xi1 and sqrt(lam)*xi2.
    """
    lams = [float(x) for x in lambda_grid]
    if not lams:
        raise InvalidArgumentError("lambda grid must be non-empty")
    for x in lams:
        if not math.isfinite(x) or x <= 0:
            raise InvalidArgumentError(f"grid values must be finite positive reals, got {x!r}")
    rows = []
    for lam in lams:
        x1 = xi1(lam)
        x2 = xi2(lam)
        _assert_envelopes(lam, x1, x2)
        e1, e2 = _envelopes(lam)
        rows.append(
            ScanRow(lam=lam, xi1=x1, xi2=x2, envelope1=e1, envelope2=e2, ok1=True, ok2=True)
        )
    return ScanReport(
        rows=tuple(rows),
        max_sqrt_xi1=max(math.sqrt(r.lam) * r.xi1 for r in rows),
        max_sqrt_xi2=max(math.sqrt(r.lam) * r.xi2 for r in rows),
    )
