"""Verified error certificates for Poisson approximation of Bernoulli sums.

For a sum W of independent Bernoulli(p_i) variables with mu = sum(p_i),
mu_l = sum(p_i^l) and rate lam = mu - mu2, whenever mu2 is an integer the
distance from the recentred law of W to Poisson(lam) admits closed-form
caps:

* under the squared-profile transport distance, the law of
  (W - mu2) 1{W >= mu2} sits within
  6 (mu2 - mu3) + mu2 (7 + lam) e^{-lam^2 / (2 mu)} of the target;
* in quadratic-mean transport, the law of W - mu2 sits within
  mu2 e^{-lam^2 / (4 mu)} + sqrt(first cap) of the target.

A certificate records the input moments, both caps, and the matching
distances computed exactly (up to the quantified truncation bar of the
Poisson target), so every reported inequality can be re-checked from the
fields alone.  A scan helper sweeps families of identical-coin instances
and fits the growth rate of the quadratic-mean cap and distance against
the instance size — exploration only, no conclusions drawn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import make_cost
from .distributions import Pmf, pmf_from_probs, poisson_binomial_pmf, poisson_pmf
from .errors import InvalidArgumentError
from .transport import quantile_transport_cost, wasserstein_rho

__all__ = [
    "Certificate",
    "FamilyFit",
    "ConjectureReport",
    "certificate",
    "shifted_truncated_law",
    "conjecture_scan",
]

_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class Certificate:
    """Moments, closed-form caps, and exact distances for one instance.

    ``bound1``/``exact1`` refer to the squared-profile transport distance of
    the shifted-truncated law, ``bound2``/``exact2`` to the quadratic-mean
    distance of the shifted law; all four are None when the instance is not
    certifiable (fractional squared-sum or zero rate).  ``error_bar`` caps
    the effect of the truncated Poisson target on ``exact1``.
    """

    p: tuple[float, ...]
    n: int
    mu: float
    mu2: float
    mu3: float
    lam: float
    shift: int | None
    bound1: float | None
    bound2: float | None
    exact1: float | None
    exact2: float | None
    error_bar: float | None
    mu2_is_integer: bool
    lam_positive: bool
    valid: bool


@dataclass(frozen=True)
class FamilyFit:
    """Log-log growth slopes across one identical-coin family."""

    p: float
    slope_exact2: float
    slope_bound2: float


@dataclass(frozen=True)
class ConjectureReport:
    """One certificate row per instance, skip notes, and per-family fits."""

    rows: tuple[Certificate, ...]
    skipped: tuple[str, ...]
    fits: tuple[FamilyFit, ...]


def _checked_probs(p) -> np.ndarray:
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1 or len(probs) == 0:
        raise InvalidArgumentError("need a non-empty vector of probabilities")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    return probs


def shifted_truncated_law(p, b) -> Pmf:
    """The law of (W - b) 1{W >= b}: sub-b mass collapses onto state 0.

    With b = 0 this is the law of W itself.
    """
    probs = _checked_probs(p)
    if isinstance(b, float) and not b.is_integer():
        raise InvalidArgumentError("the shift b must be a non-negative integer")
    b = int(b)
    if b < 0:
        raise InvalidArgumentError("the shift b must be a non-negative integer")
    w = poisson_binomial_pmf(probs).probs
    n = len(w) - 1
    if b > n:
        return pmf_from_probs(np.array([1.0]))
    out = np.empty(n - b + 1)
    out[0] = math.fsum(w[: b + 1])
    out[1:] = w[b + 1 :]
    return pmf_from_probs(out)


def certificate(p) -> Certificate:
    """Certify Poisson approximation for a vector of success probabilities.

    The caps need an integer squared-sum mu2 and a positive rate
    lam = mu - mu2; otherwise the certificate comes back with valid=False
    and the cap/distance fields not applicable.
    """
    probs = _checked_probs(p)
    n = len(probs)
    mu = math.fsum(probs)
    mu2 = math.fsum(probs**2)
    mu3 = math.fsum(probs**3)
    lam = mu - mu2
    mu2_is_integer = abs(mu2 - round(mu2)) <= _INTEGER_TOL
    lam_positive = lam > 0
    valid = mu2_is_integer and lam_positive
    base = dict(
        p=tuple(float(v) for v in probs),
        n=n,
        mu=mu,
        mu2=mu2,
        mu3=mu3,
        lam=lam,
        mu2_is_integer=mu2_is_integer,
        lam_positive=lam_positive,
        valid=valid,
    )
    if not valid:
        return Certificate(
            shift=round(mu2) if mu2_is_integer else None,
            bound1=None,
            bound2=None,
            exact1=None,
            exact2=None,
            error_bar=None,
            **base,
        )

    b = round(mu2)
    decay = math.exp(-lam * lam / (2.0 * mu))
    bound1 = 6.0 * (mu2 - mu3) + mu2 * (7.0 + lam) * decay
    bound2 = mu2 * math.exp(-lam * lam / (4.0 * mu)) + math.sqrt(bound1)

    shifted = shifted_truncated_law(probs, b)
    target = poisson_pmf(lam)
    reach = max(shifted.trunc_index, target.trunc_index)
    cost = make_cost("power", lam, reach, p=2.0)
    res = wasserstein_rho(shifted, target, cost)

    w = poisson_binomial_pmf(probs).probs
    total = quantile_transport_cost(
        np.arange(n + 1, dtype=float) - b,
        w,
        np.arange(len(target.probs), dtype=float),
        target.probs,
        2.0,
    )
    return Certificate(
        shift=b,
        bound1=bound1,
        bound2=bound2,
        exact1=res.distance,
        exact2=math.sqrt(total),
        error_bar=res.error_bar,
        **base,
    )


def conjecture_scan(families) -> ConjectureReport:
    """Sweep identical-coin families and fit growth rates.

    Each family is a mapping with a success probability ``p`` and a list of
    sizes ``n``; sizes whose squared-sum n p^2 is fractional are skipped
    with a note.  Families contributing at least two certified sizes get a
    least-squares slope of log(exact2) and log(bound2) against log(n).
    The scan reports numbers only and draws no conclusions.
    """
    families = list(families)
    if not families:
        raise InvalidArgumentError("need at least one family to scan")
    rows: list[Certificate] = []
    skipped: list[str] = []
    fits: list[FamilyFit] = []
    for family in families:
        try:
            p = float(family["p"])
            sizes = [int(v) for v in family["n"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(
                "each family needs a probability 'p' and sizes 'n'"
            ) from exc
        if not (0.0 < p < 1.0):
            raise InvalidArgumentError("family probability must lie in (0, 1)")
        if not sizes:
            raise InvalidArgumentError("family size list must be non-empty")
        family_rows: list[Certificate] = []
        for n in sizes:
            if n < 1:
                raise InvalidArgumentError("family sizes must be positive")
            cert = certificate(np.full(n, p))
            if not cert.valid:
                skipped.append(
                    f"skipped n={n}, p={p:g}: squared-sum {cert.mu2:.6g} "
                    "is not an integer or the rate vanishes"
                )
                continue
            family_rows.append(cert)
        rows.extend(family_rows)
        if len({row.n for row in family_rows}) >= 2:
            logn = np.log([row.n for row in family_rows])
            fits.append(
                FamilyFit(
                    p=p,
                    slope_exact2=float(
                        np.polyfit(logn, np.log([r.exact2 for r in family_rows]), 1)[0]
                    ),
                    slope_bound2=float(
                        np.polyfit(logn, np.log([r.bound2 for r in family_rows]), 1)[0]
                    ),
                )
            )
    return ConjectureReport(
        rows=tuple(rows), skipped=tuple(skipped), fits=tuple(fits)
    )
