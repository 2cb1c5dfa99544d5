"""Distributions on the non-negative integers.

Poisson laws with certified truncation, exact Poisson-binomial laws, the
tail functionals used throughout the factor computations, and the Chernoff
lower-tail bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidArgumentError

__all__ = [
    "Pmf",
    "TailFunctionals",
    "poisson_pmf",
    "poisson_binomial_pmf",
    "pmf_from_probs",
    "tail_functionals",
    "chernoff_lower_tail",
]


@dataclass(frozen=True, eq=False)
class Pmf:
    """A finitely truncated probability mass function on {0, 1, ..., N}.

    Attributes
    ----------
    probs : np.ndarray
        Non-negative masses for states 0..trunc_index.  Treat as read-only.
    trunc_index : int
        The largest tabulated state N.
    tail_bound : float
        A certified upper bound on the probability mass beyond N.
    mean_lambda : float | None
        The Poisson mean when this pmf is a truncated Poisson law, else None.
    """

    probs: np.ndarray
    trunc_index: int
    tail_bound: float
    mean_lambda: float | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or len(p) != self.trunc_index + 1:
            raise InvalidArgumentError("probs must be a vector over 0..trunc_index")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidArgumentError("probabilities must be finite and non-negative")
        if self.tail_bound < 0:
            raise InvalidArgumentError("tail_bound must be non-negative")
        total = float(np.sum(p))
        if total > 1 + 1e-12 or total < 1 - self.tail_bound - 1e-12:
            raise InvalidArgumentError(
                f"mass {total} inconsistent with tail bound {self.tail_bound}"
            )

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.trunc_index + 1)

    def mean(self) -> float:
        return float(np.sum(self.probs * self.support))

    def cdf(self) -> np.ndarray:
        """Lower CDF F(i) = P(X <= i) on the truncated range."""
        return np.cumsum(self.probs)


@dataclass(frozen=True, eq=False)
class TailFunctionals:
    """Tail functionals of a Poisson(lambda) law.

    ``e_plus[i]`` is defined for 0 <= i <= N as (lower CDF at i)/(lambda pi_i);
    ``e_minus[i]`` for 1 <= i <= N as (upper tail at i)/(i pi_i), with the
    index-0 slot set to NaN; ``r[i]`` for 1 <= i <= N-2.  ``F_left`` and
    ``F_right`` are the inclusive lower and upper cumulative masses, the
    latter carrying the certified truncation tail.
    """

    lam: float
    e_plus: np.ndarray
    e_minus: np.ndarray
    r: np.ndarray
    F_left: np.ndarray
    F_right: np.ndarray
    pi: np.ndarray = field(repr=False)


def _poisson_log_pmf(lam: float, n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    return k * math.log(lam) - lam - gammaln(k + 1)


def _geometric_tail_bound(lam: float, probs_next: float, next_index: int) -> float:
    """Certified bound on the Poisson mass at and beyond ``next_index``.

    The terms decay at least geometrically with ratio lam/(next_index+1)
    once that ratio is below one, so the remainder is bounded by the first
    omitted term over (1 - ratio).
    """
    ratio = lam / (next_index + 1)
    if ratio >= 1:
        return math.inf
    return probs_next / (1 - ratio)


def poisson_pmf(lam: float, eps_tail: float = 1e-12, min_trunc: int | None = None) -> Pmf:
    """Truncated Poisson(lam) law with certified tail mass below ``eps_tail``.

    The truncation point is the smallest N whose certified upper-tail bound
    beyond N is less than eps_tail (but at least ``min_trunc`` when given).
    Entries are computed in log space and exponentiated, which keeps them
    accurate up to lam = 1e4.
    """
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)) or lam <= 0:
        raise InvalidArgumentError(f"lambda must be a finite positive real, got {lam!r}")
    if not (0 < eps_tail < 1):
        raise InvalidArgumentError(f"eps_tail must lie in (0, 1), got {eps_tail!r}")

    cap = int(math.ceil(lam + 12 * math.sqrt(lam + 1) + 30))
    if min_trunc is not None:
        cap = max(cap, int(min_trunc) + 5)
    while True:
        logp = _poisson_log_pmf(lam, cap + 1)
        p = np.exp(logp)
        if _geometric_tail_bound(lam, float(p[cap + 1]), cap + 1) < 0.25 * eps_tail:
            break
        cap *= 2  # pragma: no cover - the initial cap suffices for lam <= 1e4

    # Exact partial tails inside the table plus the certified remainder.
    suffix = np.cumsum(p[::-1], dtype=np.longdouble)[::-1]
    remainder = _geometric_tail_bound(lam, float(p[cap + 1]), cap + 1)
    # tail_after[m] bounds the mass strictly beyond m.
    tail_after = np.empty(cap + 1, dtype=float)
    tail_after[:cap] = np.asarray(suffix[1 : cap + 1], dtype=float) + remainder
    tail_after[cap] = float(p[cap + 1]) / max(1e-300, 1 - lam / (cap + 2)) \
        if lam / (cap + 2) < 1 else math.inf
    candidates = np.nonzero(tail_after < 0.5 * eps_tail)[0]
    n = int(candidates[0])
    n = max(n, 2, int(min_trunc) if min_trunc is not None else 0)
    return _finish_truncation(lam, p, tail_after, n)


def _finish_truncation(lam: float, p: np.ndarray, tail_after: np.ndarray, n: int) -> Pmf:
    probs = p[: n + 1].copy()
    # Each entry carries exp/gammaln rounding, so at large lambda the raw
    # float sum drifts outside [1 - tail, 1] even though the true law never
    # does.  Rescale to the centre of that interval; the per-entry change is
    # the same order as the rounding already present.
    bound = float(tail_after[n])
    target = 1.0 - 0.5 * bound
    probs *= target / float(np.sum(probs, dtype=np.longdouble))
    return Pmf(
        probs=probs,
        trunc_index=n,
        tail_bound=bound,
        mean_lambda=float(lam),
    )


def truncated_poisson_pmf(lam: float, n: int) -> Pmf:
    """Poisson(lam) truncated at exactly state ``n``, with its certified tail.

    Unlike :func:`poisson_pmf`, the truncation point is prescribed rather
    than derived from a tail budget.
    """
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)) or lam <= 0:
        raise InvalidArgumentError(f"lambda must be a finite positive real, got {lam!r}")
    if n < 2:
        raise InvalidArgumentError("n must be at least 2")
    cap = max(int(math.ceil(lam + 12 * math.sqrt(lam + 1) + 30)), n + 5)
    logp = _poisson_log_pmf(lam, cap + 1)
    p = np.exp(logp)
    suffix = np.cumsum(p[::-1], dtype=np.longdouble)[::-1]
    remainder = _geometric_tail_bound(lam, float(p[cap + 1]), cap + 1)
    tail_after = np.asarray(suffix, dtype=float) + remainder  # index m: beyond m-1
    return _finish_truncation(lam, p, tail_after[1:], n)


def poisson_binomial_pmf(p: "np.ndarray | list[float]") -> Pmf:
    """Exact law of a sum of independent Bernoulli(p_i) variables.

    Iterated convolution, one Bernoulli at a time; exact up to float
    rounding, with no truncation (tail_bound = 0).
    """
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1 or len(probs) == 0:
        raise InvalidArgumentError("need a non-empty vector of probabilities")
    if np.any(probs < 0) or np.any(probs > 1) or not np.all(np.isfinite(probs)):
        raise InvalidArgumentError("each probability must lie in [0, 1]")
    n = len(probs)
    w = np.zeros(n + 1)
    w[0] = 1.0
    for m, pi in enumerate(probs, start=1):
        w[1 : m + 1] = w[1 : m + 1] * (1 - pi) + w[:m] * pi
        w[0] *= 1 - pi
    return Pmf(probs=w, trunc_index=n, tail_bound=0.0, mean_lambda=None)


def pmf_from_probs(probs, tail_bound: float = 0.0) -> Pmf:
    """Wrap an explicit probability vector (state i has mass probs[i])."""
    probs = np.asarray(probs, dtype=float)
    return Pmf(probs=probs, trunc_index=len(probs) - 1, tail_bound=float(tail_bound))


def tail_functionals(lam: float, N: int) -> TailFunctionals:
    """Tail functionals of Poisson(lam) on 0..N.

    e_plus[i] = F_left(i) / (lam pi_i) for 0 <= i <= N,
    e_minus[i] = F_right(i) / (i pi_i) for 1 <= i <= N, and
    r[i] for 1 <= i <= N-2 combines them as in the second-difference
    analysis; r is provably non-negative.
    """
    if N < 2:
        raise InvalidArgumentError("N must be at least 2")
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidArgumentError("lambda must be a finite positive real")

    logp = _poisson_log_pmf(lam, N + 1)
    pi = np.exp(logp[: N + 1])
    idx = np.arange(N + 1, dtype=float)

    # Forward mass in extended precision; backward mass carries the
    # certified remainder so that F_left(i) + F_right(i+1) == total mass.
    F_left = np.asarray(np.cumsum(pi.astype(np.longdouble)), dtype=float)
    remainder = _geometric_tail_bound(lam, float(math.exp(logp[N + 1])), N + 1)
    suffix = np.cumsum(pi[::-1].astype(np.longdouble))[::-1]
    F_right = np.asarray(suffix + np.longdouble(remainder), dtype=float)

    e_plus = F_left / (lam * pi)
    e_minus = np.full(N + 1, np.nan)
    e_minus[1:] = F_right[1:] / (idx[1:] * pi[1:])

    n_r = N - 2
    r = np.full(N + 1, np.nan)
    for i in range(1, n_r + 1):
        first = pi[i + 1] * (2 * e_plus[i] - e_plus[i - 1] + e_minus[i + 2])
        d2e_plus = e_plus[i + 1] - 2 * e_plus[i] + e_plus[i - 1]
        r[i] = first - d2e_plus * F_right[i + 2]

    return TailFunctionals(
        lam=float(lam), e_plus=e_plus, e_minus=e_minus, r=r,
        F_left=F_left, F_right=F_right, pi=pi,
    )


def chernoff_lower_tail(mu: float, t: float) -> float:
    """The lower-tail bound exp(-t^2 / (2 mu)) for a sum with mean mu."""
    if mu <= 0:
        raise InvalidArgumentError("mu must be positive")
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    return math.exp(-t * t / (2 * mu))
