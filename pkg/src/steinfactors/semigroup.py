"""The immigration-death semigroup, its resolvent integrals, and a coupled
path simulator.

The process gains individuals at rate lambda and loses each individual at
unit rate; its transition row from state i is the law of a
Binomial(i, e^{-t}) survivor count plus an independent
Poisson(lambda (1 - e^{-t})) immigration count.  Rows are evaluated in
log space.  Resolvent diagonals are integrated by adaptive quadrature on
a horizon chosen so the analytic tail is negligible; the generator
system (I - Q)x = f is solved by banded elimination with an absorbing
upper boundary.  The simulator couples neighbouring start states through
a unit-rate exponential clock and reports compensated-sum Monte-Carlo
estimates with standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded
from scipy.special import gammaln, logsumexp

from .errors import InvalidArgumentError, NumericFailureError

__all__ = [
    "PathSample",
    "CoupledEstimates",
    "semigroup_row",
    "resolvent_diagonal_integral",
    "mode_majorant_integral",
    "resolvent_tridiagonal",
    "sample_path",
    "simulate_coupled",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_rate(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidArgumentError("lambda must be a finite positive real")
    return lam


# --------------------------------------------------------------------------
# Transition rows.
# --------------------------------------------------------------------------

def semigroup_row(i: int, t: float, lam: float, N: int) -> np.ndarray:
    """Transition probabilities from state ``i`` after time ``t`` on 0..N.

    Log-space evaluation of the survivor-plus-immigrants sum; the row adds
    up to one minus whatever mass lives beyond state N.
    """
    lam = _check_rate(lam)
    if not isinstance(i, (int, np.integer)) or i < 0:
        raise InvalidArgumentError("the start state must be a non-negative integer")
    if i > N:
        raise InvalidArgumentError(f"start state {i} lies beyond the table end {N}")
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise InvalidArgumentError("t must be a finite non-negative real")
    if t == 0.0:
        row = np.zeros(N + 1)
        row[i] = 1.0
        return row

    one_minus = -math.expm1(-t)          # 1 - e^{-t}
    log_keep = -t                        # log e^{-t}
    log_loss = math.log(one_minus)
    log_mu = math.log(lam) + log_loss
    mu = lam * one_minus
    lgi = gammaln(i + 1)

    row = np.empty(N + 1)
    for j in range(N + 1):
        k = np.arange(min(i, j) + 1)
        terms = (
            lgi
            - gammaln(k + 1)
            - gammaln(i - k + 1)
            - gammaln(j - k + 1)
            + k * log_keep
            + (i - k) * log_loss
            + (j - k) * log_mu
            - mu
        )
        row[j] = math.exp(logsumexp(terms))
    return row


def _log_diagonal(j: int, t: float, lam: float) -> float:
    """log P_t(j, j) without building a whole row."""
    if t == 0.0:
        return 0.0
    one_minus = -math.expm1(-t)
    log_loss = math.log(one_minus)
    log_mu = math.log(lam) + log_loss
    mu = lam * one_minus
    k = np.arange(j + 1)
    terms = (
        gammaln(j + 1)
        - gammaln(k + 1)
        - 2.0 * gammaln(j - k + 1)
        - k * t
        + (j - k) * (log_loss + log_mu)
        - mu
    )
    return float(logsumexp(terms))


# --------------------------------------------------------------------------
# Resolvent integrals.
# --------------------------------------------------------------------------

def _check_decay(s) -> int:
    if s not in (2, 3):
        raise InvalidArgumentError("the decay exponent s must be 2 or 3")
    return int(s)


def resolvent_diagonal_integral(i: int, s, lam: float) -> float:
    """Adaptive quadrature of the diagonal resolvent
    integral(e^{-s t} P_t(i-1, i-1), t = 0..inf).

    At i = 1 this reproduces the closed forms
    (e^{-lam} + lam - 1) / lam^2 (s = 2) and
    ((lam - 1)^2 - 2 e^{-lam} + 1) / lam^3 (s = 3).
    """
    lam = _check_rate(lam)
    s = _check_decay(s)
    if not isinstance(i, (int, np.integer)) or i < 1:
        raise InvalidArgumentError("the state index i must be an integer >= 1")
    j = int(i) - 1
    horizon = 40.0 / s  # e^{-s T} ~ 4e-18
    out = quad(
        lambda t: math.exp(-s * t + _log_diagonal(j, t, lam)),
        0.0,
        horizon,
        epsabs=1e-12,
        epsrel=1e-11,
        limit=200,
        full_output=1,
    )
    value, abserr = out[0], out[1]
    tail = math.exp(-s * horizon) / s  # the integrand is at most e^{-s t}
    if len(out) > 3 or abserr + tail > 1e-10:
        raise NumericFailureError(
            f"resolvent quadrature did not converge (error {abserr + tail:.3e})"
        )
    return float(value)


def mode_majorant_integral(s, lam: float) -> float:
    """integral(e^{-s t} sup_j P_t(0, j), t = 0..inf) for lam > 1, through
    the piecewise majorant of the best-state probability.

    Before the running mean lam(1 - e^{-t}) reaches 1 the best state is 0
    and its probability is exact; afterwards the probability of the mode n
    is capped by the two-sided Stirling bound, constant on each interval
    where the mode sticks at n.  The pieces integrate in closed form
    except the first, which is quadrature.
    """
    lam = _check_rate(lam)
    s = _check_decay(s)
    if lam <= 1:
        raise InvalidArgumentError("the majorant split needs lambda > 1")
    t1 = math.log(lam / (lam - 1.0))
    out = quad(
        lambda t: math.exp(-s * t - lam * (-math.expm1(-t))),
        0.0,
        t1,
        epsabs=1e-14,
        epsrel=1e-13,
        limit=200,
        full_output=1,
    )
    total, abserr = out[0], out[1]
    if len(out) > 3 or abserr > 1e-12:
        raise NumericFailureError(
            f"majorant quadrature did not converge (error {abserr:.3e})"
        )
    K = math.floor(lam)
    for n in range(1, K + 1):
        cap = 12.0 * n / (_SQRT_2PI * math.sqrt(n) * (12.0 * n + 1.0))
        w_lo = ((lam - n) / lam) ** s
        w_hi = ((lam - n - 1.0) / lam) ** s if n < K else 0.0
        total += cap * (w_lo - w_hi) / s
    return float(total)


def resolvent_tridiagonal(f, lam: float, N: int) -> np.ndarray:
    """Solve (I - Q) x = f on states 0..N by banded elimination.

    Q is the generator (up-rate lambda, down-rate equal to the state); the
    upper boundary is absorbing, so deepen N until the entries of interest
    stop moving.
    """
    lam = _check_rate(lam)
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or len(f) != N + 1:
        raise InvalidArgumentError("f must be a vector over states 0..N")
    if N < 1:
        raise InvalidArgumentError("N must be at least 1")
    states = np.arange(N + 1, dtype=float)
    ab = np.zeros((3, N + 1))
    ab[0, 1:] = -lam                     # super-diagonal
    ab[1] = 1.0 + lam + states           # diagonal
    ab[2, :-1] = -states[1:]             # sub-diagonal
    return solve_banded((1, 1), ab, f)


# --------------------------------------------------------------------------
# Coupled simulation.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathSample:
    """One trajectory of the process started one below a given state.

    ``event_states`` holds the state after each jump; jumps are +-1 and
    holding times are exponential with rate lambda + current state.
    """

    seed: int
    initial_state: int
    lam: float
    horizon: float
    event_times: tuple[float, ...]
    event_states: tuple[int, ...]


@dataclass(frozen=True)
class CoupledEstimates:
    """Monte-Carlo estimates from paths started at i - 1.

    diag2 / diag3
        Estimates of integral(e^{-s t} 1{X_t = i - 1}, t = 0..horizon)
        for s = 2 and 3, with standard errors.
    quad_increment
        Estimate of integral(e^{-t} (2 X_t + 1), t = 0..horizon); for the
        squared profile this integral from start i - 1 equals lam + i.
    terminal_states / terminal_states_upper
        Per-path end states of the lower path and of the coupled upper
        path (one higher while the unit-rate clock still runs).
    """

    i: int
    lam: float
    horizon: float
    n_paths: int
    seed: int
    diag2: float
    diag2_se: float
    diag3: float
    diag3_se: float
    quad_increment: float
    quad_increment_se: float
    terminal_states: np.ndarray
    terminal_states_upper: np.ndarray


def sample_path(i: int, lam: float, T: float, seed: int) -> PathSample:
    """A single trajectory started at i - 1, recorded jump by jump."""
    lam = _check_rate(lam)
    if not isinstance(i, (int, np.integer)) or i < 1:
        raise InvalidArgumentError("the state index i must be an integer >= 1")
    T = float(T)
    if not math.isfinite(T) or T <= 0:
        raise InvalidArgumentError("the horizon must be a positive real")
    rng = np.random.default_rng(seed)
    x = int(i) - 1
    t = 0.0
    times: list[float] = []
    states: list[int] = []
    while True:
        t += rng.exponential(1.0 / (lam + x))
        if t >= T:
            break
        x += 1 if rng.random() < lam / (lam + x) else -1
        times.append(t)
        states.append(x)
    return PathSample(
        seed=int(seed),
        initial_state=int(i) - 1,
        lam=lam,
        horizon=T,
        event_times=tuple(times),
        event_states=tuple(states),
    )


def _mc_estimate(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def simulate_coupled(i: int, lam: float, T: float, n_paths: int,
                     seed: int) -> CoupledEstimates:
    """Simulate paths from i - 1 with the exponential-clock coupling.

    All paths advance in lockstep: each round draws one holding time per
    live path, accumulates the exponentially weighted occupation and
    increment integrals over the constant-state segment, then jumps.
    Results are deterministic for a given seed; estimates reduce with
    compensated summation, so they do not depend on reduction order.
    """
    lam = _check_rate(lam)
    if not isinstance(i, (int, np.integer)) or i < 1:
        raise InvalidArgumentError("the state index i must be an integer >= 1")
    if n_paths < 1000:
        raise InvalidArgumentError("need at least 1000 paths for stable errors")
    T = float(T)
    if not (math.isfinite(T) and math.exp(-2.0 * T) < 1e-8):
        raise InvalidArgumentError(
            "the horizon must satisfy e^{-2T} < 1e-8 so the open-ended "
            "integrals are complete"
        )

    rng = np.random.default_rng(seed)
    clock = rng.exponential(1.0, n_paths)  # the coupling clock, one per path
    x0 = int(i) - 1
    t = np.zeros(n_paths)
    x = np.full(n_paths, x0, dtype=np.int64)
    diag2 = np.zeros(n_paths)
    diag3 = np.zeros(n_paths)
    quad_inc = np.zeros(n_paths)
    active = np.ones(n_paths, dtype=bool)
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xs = x[idx]
        ts = t[idx]
        rates = lam + xs
        dts = rng.exponential(1.0, idx.size) / rates
        te = np.minimum(ts + dts, T)
        hit = xs == x0
        if np.any(hit):
            h = idx[hit]
            diag2[h] += (np.exp(-2.0 * ts[hit]) - np.exp(-2.0 * te[hit])) / 2.0
            diag3[h] += (np.exp(-3.0 * ts[hit]) - np.exp(-3.0 * te[hit])) / 3.0
        quad_inc[idx] += (2.0 * xs + 1.0) * (np.exp(-ts) - np.exp(-te))
        advanced = ts + dts
        done = advanced >= T
        up = rng.random(idx.size) < lam / rates
        keep = ~done
        x[idx[keep]] = xs[keep] + np.where(up[keep], 1, -1)
        t[idx] = advanced
        active[idx[done]] = False

    d2, d2_se = _mc_estimate(diag2)
    d3, d3_se = _mc_estimate(diag3)
    q1, q1_se = _mc_estimate(quad_inc)
    return CoupledEstimates(
        i=int(i),
        lam=lam,
        horizon=T,
        n_paths=int(n_paths),
        seed=int(seed),
        diag2=d2,
        diag2_se=d2_se,
        diag3=d3,
        diag3_se=d3_se,
        quad_increment=q1,
        quad_increment_se=q1_se,
        terminal_states=x,
        terminal_states_upper=x + (clock > T).astype(np.int64),
    )
