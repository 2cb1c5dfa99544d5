"""Stein equation solver and exact factor computation for the Poisson law.

The central recurrence is

    lam * g(i+1) - i * g(i) = f(i) - pi(f),        g(0) := g(1),

whose solution for the immigration-death chain has the explicit partial-sum
form g_f(i) = (1/(i pi_i)) * sum_{j<i} pi_j (f(j) - pi(f)).  Everything here
is built on that form, evaluated in extended precision with a forward /
backward split around the bulk of the Poisson mass so that partial sums are
always the short, well-conditioned ones.

The exact factors M0, M1, M2 are suprema over unit-Lipschitz test functions
of |D^k g_f(i)| / Drho(i); per index i the suprema are attained by known
extremal functions, so each per-i value is computed twice (closed-form tail
representation and an independent solve) and cross-checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostRho, make_cost
from .distributions import (
    Pmf,
    TailFunctionals,
    _poisson_log_pmf,
    tail_functionals,
    truncated_poisson_pmf,
)
from .errors import CertificationError, InvalidArgumentError

__all__ = [
    "SteinSolution",
    "FactorExact",
    "solve_stein",
    "delta_h_rho",
    "h_p_recursive",
    "exact_factors",
    "stein_identity_residual",
]

# Certification window: the per-i ratio sequence must reveal its tail
# behaviour over this many trailing indices.
_CERT_WINDOW = 20
# Internal tabulation is extended at least this far for the built-in cost
# families so that small-lambda truncations still leave a full window.
_MIN_RANGE = 45


@dataclass(frozen=True, eq=False)
class SteinSolution:
    """Solution of the Stein recurrence for one test function.

    ``g`` carries the convention g(0) = g(1); ``h`` is the cumulative
    profile centered against the Poisson weights (pi(h) = 0); ``dh`` are its
    forward differences, identical to g(1..N).
    """

    g: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    f: np.ndarray
    pi_f: float


@dataclass(frozen=True, eq=False)
class FactorExact:
    """Exact Stein factors of a cost profile.

    M0, M1, M2 are suprema over i >= 1 of |D^k g(i)|/Drho(i) at the
    extremal test functions, with attaining indices argmax0..2.  b0, b1, b2
    are the i = 0 boundary companions (b1 = 0 exactly by the g(0) = g(1)
    convention).  ``tail_class`` records how each supremum was certified:
    "decayed" (attained, tail strictly below), "flat" (constant ratio), or
    "limit" (ratios still climbing at the truncation point; the reported
    value is the observed maximum, a lower estimate of the supremum).
    ``m1_exact`` is False when the cost is neither convex nor concave, in
    which case M1 is only a supremum over the standard extremal family.
    """

    M0: float
    M1: float
    M2: float
    argmax0: int
    argmax1: int
    argmax2: int
    b0: float
    b1: float
    b2: float
    tail_class: tuple
    m1_exact: bool


def _require_poisson(pmf: Pmf, lam: float):
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)) or lam <= 0:
        raise InvalidArgumentError(f"lambda must be a finite positive real, got {lam!r}")
    if pmf.mean_lambda is None or abs(pmf.mean_lambda - lam) > 1e-12 * max(1.0, lam):
        raise InvalidArgumentError(
            "pmf must be a Poisson law with mean equal to the given lambda"
        )


def solve_stein(f, lam: float, pmf: Pmf) -> SteinSolution:
    """Solve lam*g(i+1) - i*g(i) = f(i) - pi(f) on the truncated range.

    f must be tabulated exactly on 0..N of the pmf.  The returned solution
    satisfies the recurrence pointwise to 1e-10 * max(1, |f(i)|).
    """
    _require_poisson(pmf, lam)
    f = np.asarray(f, dtype=float)
    N = pmf.trunc_index
    if f.shape != (N + 1,):
        raise InvalidArgumentError(f"f must be tabulated on 0..{N}, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidArgumentError("f must be finite")

    pi = pmf.probs.astype(np.longdouble)
    mass = pi.sum()
    fl = f.astype(np.longdouble)
    pi_f = (pi * fl).sum() / mass
    w = pi * (fl - pi_f)

    # prefix[i] = sum_{j <= i-1} w_j ; suffix[i] = sum_{j >= i} w_j.
    zero = np.zeros(1, dtype=np.longdouble)
    prefix = np.concatenate([zero, np.cumsum(w)])
    suffix = np.concatenate([np.cumsum(w[::-1])[::-1], zero])

    # Left of the bulk the forward sum is short and exact; right of it the
    # backward sum is.  (The two differ by the centering residual, which is
    # at extended-precision roundoff.)
    split = int(np.searchsorted(np.cumsum(pi), 0.5 * mass))
    i = np.arange(1, N + 1)
    denom = i.astype(np.longdouble) * pi[1:]
    g = np.empty(N + 1, dtype=np.longdouble)
    g[1:] = np.where(i <= split, prefix[1 : N + 1] / denom, -suffix[1 : N + 1] / denom)
    g[0] = g[1]

    h_raw = np.concatenate([zero, np.cumsum(g[1:])])
    h = h_raw - (pi * h_raw).sum() / mass

    g64 = g.astype(float)
    return SteinSolution(g=g64, h=h.astype(float), dh=g64[1:].copy(), f=f, pi_f=float(pi_f))


def delta_h_rho(cost: CostRho, lam: float, pmf: Pmf):
    """Forward differences of the centered cumulative solution for f = rho.

    Returns the sequence (1/((i+1) pi_{i+1})) sum_{j<=i} pi_j (rho(j) -
    pi(rho)) for 0 <= i <= N-1; for increasing rho these are negative.
    The cost profile extends beyond the pmf range (analytically for the
    built-in families), so the computation runs on a guarded tabulation and
    every returned entry is free of truncation-edge pollution.  An explicit
    table cost reaches only as far as it was given; when it barely covers
    the pmf, its last few entries retain edge error of relative size
    ~lam/N.
    """
    _require_poisson(pmf, lam)
    n_out = pmf.trunc_index
    cost_g, pmf_g, _, _ = _guarded_frame(cost, lam, pmf, extend_range=False)
    n_guard = pmf_g.trunc_index
    dh = solve_stein(cost_g.values[: n_guard + 1], lam, pmf_g).dh
    return dh[:n_out]


def _poisson_moment(p: int, lam: float) -> float:
    """E X^p for X ~ Poisson(lam), by the moment recursion over lower orders."""
    m = [1.0]
    for q in range(1, p + 1):
        m.append(lam * sum(math.comb(q - 1, k) * m[k] for k in range(q)))
    return m[p]


def h_p_recursive(p: int, lam: float, i: int) -> float:
    """Cumulative solution value h_p(i) for the power cost rho(j) = j^p.

    h_1(i) = -i for i >= 1; higher orders follow the recursion
    h_p(i) = -i^p/p + (1/p) sum_{k=1}^{p-1} C(p,k) h_k(i)
             * (lam + k (-1)^{p-k+1} / (p-k+1)),
    and h_p(0) = h_p(1) + E X^p / lam.
    """
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise InvalidArgumentError("p must be an integer >= 1")
    if not isinstance(i, (int, np.integer)) or i < 0:
        raise InvalidArgumentError("i must be a non-negative integer")
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidArgumentError("lambda must be a finite positive real")
    if i == 0:
        return h_p_recursive(p, lam, 1) + _poisson_moment(p, lam) / lam
    vals = [0.0, -float(i)]
    for q in range(2, p + 1):
        acc = 0.0
        for k in range(1, q):
            acc += math.comb(q, k) * vals[k] * (lam + k * (-1.0) ** (q - k + 1) / (q - k + 1))
        vals.append(-float(i) ** q / q + acc / q)
    return vals[p]


def _centered(f, tf: TailFunctionals):
    pi = tf.pi.astype(np.longdouble)
    fl = np.asarray(f, dtype=np.longdouble)
    fbar = fl - (pi * fl).sum() / pi.sum()
    w = pi * fbar
    zero = np.zeros(1, dtype=np.longdouble)
    prefix = np.concatenate([zero, np.cumsum(w)])
    suffix = np.concatenate([np.cumsum(w[::-1])[::-1], zero])
    return fbar, pi, prefix, suffix


def _delta_g_closed(f, i: int, tf: TailFunctionals) -> float:
    """First difference g(i+1) - g(i) via the tail-functional representation."""
    fbar, pi, prefix, suffix = _centered(f, tf)
    ep, em = tf.e_plus, tf.e_minus
    val = (
        -(ep[i] - ep[i - 1]) * float(suffix[i + 1])
        + (em[i + 1] - em[i]) * float(prefix[i])
        + float(pi[i] * fbar[i]) * (ep[i - 1] + em[i + 1])
    )
    return float(val)


def _delta2_g_closed(f, i: int, tf: TailFunctionals) -> float:
    """Second difference of g via the tail-functional representation."""
    fbar, pi, prefix, suffix = _centered(f, tf)
    ep, em = tf.e_plus, tf.e_minus
    val = (
        (em[i + 2] - 2 * em[i + 1] + em[i]) * float(prefix[i])
        - (ep[i + 1] - 2 * ep[i] + ep[i - 1]) * float(suffix[i + 2])
        + (2 * ep[i] - ep[i - 1] + em[i + 2]) * float(pi[i + 1] * fbar[i + 1])
        + (em[i + 2] - 2 * em[i + 1] - ep[i - 1]) * float(pi[i] * fbar[i])
    )
    return float(val)


def _certify_sup(vals, start: int, what: str):
    """Supremum of a per-index ratio sequence with tail classification.

    The trailing window must either sit strictly below the maximum
    ("decayed"), coincide with it ("flat"), or climb concavely toward a
    limit ("limit" — the maximum is then a lower estimate).  Anything else
    means the truncation is too short to say anything.
    """
    vals = np.asarray(vals, dtype=float)
    m = float(np.max(vals))
    arg = start + int(np.argmax(vals))
    if len(vals) < _CERT_WINDOW + 1:
        raise CertificationError(
            f"truncation too short to certify the supremum of {what} "
            f"({len(vals)} ratios, need {_CERT_WINDOW + 1})",
            partial=m,
        )
    tol = 1e-9 * max(1.0, abs(m))
    w = vals[-_CERT_WINDOW:]
    if np.all(w < m - tol):
        cls = "decayed"
    elif np.all(np.abs(w - m) <= tol):
        cls = "flat"
    else:
        inc = np.diff(w)
        jitter = 1e-12 * max(1.0, abs(m))
        if np.all(inc >= -jitter) and np.all(np.diff(inc) <= jitter):
            cls = "limit"
        else:
            raise CertificationError(
                f"per-index ratios for {what} neither decay nor stabilise near the "
                f"truncation point", partial=m,
            )
    return m, arg, cls


def _guarded_frame(cost: CostRho, lam: float, pmf: Pmf, extend_range: bool):
    """Tabulation frame with a guard zone behind the reported range.

    Any solution computed from a table truncated at N is polluted near N:
    the missing upper-tail contribution enters the partial sums at relative
    size ~ lam/N, far above float noise.  All reported quantities are
    therefore evaluated only up to ``n_report`` while the tabulation itself
    runs to ``n_guard``, chosen so the point mass has dropped by e^-64
    between the two.  The built-in cost families extend analytically; an
    explicit table reaches only as far as it was given, which limits the
    achievable guard.

    With ``extend_range`` the reported range itself is also widened to
    ``_MIN_RANGE`` states so a certification window exists even when the
    mass truncates early (built-in families only).

    Returns (cost, pmf, tail functionals) on the guarded range plus
    ``n_report``.
    """
    n_rep = pmf.trunc_index
    if cost.trunc_index < n_rep:
        raise InvalidArgumentError("cost must be tabulated at least to the pmf truncation point")
    if cost.kind == "sqrt_case":
        expect = lam + 1.0 - lam / math.sqrt(2.0)
        if abs(cost.values[1] - expect) > 1e-9 * max(1.0, abs(expect)):
            raise InvalidArgumentError("sqrt_case cost was built with a different lambda")
    if extend_range and cost.kind != "table" and n_rep < _MIN_RANGE:
        logp = _poisson_log_pmf(lam, _MIN_RANGE)
        in_range = np.nonzero(logp >= -670.0)[0]
        if len(in_range):
            n_rep = max(n_rep, int(in_range[-1]))
    logp = _poisson_log_pmf(lam, n_rep + 500)
    target = max(float(logp[n_rep]) - 64.0, -700.0)
    past = np.nonzero(logp[n_rep + 1 :] <= target)[0]
    n_guard = n_rep + 1 + (int(past[0]) if len(past) else 499)
    if cost.kind == "table":
        # A table cannot be extended, so its reach is split: everything with
        # a mass drop of at least e^-46 still behind it is reportable, the
        # rest is the guard.
        n_guard = cost.trunc_index
        logp_t = _poisson_log_pmf(lam, n_guard)
        clean = np.nonzero(logp_t >= float(logp_t[n_guard]) + 46.0)[0]
        n_rep = int(clean[-1]) if len(clean) else 0
    else:
        cost = make_cost(cost.kind, lam, n_guard, p=cost.p)
    pmf_g = truncated_poisson_pmf(lam, n_guard)
    tf = tail_functionals(lam, n_guard)
    return cost, pmf_g, tf, n_rep


def _check_routes(a: float, b: float, i: int, what: str):
    if abs(a - b) > 1e-9 * max(1.0, abs(a), abs(b)):
        raise CertificationError(
            f"closed-form and solver routes disagree for {what} at i={i}: {a} vs {b}",
            partial=max(abs(a), abs(b)),
        )


def exact_factors(cost: CostRho, lam: float, pmf: Pmf) -> FactorExact:
    """Exact Stein factors M0, M1, M2 with boundary values.

    Every per-i value is evaluated along two independent routes — the
    closed-form tail representation and a full solve on the extremal test
    function — and the routes must agree to 1e-9 before the supremum is
    certified.
    """
    _require_poisson(pmf, lam)
    cost, pmf, tf, n_rep = _guarded_frame(cost, lam, pmf, extend_range=True)
    Ng = pmf.trunc_index
    i_hi = min(n_rep, Ng - 2)
    if i_hi < 2:
        raise InvalidArgumentError("truncation too small for factor computation")
    rho = cost.values
    d1 = cost.d1

    # --- M0: extremal f = -rho, per-i value |g(i)| / Drho(i). ---
    f0 = -rho[: Ng + 1]
    sol0 = solve_stein(f0, lam, pmf)
    fbar0, pi_ld, prefix0, suffix0 = _centered(-f0, tf)  # sums of pi*(rho - pi(rho))
    # Left of the bulk the upper-tail sum crosses the whole mass and cancels
    # catastrophically against the tiny denominator; use the (identical, by
    # centering) forward sum there, as the solver does.
    cum0 = np.cumsum(pi_ld)
    split0 = int(np.searchsorted(cum0, 0.5 * float(cum0[-1])))
    per0 = np.empty(i_hi)
    for i in range(1, i_hi + 1):
        num = -prefix0[i] if i <= split0 else suffix0[i]
        closed = float(num / (i * pi_ld[i]))  # g_{-rho}(i)
        solved = sol0.g[i]
        _check_routes(closed, solved, i, "M0")
        per0[i - 1] = abs(closed) / d1[i]

    # --- M1: extremal f_i^*(j) = -|rho(j) - rho(i)| per index. ---
    per1 = np.empty(i_hi)
    for i in range(1, i_hi + 1):
        fstar = -np.abs(rho[: Ng + 1] - rho[i])
        closed = _delta_g_closed(fstar, i, tf)
        sol = solve_stein(fstar, lam, pmf)
        solved = sol.g[i + 1] - sol.g[i]
        _check_routes(closed, solved, i, "M1")
        per1[i - 1] = abs(closed) / d1[i]

    # --- M2: extremal roof profile f_i^tri per index. ---
    per2 = np.empty(i_hi)
    for i in range(1, i_hi + 1):
        ftri = np.empty(Ng + 1)
        ftri[0] = rho[i] - rho[0]
        ftri[1 : i + 1] = rho[i] - rho[1 : i + 1]
        ftri[i + 1 :] = 2 * rho[i + 1] - rho[i] - rho[i + 1 : Ng + 1]
        closed = _delta2_g_closed(ftri, i, tf)
        sol = solve_stein(ftri, lam, pmf)
        solved = sol.g[i + 2] - 2 * sol.g[i + 1] + sol.g[i]
        _check_routes(closed, solved, i, "M2")
        per2[i - 1] = abs(closed) / d1[i]

    M0, arg0, cls0 = _certify_sup(per0, 1, "M0")
    M1, arg1, cls1 = _certify_sup(per1, 1, "M1")
    M2, arg2, cls2 = _certify_sup(per2, 1, "M2")

    # --- Boundary values at i = 0 under the g(0) = g(1) convention. ---
    b0 = abs(sol0.g[1]) / d1[0]
    b1 = 0.0  # Dg(0) = g(1) - g(0) = 0 identically
    ftri0 = np.empty(Ng + 1)
    ftri0[0] = 0.0
    ftri0[1:] = 2 * rho[1] - rho[0] - rho[1 : Ng + 1]
    sol_tri0 = solve_stein(ftri0, lam, pmf)
    b2 = abs(sol_tri0.g[2] - sol_tri0.g[1]) / d1[0]  # D2 g(0) with g(0)=g(1)

    return FactorExact(
        M0=M0, M1=M1, M2=M2,
        argmax0=arg0, argmax1=arg1, argmax2=arg2,
        b0=float(b0), b1=b1, b2=float(b2),
        tail_class=(cls0, cls1, cls2),
        m1_exact=cost.shape != "neither",
    )


def stein_identity_residual(g, pmf: Pmf, lam: float) -> float:
    """Pi-weighted Stein characterization residual sum_i pi_i (lam g(i+1) - i g(i)).

    Vanishes (up to truncation tail) exactly when the weights are the
    Poisson(lam) law; g must cover 0..N+1 and is extended by its last value
    if one entry short.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidArgumentError("lambda must be a finite positive real")
    g = np.asarray(g, dtype=float)
    N = pmf.trunc_index
    if len(g) == N + 1:
        g = np.append(g, g[-1])
    if len(g) < N + 2:
        raise InvalidArgumentError(f"g must cover 0..{N + 1}")
    pi = pmf.probs.astype(np.longdouble)
    i = np.arange(N + 1, dtype=np.longdouble)
    val = (pi * (lam * g[1 : N + 2].astype(np.longdouble) - i * g[: N + 1])).sum()
    return float(val)
