"""Immigration-death semigroup, resolvent integrals, and coupled simulation.

Oracle layering: each transition row is, independently of the in-package
log-space sum, the convolution of a thinned-survivor binomial law with a
Poisson immigration law (scipy.stats pmfs + np.convolve).  Resolvent
values are pinned by hand-integrated closed forms at the boundary state
and by generic tridiagonal solves of the generator system; Monte-Carlo
estimates must land within sampling error of those targets.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import binom, poisson

from steinfactors.bounds import xi1, xi2
from steinfactors.costs import make_cost
from steinfactors.distributions import poisson_pmf
from steinfactors.errors import InvalidArgumentError
from steinfactors.semigroup import (
    CoupledEstimates,
    PathSample,
    mode_majorant_integral,
    resolvent_diagonal_integral,
    resolvent_tridiagonal,
    sample_path,
    semigroup_row,
    simulate_coupled,
)
from steinfactors.stein import delta_h_rho
from steinfactors.transport import wasserstein_rho
from steinfactors.distributions import pmf_from_probs


# --------------------------------------------------------------------------
# Oracles.
# --------------------------------------------------------------------------

def convolution_row_oracle(i, t, lam, N):
    """Transition row as survivors ⊕ immigrants, via scipy.stats pmfs."""
    keep = math.exp(-t)
    mu = lam * (1.0 - keep)
    survivors = binom.pmf(np.arange(i + 1), i, keep)
    immigrants = poisson.pmf(np.arange(N + 1), mu)
    return np.convolve(survivors, immigrants)[: N + 1]


def resolvent_quadrature_oracle(i, s, lam, N=80):
    val, err = quad(
        lambda t: math.exp(-s * t) * semigroup_row(i, t, lam, N)[i],
        0.0,
        40.0,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    assert err < 1e-10
    return val


class TestSemigroupRow:
    def test_matches_convolution_oracle(self):
        for i, t, lam in [(0, 0.5, 1.0), (3, 0.25, 2.0), (7, 1.5, 0.4),
                          (12, 3.0, 5.5), (1, 0.01, 1.0)]:
            N = 50
            row = semigroup_row(i, t, lam, N)
            want = convolution_row_oracle(i, t, lam, N)
            assert np.allclose(row, want, rtol=1e-11, atol=1e-300)

    def test_time_zero_is_indicator(self):
        row = semigroup_row(4, 0.0, 1.0, 10)
        want = np.zeros(11)
        want[4] = 1.0
        assert np.array_equal(row, want)

    def test_start_at_zero_is_poisson(self):
        t, lam, N = 0.8, 2.5, 40
        mu = lam * (1.0 - math.exp(-t))
        row = semigroup_row(0, t, lam, N)
        want = poisson.pmf(np.arange(N + 1), mu)
        assert np.allclose(row, want, rtol=1e-12)

    def test_long_time_reaches_stationarity(self):
        lam, N = 1.0, 40
        row = semigroup_row(6, 40.0, lam, N)
        pi = poisson.pmf(np.arange(N + 1), lam)
        assert np.max(np.abs(row - pi)) < 1e-10

    def test_row_sums_to_one_minus_tail(self):
        lam, N = 3.0, 60
        for i, t in [(0, 0.7), (5, 0.7), (10, 2.0)]:
            total = math.fsum(semigroup_row(i, t, lam, N))
            assert total <= 1.0 + 1e-12
            assert total >= 1.0 - 1e-12  # N is far beyond the reachable bulk
        short = math.fsum(semigroup_row(4, 1.0, 3.0, 6))
        assert short < 1.0 - 1e-6  # visible tail when the row is cut short

    def test_chapman_kolmogorov(self):
        lam, N, i = 1.0, 45, 3
        for t, s in [(0.3, 0.7), (1.0, 1.0)]:
            left = semigroup_row(i, t + s, lam, N)
            at_t = semigroup_row(i, t, lam, N)
            at_s = np.array([semigroup_row(k, s, lam, N) for k in range(N + 1)])
            composed = at_t @ at_s
            assert np.max(np.abs(left - composed)) < 1e-8

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            semigroup_row(5, 1.0, 1.0, 4)  # start beyond the table
        with pytest.raises(InvalidArgumentError):
            semigroup_row(-1, 1.0, 1.0, 4)
        with pytest.raises(InvalidArgumentError):
            semigroup_row(0, -0.5, 1.0, 4)
        with pytest.raises(InvalidArgumentError):
            semigroup_row(0, 1.0, 0.0, 4)


class TestStirlingSandwich:
    def test_factorials_up_to_170(self):
        for n in range(1, 171):
            r_n = math.sqrt(2 * math.pi * n) * (n / math.e) ** n
            exact = float(math.factorial(n))
            assert r_n * (1 + 1 / (12 * n)) < exact
            assert exact < r_n * (1 + 1 / (12 * n - 0.5))


class TestResolventDiagonal:
    def test_boundary_closed_form_s2(self):
        for lam in (0.3, 1.0):
            want = (math.exp(-lam) + lam - 1) / lam**2
            assert resolvent_diagonal_integral(1, 2, lam) == pytest.approx(
                want, abs=1e-9
            )

    def test_boundary_closed_form_s3(self):
        for lam in (0.3, 1.0):
            want = ((lam - 1) ** 2 - 2 * math.exp(-lam) + 1) / lam**3
            assert resolvent_diagonal_integral(1, 3, lam) == pytest.approx(
                want, abs=1e-9
            )

    def test_boundary_values_at_unit_rate(self):
        assert resolvent_diagonal_integral(1, 2, 1.0) == pytest.approx(
            math.exp(-1), abs=1e-9
        )
        assert resolvent_diagonal_integral(1, 3, 1.0) == pytest.approx(
            1 - 2 * math.exp(-1), abs=1e-9
        )

    def test_boundary_dominates_interior_at_small_rate(self):
        top = resolvent_diagonal_integral(1, 2, 0.7)
        assert resolvent_diagonal_integral(5, 2, 0.7) <= top

    def test_matches_direct_quadrature(self):
        for i, s, lam in [(2, 2, 1.5), (4, 3, 0.9), (3, 2, 3.2)]:
            want = resolvent_quadrature_oracle(i - 1, s, lam)
            assert resolvent_diagonal_integral(i, s, lam) == pytest.approx(
                want, abs=1e-9
            )

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            resolvent_diagonal_integral(0, 2, 1.0)
        with pytest.raises(InvalidArgumentError):
            resolvent_diagonal_integral(1, 4, 1.0)
        with pytest.raises(InvalidArgumentError):
            resolvent_diagonal_integral(1, 2, -1.0)


class TestModeMajorantIntegral:
    def test_equals_first_scan_constant(self):
        for lam in (1.5, 2.0, 3.7, 4.0, 10.25):
            assert mode_majorant_integral(2, lam) == pytest.approx(
                xi1(lam), rel=1e-12
            )

    def test_equals_second_scan_constant(self):
        for lam in (1.5, 2.0, 3.7, 4.0, 10.25):
            assert mode_majorant_integral(3, lam) == pytest.approx(
                xi2(lam), rel=1e-12
            )

    def test_continuity_with_small_rate_branch(self):
        small_branch = lambda lam: (math.expm1(-lam) + lam) / lam**2
        assert abs(mode_majorant_integral(2, 1.0001) - small_branch(1.0001)) < 1e-3

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            mode_majorant_integral(2, 0.9)
        with pytest.raises(InvalidArgumentError):
            mode_majorant_integral(4, 2.0)


class TestResolventTridiagonal:
    def test_matches_quadrature_of_semigroup_averages(self):
        N = 45
        for kind, p in [("linear", None), ("power", 2.0)]:
            for lam in (1.0, 2.0):
                cost = make_cost(kind, lam, N + 2, p=p)
                f = cost.d1[: N + 1]
                x = resolvent_tridiagonal(f, lam, N)
                for i in (0, 1, 2, 5, 8):
                    val, err = quad(
                        lambda t: math.exp(-t)
                        * float(np.dot(semigroup_row(i, t, lam, N), f)),
                        0.0,
                        40.0,
                        epsabs=1e-11,
                        epsrel=1e-10,
                        limit=200,
                    )
                    assert err < 1e-8
                    assert x[i] == pytest.approx(val, abs=1e-7)

    def test_generator_increment_identity(self):
        # The factor solver's first-difference table solves the same
        # tridiagonal system, up to sign.
        for kind, p, lam in [("linear", None, 1.0), ("power", 2.0, 1.0),
                             ("power", 2.0, 2.0)]:
            pmf = poisson_pmf(lam)
            cost = make_cost(kind, lam, pmf.trunc_index, p=p)
            dh = delta_h_rho(cost, lam, pmf)
            N = 4 * pmf.trunc_index + 60
            x = resolvent_tridiagonal(
                make_cost(kind, lam, N + 2, p=p).d1[: N + 1], lam, N
            )
            take = min(len(dh), 15)
            assert np.allclose(dh[:take], -x[:take], atol=1e-7)

    def test_doubling_the_window_is_insensitive(self):
        lam, N = 2.0, 60
        f = make_cost("power", lam, 2 * N + 2, p=2.0).d1
        x1 = resolvent_tridiagonal(f[: N + 1], lam, N)
        x2 = resolvent_tridiagonal(f[: 2 * N + 1], lam, 2 * N)
        assert np.max(np.abs(x1[:10] - x2[:10])) < 1e-9

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            resolvent_tridiagonal([1.0, 1.0], -1.0, 1)
        with pytest.raises(InvalidArgumentError):
            resolvent_tridiagonal([1.0, 1.0], 1.0, 3)


class TestSimulation:
    def test_single_path_structure(self):
        path = sample_path(4, 1.5, 12.0, seed=42)
        assert isinstance(path, PathSample)
        assert path.initial_state == 3
        states = np.array((path.initial_state,) + path.event_states)
        assert np.all(states >= 0)
        assert np.all(np.abs(np.diff(states)) == 1)
        times = np.array(path.event_times)
        assert np.all(np.diff(times) > 0)
        assert times.size == 0 or (times[0] > 0 and times[-1] <= 12.0)

    def test_deterministic_given_seed(self):
        a = simulate_coupled(1, 1.0, 12.0, 2000, seed=7)
        b = simulate_coupled(1, 1.0, 12.0, 2000, seed=7)
        c = simulate_coupled(1, 1.0, 12.0, 2000, seed=8)
        assert a.diag2 == b.diag2 and a.diag3 == b.diag3
        assert np.array_equal(a.terminal_states, b.terminal_states)
        assert a.diag2 != c.diag2

    def test_diag2_estimate_hits_closed_form(self):
        est = simulate_coupled(1, 1.0, 14.0, 20_000, seed=20240811)
        want = math.exp(-1)
        assert abs(est.diag2 - want) <= 3 * est.diag2_se
        assert est.diag2_se < 0.01

    def test_diag3_estimate_hits_closed_form(self):
        est = simulate_coupled(1, 1.0, 14.0, 20_000, seed=20240812)
        want = 1 - 2 * math.exp(-1)
        assert abs(est.diag3 - want) <= 3 * est.diag3_se

    def test_quadratic_increment_integral(self):
        # integral of e^{-t} E[2 X_t + 1] dt from a start at i-1 is lam + i.
        for i, lam, seed in [(1, 1.0, 5), (3, 2.0, 6)]:
            est = simulate_coupled(i, lam, 16.0, 20_000, seed=seed)
            assert abs(est.quad_increment - (lam + i)) <= 3 * est.quad_increment_se

    def test_terminal_law_close_to_stationary(self):
        est = simulate_coupled(1, 1.0, 20.0, 20_000, seed=20240813)
        counts = np.bincount(est.terminal_states, minlength=25)[:25]
        empirical = pmf_from_probs(counts / counts.sum())
        pi = poisson_pmf(1.0)
        cost = make_cost("linear", 1.0, 30)
        dist = wasserstein_rho(empirical, pi, cost).distance
        assert dist < 0.02

    def test_coupled_upper_path_shifts_by_clock(self):
        est = simulate_coupled(3, 1.0, 12.0, 5000, seed=9)
        gap = est.terminal_states_upper - est.terminal_states
        assert np.all((gap == 0) | (gap == 1))
        # the clock survives past T = 12 almost never
        assert gap.mean() < 0.01

    def test_occupancy_bounded_by_mode_majorant(self):
        # at the horizon the chance of sitting exactly at the start state
        # never beats the best-state bound for a start at zero.
        i, lam, T = 4, 1.5, 10.0
        est = simulate_coupled(i, lam, T, 20_000, seed=20240814)
        hit = float(np.mean(est.terminal_states == i - 1))
        se = math.sqrt(hit * (1 - hit) / est.n_paths) + 1e-12
        best = float(np.max(semigroup_row(0, T, lam, 40)))
        assert hit <= best + 3 * se

    def test_preconditions(self):
        with pytest.raises(InvalidArgumentError):
            simulate_coupled(1, 1.0, 12.0, 999, seed=1)
        with pytest.raises(InvalidArgumentError):
            simulate_coupled(1, 1.0, 5.0, 2000, seed=1)  # e^{-2T} too large
        with pytest.raises(InvalidArgumentError):
            simulate_coupled(0, 1.0, 12.0, 2000, seed=1)
