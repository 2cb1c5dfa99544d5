"""Figure rendering for report paths: each helper draws one summary figure
for a report object and writes it to a file.

Rendering is off-screen (Agg backend); helpers return the path written.
Figures are companions to the delimited output, never a substitute.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_scan_figure",
    "render_conjecture_figure",
    "render_simulate_figure",
]


def render_scan_figure(report, path, factor_rows=None) -> str:
    """Smoothing constants over the rate grid, with their envelopes.

    ``factor_rows``, when given, is a list of (lam, exact, bounds) tuples
    that adds an exact-vs-bound panel.
    """
    n_panels = 2 if factor_rows else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6.4 * n_panels, 4.8))
    ax = axes[0] if factor_rows else axes
    lams = [row.lam for row in report.rows]
    ax.plot(lams, [row.xi1 for row in report.rows], label="first-order constant")
    ax.plot(lams, [row.xi2 for row in report.rows], label="second-order constant")
    ax.plot(lams, [row.envelope1 for row in report.rows], "--",
            label="first envelope")
    ax.plot(lams, [row.envelope2 for row in report.rows], "--",
            label="second envelope")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("rate")
    ax.set_ylabel("constant")
    ax.legend()
    ax.set_title("smoothing constants vs rate")
    if factor_rows:
        ax2 = axes[1]
        ls = [row[0] for row in factor_rows]
        for k in range(3):
            ax2.plot(ls, [row[1][k] for row in factor_rows],
                     label=f"exact order {k}")
            ax2.plot(ls, [row[2][k] for row in factor_rows], "--",
                     label=f"cap order {k}")
        ax2.set_xscale("log")
        ax2.set_yscale("log")
        ax2.set_xlabel("rate")
        ax2.legend(fontsize="small")
        ax2.set_title("exact factors vs closed-form caps")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def render_conjecture_figure(report, path) -> str:
    """Log-log growth of the quadratic-mean distance and its cap."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    by_p: dict[float, list] = {}
    for row in report.rows:
        by_p.setdefault(row.p[0], []).append(row)
    fit_by_p = {fit.p: fit for fit in report.fits}
    for p, rows in sorted(by_p.items()):
        ns = [row.n for row in rows]
        fit = fit_by_p.get(p)
        tag = f" (slope {fit.slope_exact2:.2f})" if fit else ""
        ax.plot(ns, [row.exact2 for row in rows], "o-",
                label=f"exact, p={p:g}{tag}")
        tag = f" (slope {fit.slope_bound2:.2f})" if fit else ""
        ax.plot(ns, [row.bound2 for row in rows], "s--",
                label=f"cap, p={p:g}{tag}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("number of summands")
    ax.set_ylabel("quadratic-mean distance")
    ax.legend(fontsize="small")
    ax.set_title("distance growth across coin families")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def render_simulate_figure(est, path) -> str:
    """Empirical terminal-state law of the simulated paths."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    counts = np.bincount(est.terminal_states)
    states = np.arange(len(counts))
    ax.bar(states, counts / est.n_paths, width=0.8, alpha=0.6,
           label="empirical terminal law")
    ax.set_xlabel("state")
    ax.set_ylabel("frequency")
    ax.set_title(
        f"terminal law after horizon {est.horizon:g} "
        f"({est.n_paths} paths, seed {est.seed})"
    )
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
