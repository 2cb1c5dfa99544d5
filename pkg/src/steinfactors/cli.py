"""Command-line front end: every computation in the library, with
reproducible machine-readable output.

Output is JSON (with a ``schema`` version field) or CSV (with a mandatory
header row); every number carries enough digits to re-verify against the
library API, and identical inputs plus configuration produce byte-identical
output.  Exit codes: 0 on success, 2 when a computed invariant or bound is
violated, 1 on usage errors (including malformed input files, reported with
their line number).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .bounds import scan_constants, theorem_bounds
from .certificates import certificate, conjecture_scan
from .costs import make_cost
from .distributions import Pmf, pmf_from_probs, poisson_pmf
from .errors import (
    CertificationError,
    ConstantViolationError,
    InvalidArgumentError,
    NumericFailureError,
    SolverFailureError,
)
from .semigroup import simulate_coupled
from .stein import exact_factors
from .transport import wasserstein_p, wasserstein_rho

__all__ = ["run", "main"]

_ENV_EPS = "STEINFACTORS_EPS_TAIL"
_ENV_SEED = "STEINFACTORS_SEED"
_LAMBDA_LO = 1e-8
_LAMBDA_HI = 1e4
_RHO_CHOICES = ("r1", "r2", "rhalf", "table")


# --------------------------------------------------------------------------
# Input parsing.
# --------------------------------------------------------------------------

def _parse_grid(spec: str) -> list[float]:
    """Grid spec: either comma-separated values or lo:hi:count[:log|lin]."""
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) == 3:
                parts.append("log")
            if len(parts) != 4 or parts[3] not in ("log", "lin"):
                raise ValueError("expected lo:hi:count[:log|lin]")
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if not (0 < lo <= hi) or count < 1:
                raise ValueError("need 0 < lo <= hi and count >= 1")
            if count == 1:
                return [lo]
            if parts[3] == "log":
                return list(np.geomspace(lo, hi, count))
            return list(np.linspace(lo, hi, count))
        values = [float(v) for v in spec.split(",") if v.strip()]
        if not values:
            raise ValueError("empty grid")
        return values
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid spec {spec!r}: {exc}") from exc


def _parse_family(spec: str) -> dict:
    """Family spec P:N1,N2,... — one success probability, several sizes."""
    try:
        head, _, tail = spec.partition(":")
        p = float(head)
        sizes = [int(v) for v in tail.split(",") if v.strip()]
        if not tail or not sizes:
            raise ValueError("expected P:N1,N2,...")
        return {"p": p, "n": sizes}
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad family spec {spec!r}: {exc}") from exc


def _load_lines(path: str) -> list[tuple[int, str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"{path}: cannot read ({exc})") from exc
    return [
        (lineno, line.strip())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]


def _load_pmf(path: str) -> Pmf:
    """Read a law from a two-column index,prob file."""
    entries: dict[int, float] = {}
    rows = _load_lines(path)
    for lineno, line in rows:
        if lineno == rows[0][0] and line.replace(" ", "").lower() == "index,prob":
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise InvalidArgumentError(
                f"{path}:{lineno}: expected two columns index,prob"
            )
        try:
            idx = int(parts[0])
            prob = float(parts[1])
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}:{lineno}: {exc}") from exc
        if idx < 0:
            raise InvalidArgumentError(f"{path}:{lineno}: index must be >= 0")
        if not math.isfinite(prob) or prob < 0:
            raise InvalidArgumentError(
                f"{path}:{lineno}: probability must be a finite non-negative real"
            )
        if idx in entries:
            raise InvalidArgumentError(f"{path}:{lineno}: duplicate index {idx}")
        entries[idx] = prob
    if not entries:
        raise InvalidArgumentError(f"{path}: no probability entries found")
    probs = np.zeros(max(entries) + 1)
    for idx, prob in entries.items():
        probs[idx] = prob
    try:
        return pmf_from_probs(probs)
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc


def _load_column(path: str, what: str) -> np.ndarray:
    """Read a one-value-per-line column of reals."""
    values = []
    for lineno, line in _load_lines(path):
        try:
            values.append(float(line))
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}:{lineno}: {exc}") from exc
    if not values:
        raise InvalidArgumentError(f"{path}: no {what} entries found")
    return np.asarray(values)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or not (_LAMBDA_LO <= lam <= _LAMBDA_HI):
        raise InvalidArgumentError(
            f"lambda must lie in [{_LAMBDA_LO:g}, {_LAMBDA_HI:g}], got {lam!r}"
        )
    return lam


def _resolve_eps(ns: argparse.Namespace) -> float:
    eps = ns.eps_tail
    if eps is None:
        raw = os.environ.get(_ENV_EPS)
        if raw is not None:
            try:
                eps = float(raw)
            except ValueError as exc:
                raise InvalidArgumentError(
                    f"bad {_ENV_EPS} value {raw!r}: {exc}"
                ) from exc
        else:
            eps = 1e-12
    if not (0.0 < eps <= 1e-3):
        raise InvalidArgumentError(
            f"eps_tail must lie in (0, 1e-3], got {eps!r}"
        )
    return float(eps)


def _resolve_seed(ns: argparse.Namespace) -> int:
    if ns.seed is not None:
        return int(ns.seed)
    raw = os.environ.get(_ENV_SEED)
    if raw is not None:
        try:
            return int(raw)
        except ValueError as exc:
            raise InvalidArgumentError(
                f"bad {_ENV_SEED} value {raw!r}: {exc}"
            ) from exc
    return 0


def _build_cost(rho: str, lam: float, reach: int, table_path: str | None):
    if rho == "table":
        if table_path is None:
            raise InvalidArgumentError("--rho table needs --table FILE")
        values = _load_column(table_path, "cost value")
        return make_cost("table", lam, len(values) - 4, values=values)
    if rho == "rhalf" and lam is None:
        raise InvalidArgumentError("--rho rhalf needs --lambda")
    kind = {"r1": "linear", "r2": "power", "rhalf": "sqrt_case"}[rho]
    return make_cost(kind, 1.0 if lam is None else lam, reach,
                     p=2.0 if rho == "r2" else None)


# --------------------------------------------------------------------------
# Output rendering.
# --------------------------------------------------------------------------

def _jsonify(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    return value


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    if isinstance(value, (np.floating, float)):
        return f"{float(value):.17g}"
    return str(value)


def _emit(ns: argparse.Namespace, payload: dict, header: list[str],
          rows: list[list]) -> None:
    if ns.format == "json":
        text = json.dumps(_jsonify({"schema": 1, **payload}),
                          sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        text = buf.getvalue()
    if ns.output:
        Path(ns.output).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# Subcommand handlers.
# --------------------------------------------------------------------------

def _factors_payload(cost, lam: float, pmf: Pmf):
    ex = exact_factors(cost, lam, pmf)
    fb = theorem_bounds(cost, lam, pmf)
    return ex, fb


def _cmd_factors(ns: argparse.Namespace) -> int:
    lam = _check_lambda(ns.lam)
    eps = _resolve_eps(ns)
    pmf = poisson_pmf(lam, eps_tail=eps)
    cost = _build_cost(ns.rho, lam, pmf.trunc_index, ns.table)
    ex, fb = _factors_payload(cost, lam, pmf)
    payload = {
        "command": "factors",
        "rho": ns.rho,
        "lambda": lam,
        "eps_tail": eps,
        "exact": {
            "M0": ex.M0, "M1": ex.M1, "M2": ex.M2,
            "argmax0": ex.argmax0, "argmax1": ex.argmax1, "argmax2": ex.argmax2,
            "b0": ex.b0, "b1": ex.b1, "b2": ex.b2,
            "tail_class": list(ex.tail_class),
            "m1_exact": ex.m1_exact,
        },
        "bounds": {
            "B0": fb.B0, "B1": fb.B1, "B2": fb.B2,
            "xi1": fb.xi1, "xi2": fb.xi2,
            "lip_dh": fb.lip_dh, "lip_d2h": fb.lip_d2h,
            "norm_Qinv": fb.norm_Qinv, "mode": fb.mode,
        },
    }
    header = ["rho", "lambda", "M0", "M1", "M2", "argmax0", "argmax1",
              "argmax2", "b0", "b1", "b2", "tail0", "tail1", "tail2",
              "m1_exact", "B0", "B1", "B2", "xi1", "xi2", "lip_dh",
              "lip_d2h", "norm_Qinv", "mode"]
    row = [ns.rho, lam, ex.M0, ex.M1, ex.M2, ex.argmax0, ex.argmax1,
           ex.argmax2, ex.b0, ex.b1, ex.b2, *ex.tail_class, ex.m1_exact,
           fb.B0, fb.B1, fb.B2, fb.xi1, fb.xi2, fb.lip_dh, fb.lip_d2h,
           fb.norm_Qinv, fb.mode]
    _emit(ns, payload, header, [row])
    for name, exact, cap in (("M0", ex.M0, fb.B0), ("M1", ex.M1, fb.B1),
                             ("M2", ex.M2, fb.B2)):
        if math.isfinite(cap) and exact > cap + 1e-9:
            print(f"violation: {name} = {exact!r} exceeds its cap {cap!r}",
                  file=sys.stderr)
            return 2
    return 0


def _cmd_scan(ns: argparse.Namespace) -> int:
    eps = _resolve_eps(ns)
    report = scan_constants(ns.grid)
    header = ["lambda", "xi1", "xi2", "envelope1", "envelope2", "ok1", "ok2"]
    rows = [[r.lam, r.xi1, r.xi2, r.envelope1, r.envelope2, r.ok1, r.ok2]
            for r in report.rows]
    payload_rows = [
        {"lambda": r.lam, "xi1": r.xi1, "xi2": r.xi2,
         "envelope1": r.envelope1, "envelope2": r.envelope2,
         "ok1": r.ok1, "ok2": r.ok2}
        for r in report.rows
    ]
    factor_rows = None
    if ns.cost is not None:
        header += ["M0", "M1", "M2", "B0", "B1", "B2"]
        factor_rows = []
        for k, r in enumerate(report.rows):
            lam = _check_lambda(r.lam)
            pmf = poisson_pmf(lam, eps_tail=eps)
            cost = _build_cost(ns.cost, lam, pmf.trunc_index, ns.table)
            ex, fb = _factors_payload(cost, lam, pmf)
            exact = (ex.M0, ex.M1, ex.M2)
            caps = (fb.B0, fb.B1, fb.B2)
            factor_rows.append((lam, exact, caps))
            rows[k] += [*exact, *caps]
            payload_rows[k].update(
                M0=ex.M0, M1=ex.M1, M2=ex.M2, B0=fb.B0, B1=fb.B1, B2=fb.B2
            )
    payload = {
        "command": "scan",
        "eps_tail": eps,
        "rows": payload_rows,
        "max_sqrt_xi1": report.max_sqrt_xi1,
        "max_sqrt_xi2": report.max_sqrt_xi2,
    }
    if ns.figure:
        from .figures import render_scan_figure

        render_scan_figure(report, ns.figure, factor_rows)
    _emit(ns, payload, header, rows)
    violated = [
        (exact[k], caps[k])
        for (_, exact, caps) in (factor_rows or [])
        for k in range(3)
        if math.isfinite(caps[k]) and exact[k] > caps[k] + 1e-9
    ]
    if violated:
        print(f"violation: {len(violated)} factor(s) exceed their caps",
              file=sys.stderr)
        return 2
    return 0


def _cmd_wasserstein(ns: argparse.Namespace) -> int:
    nu1 = _load_pmf(ns.nu1)
    nu2 = _load_pmf(ns.nu2)
    reach = max(nu1.trunc_index, nu2.trunc_index) + 1
    lam = None if ns.lam is None else _check_lambda(ns.lam)
    cost = _build_cost(ns.rho, lam, reach, ns.table)
    res = wasserstein_rho(nu1, nu2, cost)
    payload = {
        "command": "wasserstein",
        "rho": ns.rho,
        "nu1": ns.nu1,
        "nu2": ns.nu2,
        "distance": res.distance,
        "method": res.method,
        "error_bar": res.error_bar,
    }
    header = ["rho", "distance", "method", "error_bar"]
    _emit(ns, payload, header, [[ns.rho, res.distance, res.method,
                                 res.error_bar]])
    return 0


def _cmd_w2(ns: argparse.Namespace) -> int:
    nu1 = _load_pmf(ns.nu1)
    nu2 = _load_pmf(ns.nu2)
    value = wasserstein_p(nu1, nu2, 2.0)
    payload = {"command": "w2", "nu1": ns.nu1, "nu2": ns.nu2, "w2": value}
    _emit(ns, payload, ["w2"], [[value]])
    return 0


def _cmd_poibin(ns: argparse.Namespace) -> int:
    probs = _load_column(ns.probs, "probability")
    cert = certificate(probs)
    payload = {
        "command": "poibin",
        "probs": ns.probs,
        "n": cert.n, "mu": cert.mu, "mu2": cert.mu2, "mu3": cert.mu3,
        "lambda": cert.lam, "shift": cert.shift,
        "bound1": cert.bound1, "bound2": cert.bound2,
        "exact1": cert.exact1, "exact2": cert.exact2,
        "error_bar": cert.error_bar,
        "mu2_is_integer": cert.mu2_is_integer,
        "lam_positive": cert.lam_positive,
        "valid": cert.valid,
    }
    header = ["n", "mu", "mu2", "mu3", "lambda", "shift", "bound1", "bound2",
              "exact1", "exact2", "error_bar", "mu2_is_integer",
              "lam_positive", "valid"]
    row = [cert.n, cert.mu, cert.mu2, cert.mu3, cert.lam, cert.shift,
           cert.bound1, cert.bound2, cert.exact1, cert.exact2,
           cert.error_bar, cert.mu2_is_integer, cert.lam_positive, cert.valid]
    _emit(ns, payload, header, [row])
    if not cert.valid:
        print("violation: instance is not certifiable "
              "(fractional squared-sum or zero rate)", file=sys.stderr)
        return 2
    if cert.exact1 > cert.bound1 + 1e-9 or cert.exact2 > cert.bound2 + 1e-9:
        print("violation: an exact distance exceeds its certified cap",
              file=sys.stderr)
        return 2
    return 0


def _cmd_conjecture(ns: argparse.Namespace) -> int:
    report = conjecture_scan(ns.family)
    fit_by_p = {fit.p: fit for fit in report.fits}
    header = ["p", "n", "mu", "mu2", "mu3", "lambda", "shift", "bound1",
              "bound2", "exact1", "exact2", "ratio2", "slope_exact2",
              "slope_bound2"]
    rows = []
    payload_rows = []
    for cert in report.rows:
        fit = fit_by_p.get(cert.p[0])
        rows.append([
            cert.p[0], cert.n, cert.mu, cert.mu2, cert.mu3, cert.lam,
            cert.shift, cert.bound1, cert.bound2, cert.exact1, cert.exact2,
            cert.exact2 / cert.bound2,
            fit.slope_exact2 if fit else None,
            fit.slope_bound2 if fit else None,
        ])
        payload_rows.append({
            "p": cert.p[0], "n": cert.n, "mu": cert.mu, "mu2": cert.mu2,
            "mu3": cert.mu3, "lambda": cert.lam, "shift": cert.shift,
            "bound1": cert.bound1, "bound2": cert.bound2,
            "exact1": cert.exact1, "exact2": cert.exact2,
            "error_bar": cert.error_bar,
            "ratio2": cert.exact2 / cert.bound2,
        })
    payload = {
        "command": "conjecture",
        "rows": payload_rows,
        "skipped": list(report.skipped),
        "fits": [
            {"p": fit.p, "slope_exact2": fit.slope_exact2,
             "slope_bound2": fit.slope_bound2}
            for fit in report.fits
        ],
    }
    if ns.figure:
        from .figures import render_conjecture_figure

        render_conjecture_figure(report, ns.figure)
    _emit(ns, payload, header, rows)
    if any(cert.exact2 > cert.bound2 + 1e-9 for cert in report.rows):
        print("violation: a scanned instance exceeds its certified cap",
              file=sys.stderr)
        return 2
    return 0


def _cmd_simulate(ns: argparse.Namespace) -> int:
    lam = _check_lambda(ns.lam)
    seed = _resolve_seed(ns)
    est = simulate_coupled(ns.i, lam, ns.horizon, ns.paths, seed)
    payload = {
        "command": "simulate",
        "i": est.i,
        "lambda": est.lam,
        "horizon": est.horizon,
        "n_paths": est.n_paths,
        "seed": est.seed,
        "estimates": {
            "diag2": {"estimate": est.diag2, "std_error": est.diag2_se},
            "diag3": {"estimate": est.diag3, "std_error": est.diag3_se},
            "quad_increment": {
                "estimate": est.quad_increment,
                "std_error": est.quad_increment_se,
            },
        },
    }
    header = ["name", "estimate", "std_error", "n_paths", "seed"]
    rows = [
        ["diag2", est.diag2, est.diag2_se, est.n_paths, est.seed],
        ["diag3", est.diag3, est.diag3_se, est.n_paths, est.seed],
        ["quad_increment", est.quad_increment, est.quad_increment_se,
         est.n_paths, est.seed],
    ]
    if ns.figure:
        from .figures import render_simulate_figure

        render_simulate_figure(est, ns.figure)
    _emit(ns, payload, header, rows)
    return 0


# --------------------------------------------------------------------------
# Parser assembly and entry point.
# --------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--format", choices=("csv", "json"), default="json",
                     help="output format (default json)")
    sub.add_argument("--output", default=None, metavar="PATH",
                     help="write output to PATH instead of stdout")
    sub.add_argument("--eps-tail", dest="eps_tail", type=float, default=None,
                     help="Poisson truncation tail (default 1e-12, env "
                          f"{_ENV_EPS})")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steinfactors",
        description="Stein factors, factor caps, transport distances, and "
                    "Poisson-approximation certificates on the non-negative "
                    "integers.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("factors", help="exact factors and closed-form caps")
    p.add_argument("--rho", choices=_RHO_CHOICES, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--table", default=None, metavar="FILE",
                   help="cost values, one per line (for --rho table)")
    _add_common(p)
    p.set_defaults(handler=_cmd_factors)

    p = subs.add_parser("scan", help="smoothing-constant scan over a grid")
    p.add_argument("--grid", type=_parse_grid, required=True,
                   metavar="SPEC", help="lo:hi:count[:log|lin] or v1,v2,...")
    p.add_argument("--cost", choices=_RHO_CHOICES, default=None,
                   help="also tabulate exact factors and caps for this cost")
    p.add_argument("--table", default=None, metavar="FILE")
    p.add_argument("--figure", default=None, metavar="PATH",
                   help="render a figure of the scan to PATH")
    _add_common(p)
    p.set_defaults(handler=_cmd_scan)

    p = subs.add_parser("wasserstein",
                        help="transport distance between two laws")
    p.add_argument("--nu1", required=True, metavar="FILE")
    p.add_argument("--nu2", required=True, metavar="FILE")
    p.add_argument("--rho", choices=_RHO_CHOICES, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="rate (needed for --rho rhalf)")
    p.add_argument("--table", default=None, metavar="FILE")
    _add_common(p)
    p.set_defaults(handler=_cmd_wasserstein)

    p = subs.add_parser("w2", help="quadratic-mean transport distance")
    p.add_argument("--nu1", required=True, metavar="FILE")
    p.add_argument("--nu2", required=True, metavar="FILE")
    _add_common(p)
    p.set_defaults(handler=_cmd_w2)

    p = subs.add_parser("poibin",
                        help="certificate for a Bernoulli-sum instance")
    p.add_argument("--probs", required=True, metavar="FILE",
                   help="success probabilities, one per line")
    _add_common(p)
    p.set_defaults(handler=_cmd_poibin)

    p = subs.add_parser("conjecture", help="growth scan over coin families")
    p.add_argument("--family", type=_parse_family, action="append",
                   required=True, metavar="SPEC",
                   help="P:N1,N2,... (repeatable)")
    p.add_argument("--figure", default=None, metavar="PATH")
    _add_common(p)
    p.set_defaults(handler=_cmd_conjecture)

    p = subs.add_parser("simulate", help="coupled Monte-Carlo estimates")
    p.add_argument("--i", type=int, required=True,
                   help="state index (paths start at i-1)")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default 0, env {_ENV_SEED})")
    p.add_argument("--horizon", type=float, default=12.0)
    p.add_argument("--figure", default=None, metavar="PATH")
    _add_common(p)
    p.set_defaults(handler=_cmd_simulate)
    return parser


def run(argv) -> int:
    """Parse argv, dispatch, and map failures to exit codes."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(list(argv))
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return ns.handler(ns)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConstantViolationError, CertificationError, SolverFailureError,
            NumericFailureError) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
