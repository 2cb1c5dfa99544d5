"""End-to-end tests for the command-line front end.

Every numeric value printed by the CLI is compared against the library API
it delegates to, so these tests pin the serialization contract (schema
field, header rows, digit count, determinism, exit codes) rather than the
mathematics, which the module test suites already certify.
"""
from __future__ import annotations

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from steinfactors.certificates import certificate
from steinfactors.cli import run
from steinfactors.distributions import pmf_from_probs, poisson_pmf
from steinfactors.costs import make_cost
from steinfactors.semigroup import simulate_coupled
from steinfactors.transport import wasserstein_p, wasserstein_rho


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_pmf(tmp_path, name, pairs):
    path = tmp_path / name
    lines = ["index,prob"] + [f"{i},{p!r}" for i, p in pairs]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def write_column(tmp_path, name, values):
    path = tmp_path / name
    path.write_text("\n".join(repr(v) for v in values) + "\n")
    return str(path)


class TestFactorsCommand:
    def test_squared_profile_cap_is_rate_plus_one(self, capsys) -> None:
        code, out, _ = invoke(capsys, "factors", "--rho", "r2",
                              "--lambda", "1")
        assert code == 0
        doc = json.loads(out)
        assert doc["schema"] == 1
        assert doc["bounds"]["B0"] == pytest.approx(2.0, abs=1e-10)
        assert doc["bounds"]["norm_Qinv"] == pytest.approx(2.0, abs=1e-10)
        assert doc["exact"]["M0"] <= doc["bounds"]["B0"] + 1e-9

    def test_linear_profile_matches_closed_form(self, capsys) -> None:
        code, out, _ = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "1")
        assert code == 0
        doc = json.loads(out)
        want = 2.0 * (math.exp(-1.0) + 1.0 - 1.0) / 1.0
        assert doc["exact"]["M1"] == pytest.approx(want, abs=1e-9)

    def test_csv_round_trips_full_precision(self, capsys) -> None:
        code, out, _ = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "0.75", "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("rho,lambda,M0,M1,M2")
        cells = lines[1].split(",")
        m1 = float(cells[lines[0].split(",").index("M1")])
        want = 2.0 * (math.exp(-0.75) - 0.25) / 0.75**2
        assert m1 == pytest.approx(want, abs=1e-12)

    def test_deterministic_output(self, capsys) -> None:
        first = invoke(capsys, "factors", "--rho", "rhalf", "--lambda", "2")
        second = invoke(capsys, "factors", "--rho", "rhalf", "--lambda", "2")
        assert first == second
        assert first[0] == 0

    def test_table_cost_from_file(self, capsys, tmp_path) -> None:
        values = [float(i) for i in range(40)]
        table = write_column(tmp_path, "cost.txt", values)
        code, out, _ = invoke(capsys, "factors", "--rho", "table",
                              "--lambda", "1", "--table", table)
        assert code == 0
        doc = json.loads(out)
        # An explicit linear table reproduces the linear profile's factor.
        want = 2.0 * math.exp(-1.0)
        assert doc["exact"]["M1"] == pytest.approx(want, abs=1e-9)

    def test_table_without_file_is_usage_error(self, capsys) -> None:
        code, _, err = invoke(capsys, "factors", "--rho", "table",
                              "--lambda", "1")
        assert code == 1
        assert "--table" in err

    def test_lambda_domain_is_enforced(self, capsys) -> None:
        code, _, err = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "20000")
        assert code == 1
        assert "lambda" in err

    def test_unknown_flag_is_usage_error(self, capsys) -> None:
        code, _, _ = invoke(capsys, "factors", "--rho", "r1",
                            "--lambda", "1", "--bogus")
        assert code == 1

    def test_eps_tail_env_override(self, capsys, monkeypatch) -> None:
        monkeypatch.setenv("STEINFACTORS_EPS_TAIL", "1e-10")
        code, out, _ = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "1")
        assert code == 0
        assert json.loads(out)["eps_tail"] == 1e-10
        # An explicit flag wins over the environment.
        code, out, _ = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "1", "--eps-tail", "1e-9")
        assert json.loads(out)["eps_tail"] == 1e-9

    def test_bad_eps_tail_rejected(self, capsys, monkeypatch) -> None:
        code, _, err = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "1", "--eps-tail", "0.1")
        assert code == 1 and "eps_tail" in err
        monkeypatch.setenv("STEINFACTORS_EPS_TAIL", "not-a-number")
        code, _, err = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "1")
        assert code == 1 and "STEINFACTORS_EPS_TAIL" in err

    def test_output_file(self, capsys, tmp_path) -> None:
        target = tmp_path / "report.json"
        code, out, _ = invoke(capsys, "factors", "--rho", "r1",
                              "--lambda", "1", "--output", str(target))
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["schema"] == 1


class TestScanCommand:
    def test_explicit_grid(self, capsys) -> None:
        code, out, _ = invoke(capsys, "scan", "--grid", "0.5,1,2")
        assert code == 0
        doc = json.loads(out)
        assert [row["lambda"] for row in doc["rows"]] == [0.5, 1.0, 2.0]
        assert all(row["ok1"] and row["ok2"] for row in doc["rows"])

    def test_range_grid_csv(self, capsys) -> None:
        code, out, _ = invoke(capsys, "scan", "--grid", "1:10:5:log",
                              "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "lambda,xi1,xi2,envelope1,envelope2,ok1,ok2"
        assert len(lines) == 6

    def test_cost_columns(self, capsys) -> None:
        code, out, _ = invoke(capsys, "scan", "--grid", "1,2",
                              "--cost", "r2", "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].endswith("M0,M1,M2,B0,B1,B2")
        first = dict(zip(lines[0].split(","), lines[1].split(",")))
        assert float(first["B0"]) == pytest.approx(2.0, abs=1e-9)
        assert float(first["M0"]) <= float(first["B0"]) + 1e-9

    def test_bad_grid_is_usage_error(self, capsys) -> None:
        code, _, _ = invoke(capsys, "scan", "--grid", "1:2:3:bogus")
        assert code == 1
        code, _, _ = invoke(capsys, "scan", "--grid", "-1,2")
        assert code == 1

    def test_figure_rendered(self, capsys, tmp_path) -> None:
        fig = tmp_path / "scan.png"
        code, out, _ = invoke(capsys, "scan", "--grid", "0.5,1,2",
                              "--figure", str(fig))
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0
        assert json.loads(out)["rows"]


class TestTransportCommands:
    def test_identical_inputs_give_zero(self, capsys, tmp_path) -> None:
        a = write_pmf(tmp_path, "a.csv", [(0, 0.5), (1, 0.25), (2, 0.25)])
        b = write_pmf(tmp_path, "b.csv", [(0, 0.5), (1, 0.25), (2, 0.25)])
        code, out, _ = invoke(capsys, "wasserstein", "--nu1", a, "--nu2", b,
                              "--rho", "r1")
        assert code == 0
        assert json.loads(out)["distance"] == 0.0

    def test_squared_profile_matches_library(self, capsys, tmp_path) -> None:
        a = write_pmf(tmp_path, "a.csv", [(0, 0.5), (2, 0.5)])
        b = write_pmf(tmp_path, "b.csv", [(1, 1.0)])
        code, out, _ = invoke(capsys, "wasserstein", "--nu1", a, "--nu2", b,
                              "--rho", "r2")
        assert code == 0
        nu1 = pmf_from_probs([0.5, 0.0, 0.5])
        nu2 = pmf_from_probs([0.0, 1.0])
        cost = make_cost("power", 1.0, 3, p=2.0)
        want = wasserstein_rho(nu1, nu2, cost)
        doc = json.loads(out)
        assert doc["distance"] == pytest.approx(want.distance, abs=0)
        assert doc["method"] == "cdf"

    def test_malformed_pmf_reports_line(self, capsys, tmp_path) -> None:
        path = tmp_path / "bad.csv"
        path.write_text("index,prob\n0,0.5\nnot-a-row\n")
        code, _, err = invoke(capsys, "wasserstein", "--nu1", str(path),
                              "--nu2", str(path), "--rho", "r1")
        assert code == 1
        assert "bad.csv:3" in err

    def test_duplicate_index_reports_line(self, capsys, tmp_path) -> None:
        path = tmp_path / "dup.csv"
        path.write_text("0,0.5\n0,0.5\n")
        code, _, err = invoke(capsys, "wasserstein", "--nu1", str(path),
                              "--nu2", str(path), "--rho", "r1")
        assert code == 1
        assert "dup.csv:2" in err and "duplicate" in err

    def test_mass_deficit_rejected(self, capsys, tmp_path) -> None:
        a = write_pmf(tmp_path, "deficit.csv", [(0, 0.5), (1, 0.4)])
        code, _, err = invoke(capsys, "wasserstein", "--nu1", a, "--nu2", a,
                              "--rho", "r1")
        assert code == 1
        assert "deficit.csv" in err

    def test_missing_file(self, capsys, tmp_path) -> None:
        code, _, err = invoke(capsys, "wasserstein",
                              "--nu1", str(tmp_path / "absent.csv"),
                              "--nu2", str(tmp_path / "absent.csv"),
                              "--rho", "r1")
        assert code == 1
        assert "absent.csv" in err

    def test_rhalf_needs_lambda(self, capsys, tmp_path) -> None:
        a = write_pmf(tmp_path, "a.csv", [(0, 1.0)])
        code, _, err = invoke(capsys, "wasserstein", "--nu1", a, "--nu2", a,
                              "--rho", "rhalf")
        assert code == 1
        assert "lambda" in err

    def test_w2_matches_library(self, capsys, tmp_path) -> None:
        a = write_pmf(tmp_path, "a.csv", [(0, 0.5), (2, 0.5)])
        b = write_pmf(tmp_path, "b.csv", [(1, 1.0)])
        code, out, _ = invoke(capsys, "w2", "--nu1", a, "--nu2", b)
        assert code == 0
        want = wasserstein_p(pmf_from_probs([0.5, 0.0, 0.5]),
                             pmf_from_probs([0.0, 1.0]), 2.0)
        assert json.loads(out)["w2"] == pytest.approx(want, abs=0)


class TestPoibinCommand:
    def test_four_coins(self, capsys, tmp_path) -> None:
        probs = write_column(tmp_path, "four_halves.csv", [0.5] * 4)
        code, out, _ = invoke(capsys, "poibin", "--probs", probs)
        assert code == 0
        doc = json.loads(out)
        assert doc["bound1"] == pytest.approx(9.2304, abs=1e-3)
        want = certificate([0.5] * 4)
        assert doc["exact1"] == pytest.approx(want.exact1, abs=0)
        assert doc["exact2"] == pytest.approx(want.exact2, abs=0)
        assert doc["valid"] is True

    def test_invalid_instance_exits_two(self, capsys, tmp_path) -> None:
        probs = write_column(tmp_path, "bad.csv", [0.3, 0.3])
        code, out, err = invoke(capsys, "poibin", "--probs", probs)
        assert code == 2
        doc = json.loads(out)  # the report is still emitted
        assert doc["valid"] is False and doc["bound1"] is None
        assert "not certifiable" in err

    def test_malformed_probability_reports_line(self, capsys,
                                                tmp_path) -> None:
        path = tmp_path / "probs.csv"
        path.write_text("0.5\noops\n")
        code, _, err = invoke(capsys, "poibin", "--probs", str(path))
        assert code == 1
        assert "probs.csv:2" in err

    def test_csv_format(self, capsys, tmp_path) -> None:
        probs = write_column(tmp_path, "p.csv", [0.5] * 4)
        code, out, _ = invoke(capsys, "poibin", "--probs", probs,
                              "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))
        assert row["valid"] == "true"
        assert float(row["mu"]) == 2.0


class TestConjectureCommand:
    def test_doubling_family(self, capsys) -> None:
        code, out, _ = invoke(capsys, "conjecture",
                              "--family", "0.5:4,8,16,32")
        assert code == 0
        doc = json.loads(out)
        assert len(doc["rows"]) == 4
        assert doc["fits"] and math.isfinite(doc["fits"][0]["slope_bound2"])
        assert all(row["ratio2"] <= 1.0 for row in doc["rows"])

    def test_skipped_sizes_are_reported(self, capsys) -> None:
        code, out, _ = invoke(capsys, "conjecture", "--family", "0.5:4,5")
        assert code == 0
        doc = json.loads(out)
        assert len(doc["rows"]) == 1
        assert len(doc["skipped"]) == 1

    def test_csv_has_slope_columns(self, capsys) -> None:
        code, out, _ = invoke(capsys, "conjecture", "--family", "0.5:4,8",
                              "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].endswith("ratio2,slope_exact2,slope_bound2")
        assert len(lines) == 3

    def test_bad_family_spec(self, capsys) -> None:
        code, _, _ = invoke(capsys, "conjecture", "--family", "nope")
        assert code == 1

    def test_figure_rendered(self, capsys, tmp_path) -> None:
        fig = tmp_path / "conf.png"
        code, _, _ = invoke(capsys, "conjecture", "--family", "0.5:4,8",
                            "--figure", str(fig))
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestSimulateCommand:
    def test_estimates_match_library(self, capsys) -> None:
        code, out, _ = invoke(capsys, "simulate", "--i", "1", "--lambda", "1",
                              "--paths", "2000", "--seed", "7")
        assert code == 0
        doc = json.loads(out)
        want = simulate_coupled(1, 1.0, 12.0, 2000, 7)
        assert doc["estimates"]["diag2"]["estimate"] == pytest.approx(
            want.diag2, abs=0
        )
        assert doc["estimates"]["quad_increment"]["std_error"] > 0
        assert doc["n_paths"] == 2000 and doc["seed"] == 7

    def test_deterministic_given_seed(self, capsys) -> None:
        first = invoke(capsys, "simulate", "--i", "2", "--lambda", "0.5",
                       "--paths", "1500", "--seed", "3")
        second = invoke(capsys, "simulate", "--i", "2", "--lambda", "0.5",
                        "--paths", "1500", "--seed", "3")
        assert first == second

    def test_seed_env_default(self, capsys, monkeypatch) -> None:
        monkeypatch.setenv("STEINFACTORS_SEED", "11")
        code, out, _ = invoke(capsys, "simulate", "--i", "1", "--lambda", "1",
                              "--paths", "1000")
        assert code == 0
        assert json.loads(out)["seed"] == 11

    def test_too_few_paths_is_usage_error(self, capsys) -> None:
        code, _, err = invoke(capsys, "simulate", "--i", "1", "--lambda", "1",
                              "--paths", "10", "--seed", "1")
        assert code == 1
        assert "paths" in err

    def test_csv_rows(self, capsys) -> None:
        code, out, _ = invoke(capsys, "simulate", "--i", "1", "--lambda", "1",
                              "--paths", "1000", "--seed", "5",
                              "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "name,estimate,std_error,n_paths,seed"
        assert [ln.split(",")[0] for ln in lines[1:]] == [
            "diag2", "diag3", "quad_increment"
        ]

    def test_figure_rendered(self, capsys, tmp_path) -> None:
        fig = tmp_path / "paths.png"
        code, _, _ = invoke(capsys, "simulate", "--i", "1", "--lambda", "1",
                            "--paths", "1000", "--seed", "2",
                            "--figure", str(fig))
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestEntryPoint:
    def test_module_invocation(self) -> None:
        proc = subprocess.run(
            [sys.executable, "-m", "steinfactors.cli", "factors",
             "--rho", "r1", "--lambda", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["schema"] == 1

    def test_no_subcommand_is_usage_error(self) -> None:
        proc = subprocess.run(
            [sys.executable, "-m", "steinfactors.cli"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
