"""Front-end tests: flag parsing, exit codes, report shape, and
byte-level determinism of the emitted artifacts."""

import json
import math
import subprocess
import sys

import pytest

from rdp import cli, model
from rdp.polyring import parse


def run_cli(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, argv):
    code, out = run_cli(capsys, argv)
    assert code == 0, out
    return json.loads(out)


# ---------------------------------------------------------------------
# report conventions


class TestReportShape:
    def test_version_and_echo_present(self, capsys):
        doc = run_json(capsys, ["bif-q", "--delta", "1/5", "--sigma", "1/3",
                                "--chi", "1/3", "--which", "dd"])
        assert doc["tool_version"]
        assert doc["input"]["argv"][0] == "bif-q"

    def test_byte_identical_reruns(self, capsys):
        argv = ["equilibria", "--delta", "1/5", "--sigma", "1/3",
                "--chi", "1/3", "--Q", "3/5"]
        _, first = run_cli(capsys, argv)
        _, second = run_cli(capsys, argv)
        assert first == second

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "out.json"
        code, out = run_cli(capsys, ["--output", str(target), "single",
                                     "--Q", "0.75"])
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["equilibria"]

    def test_sorted_keys(self, capsys):
        _, out = run_cli(capsys, ["coeffs", "--delta", "1/5",
                                  "--sigma", "1/3"])

        def check(pairs):
            keys = [k for k, _ in pairs]
            assert keys == sorted(keys)
            return dict(pairs)

        json.loads(out, object_pairs_hook=check)


# ---------------------------------------------------------------------
# subcommands


class TestSubcommands:
    def test_bif_q_reference_values(self, capsys):
        doc = run_json(capsys, ["bif-q", "--delta", "1/5", "--sigma", "1/3",
                                "--chi", "1/3", "--which", "dd"])
        got = [round(v, 6) for v in doc["Q"]]
        assert got == [0.494007, 0.850531]

    def test_params_point_mass_shapes(self, capsys, tmp_path):
        cfg = tmp_path / "phys.json"
        cfg.write_text(json.dumps(
            {"m1": 1, "m2": 1, "l1": 1, "l": 1, "l2": "4/3"}))
        doc = run_json(capsys, ["params", "--config", str(cfg)])
        m = doc["model"]
        assert m["delta"] == "5/29"
        assert m["sigma"] == "1/17"
        assert m["chi"] == "1/5"
        assert m["Q"] == 0

    def test_params_rejects_model_record(self, capsys, tmp_path):
        cfg = tmp_path / "m.json"
        cfg.write_text(json.dumps({"delta": "1/5", "sigma": "1/3"}))
        code, _ = run_cli(capsys, ["params", "--config", str(cfg)])
        assert code == 2

    def test_coeffs_exact_fractions(self, capsys):
        doc = run_json(capsys, ["coeffs", "--delta", "1/5",
                                "--sigma", "1/3"])
        assert doc["coeffs"]["a"] == "8/5"
        assert doc["coeffs"]["b"] == "4/5"
        assert doc["coeffs"]["c"] == "4/5"

    def test_system_reparses_exactly(self, capsys):
        doc = run_json(capsys, ["system", "--kind", "halftangent"])
        sys_ = model.build_system("halftangent")
        for name, p in sys_.polys:
            assert parse(doc["polys"][name], sys_.varset) == p

    def test_system_text_emit(self, capsys):
        code, out = run_cli(capsys, ["system", "--kind", "equilibrium",
                                     "--emit", "text"])
        assert code == 0
        assert "grad1 = " in out

    def test_equilibria_no_rotation(self, capsys):
        doc = run_json(capsys, ["equilibria", "--delta", "1/5",
                                "--sigma", "1/3", "--chi", "1/3",
                                "--Q", "0"])
        assert len(doc["equilibria"]) == 4
        assert all(e["origin"] == "trivial" for e in doc["equilibria"])

    def test_equilibria_csv(self, capsys):
        code, out = run_cli(capsys, ["--format", "csv", "equilibria",
                                     "--delta", "1/5", "--sigma", "1/3",
                                     "--chi", "1/3", "--Q", "0"])
        assert code == 0
        rows = [r for r in out.splitlines() if not r.startswith("#")]
        assert rows[0].startswith("theta,phi,")
        assert len(rows) == 5

    def test_single_tilted_branch(self, capsys):
        doc = run_json(capsys, ["single", "--Q", "3/4"])
        thetas = sorted(round(r["theta"], 6) for r in doc["equilibria"])
        tilt = round(math.acos(1 / 3), 6)
        assert thetas == sorted([0.0, round(math.pi, 6), tilt, -tilt])
        at_zero = [r for r in doc["equilibria"] if r["theta"] == 0.0][0]
        assert at_zero["mode"] == "exponential"
        assert abs(at_zero["rate"] - math.sqrt(0.5)) < 1e-12

    def test_scan_csv_grid(self, capsys):
        code, out = run_cli(capsys, ["scan", "--surface", "dd", "--grid",
                                     "d=1:1.5:3,s=1:1:1,chi=1/3:1/3:1,"
                                     "Q=0.2:0.4:2"])
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# tool_version=")
        body = [l for l in lines if not l.startswith("#")]
        assert body[0] == "d,s,chi,Q,value"
        assert len(body) == 7
        for row in body[1:]:
            float(row.split(",")[-1])

    def test_scan_json_format(self, capsys):
        q1 = (10 - 5 * math.sqrt(2)) / 3
        Q = q1 / (1 + q1)
        doc = run_json(capsys, ["--format", "json", "scan", "--surface",
                                "dd", "--grid",
                                "delta=0.2:0.2:1,sigma=1/3:1/3:1,"
                                f"Q={Q!r}:{Q!r}:1", "--pmmr"])
        assert abs(doc["values"][0]) < 1e-6

    def test_simulate_fixed_point(self, capsys, tmp_path):
        cfg = tmp_path / "m.json"
        cfg.write_text(json.dumps(
            {"delta": "1/5", "sigma": "1/3", "chi": "1/3"}))
        doc = run_json(capsys, ["simulate", "--config", str(cfg),
                                "--Q", "1/4", "--dt", "1e-3",
                                "--steps", "10"])
        assert doc["drift"] == 0
        assert len(doc["states"]) == 11
        assert all(v == 0 for v in doc["states"][-1])

    def test_simulate_csv(self, capsys, tmp_path):
        cfg = tmp_path / "m.json"
        cfg.write_text(json.dumps({"delta": 0, "sigma": 0}))
        code, out = run_cli(capsys, ["--format", "csv", "simulate",
                                     "--config", str(cfg), "--Q", "0",
                                     "--state0", "0.1,0,0,0",
                                     "--dt", "1e-3", "--steps", "5"])
        assert code == 0
        body = [l for l in out.splitlines() if not l.startswith("#")]
        assert body[0] == "time,theta,phi,theta_dot,phi_dot,jacobi"
        assert len(body) == 7


# ---------------------------------------------------------------------
# exit codes


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert cli.main(["bif-q", "--delta", "1/5"]) == 1
        assert cli.main(["no-such-command"]) == 1
        assert cli.main([]) == 1

    def test_bad_rational_is_one(self, capsys):
        assert cli.main(["bif-q", "--delta", "x", "--sigma", "0",
                         "--chi", "0", "--which", "dd"]) == 1

    def test_validation_error_is_two(self, capsys):
        code = cli.main(["bif-q", "--delta", "3", "--sigma", "0",
                         "--chi", "0", "--which", "dd"])
        assert code == 2

    def test_missing_config_is_two(self, capsys):
        assert cli.main(["params", "--config", "/no/such/file.json"]) == 2

    def test_singular_mass_is_two(self, capsys, tmp_path):
        cfg = tmp_path / "m.json"
        cfg.write_text(json.dumps({"delta": 1, "sigma": 1}))
        code = cli.main(["simulate", "--config", str(cfg), "--Q", "1/4",
                         "--state0", "0.1,0,0,0", "--dt", "1e-3",
                         "--steps", "5"])
        assert code == 2

    def test_time_budget_is_three(self, tmp_path):
        cfg = tmp_path / "m.json"
        cfg.write_text(json.dumps({"delta": "1/5", "sigma": "1/3"}))
        proc = subprocess.run(
            [sys.executable, "-m", "rdp.cli", "--max-seconds", "0.3",
             "simulate", "--config", str(cfg), "--Q", "1/5",
             "--state0", "0.1,0,0,0", "--dt", "1e-4",
             "--steps", "30000000"],
            capture_output=True, text=True, timeout=120)
        assert proc.returncode == 3
        assert "budget" in proc.stderr
