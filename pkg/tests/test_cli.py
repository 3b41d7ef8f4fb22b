"""Command-line interface: config validation, commands, exit codes.

Most tests call main() in process for speed; one subprocess test checks
the installed console script end to end.
"""
import json
import subprocess
import sys

import pytest

from oscpot import cli

COS_TRAVELLING = [{"m": [1], "n": -1, "re": 0.5, "im": 0.0},
                  {"m": [-1], "n": 1, "re": 0.5, "im": 0.0}]
# cos(2 pi y) sin(2 pi tau): tau-mean free, zero full mean
COS_Y_SIN_TAU = [{"m": [1], "n": 1, "re": 0.0, "im": -0.25},
                 {"m": [1], "n": -1, "re": 0.0, "im": 0.25},
                 {"m": [-1], "n": 1, "re": 0.0, "im": -0.25},
                 {"m": [-1], "n": -1, "re": 0.0, "im": 0.25}]


def base_config(**extra) -> dict:
    cfg = {
        "potential": {"d": 1, "modes": COS_TRAVELLING},
        "regime": {"k": 2.0},
        "problem": {"T": 0.125, "g": [{"amp": 1.0, "j": [1]}]},
    }
    cfg.update(extra)
    return cfg


@pytest.fixture
def write_cfg(tmp_path):
    def _write(cfg: dict, name: str = "cfg.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return str(path)
    return _write


def run_cli(command: str, cfg_path: str, outdir, *flags) -> int:
    return cli.main([command, "--config", cfg_path, "--out", str(outdir),
                     *flags])


# ---------------------------------------------------------------------------
# Config errors (exit 1)
# ---------------------------------------------------------------------------

class TestConfigErrors:
    def test_missing_file(self, tmp_path, capsys):
        code = run_cli("verify", str(tmp_path / "absent.json"), tmp_path)
        assert code == cli.EXIT_CONFIG
        assert "cannot read config" in capsys.readouterr().err

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run_cli("verify", str(path), tmp_path) == cli.EXIT_CONFIG
        assert "not valid JSON" in capsys.readouterr().err

    def test_root_not_object(self, tmp_path, capsys):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        assert run_cli("verify", str(path), tmp_path) == cli.EXIT_CONFIG
        assert "root must be an object" in capsys.readouterr().err

    def test_unknown_top_key(self, write_cfg, tmp_path, capsys):
        path = write_cfg(base_config(extra_block={}))
        assert run_cli("verify", path, tmp_path) == cli.EXIT_CONFIG
        assert "unknown key 'extra_block'" in capsys.readouterr().err

    def test_missing_required_block(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        del cfg["regime"]
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "missing key 'regime'" in capsys.readouterr().err

    def test_unknown_nested_key_is_dotted(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["regime"]["gamma"] = 1.0
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'regime.gamma'" in capsys.readouterr().err

    def test_k_not_a_number(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["regime"]["k"] = "two"
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'regime.k' must be a number" in capsys.readouterr().err

    def test_bad_gamma_mode(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["regime"]["gamma_mode"] = "quadratic"
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'regime.gamma_mode'" in capsys.readouterr().err

    def test_bad_sign_override(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["regime"]["sign_override"] = "maybe"
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'regime.sign_override'" in capsys.readouterr().err

    def test_bad_dimension(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["potential"]["d"] = 3
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'potential.d'" in capsys.readouterr().err

    def test_non_hermitian_modes(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["potential"]["modes"] = [
            {"m": [1], "n": 1, "re": 0.5, "im": 0.25},
            {"m": [-1], "n": -1, "re": 0.5, "im": 0.25}]
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'potential.modes'" in capsys.readouterr().err

    def test_solve_needs_epsilon(self, write_cfg, tmp_path, capsys):
        assert run_cli("solve", write_cfg(base_config()),
                       tmp_path) == cli.EXIT_CONFIG
        assert "missing key 'epsilon'" in capsys.readouterr().err

    def test_solve_epsilon_range(self, write_cfg, tmp_path, capsys):
        path = write_cfg(base_config(epsilon=1.5))
        assert run_cli("solve", path, tmp_path) == cli.EXIT_CONFIG
        assert "'epsilon'" in capsys.readouterr().err

    def test_sweep_epsilons_type(self, write_cfg, tmp_path, capsys):
        path = write_cfg(base_config(sweep={"epsilons": [0.25, "x"]}))
        assert run_cli("sweep", path, tmp_path) == cli.EXIT_CONFIG
        assert "'sweep.epsilons'" in capsys.readouterr().err

    def test_sweep_too_short_ladder(self, write_cfg, tmp_path, capsys):
        path = write_cfg(base_config(sweep={"epsilons": [0.25, 0.2, 0.1]}))
        assert run_cli("sweep", path, tmp_path) == cli.EXIT_CONFIG
        assert "at least 4" in capsys.readouterr().err

    def test_problem_g_term_shape(self, write_cfg, tmp_path, capsys):
        cfg = base_config(epsilon=0.125)
        cfg["problem"]["g"] = [{"amp": 1.0, "j": [1, 2]}]
        assert run_cli("solve", write_cfg(cfg), tmp_path) == cli.EXIT_CONFIG
        assert "'problem.g[0].j'" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Regime rejection (exit 2)
# ---------------------------------------------------------------------------

class TestRegimeRejection:
    def test_constant_mean_rejected(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["potential"]["modes"] = COS_TRAVELLING + [
            {"m": [0], "n": 0, "re": 0.7, "im": 0.0}]
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_REGIME
        assert "regime rejection" in capsys.readouterr().err

    def test_unsupported_k_for_linked_gamma(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["regime"] = {"k": 5.0, "gamma_mode": "k_minus_1"}
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_REGIME
        assert "regime rejection" in capsys.readouterr().err

    def test_slow_time_needs_y_mean_free(self, write_cfg, tmp_path, capsys):
        cfg = base_config()
        cfg["regime"]["k"] = 0.5
        # cos(2 pi tau) has m=0 modes: fine for k=2, not for slow time
        cfg["potential"]["modes"] = [
            {"m": [0], "n": 1, "re": 0.5, "im": 0.0},
            {"m": [0], "n": -1, "re": 0.5, "im": 0.0}]
        assert run_cli("verify", write_cfg(cfg), tmp_path) == cli.EXIT_REGIME
        err = capsys.readouterr().err
        assert "regime rejection" in err


# ---------------------------------------------------------------------------
# correctors / verify commands
# ---------------------------------------------------------------------------

class TestCorrectorsCommand:
    def test_writes_payload_and_manifest(self, write_cfg, tmp_path, capsys):
        outdir = tmp_path / "out"
        code = run_cli("correctors", write_cfg(base_config()), outdir)
        assert code == cli.EXIT_OK
        payload = json.loads((outdir / "correctors.json").read_text())
        assert payload["regime"]["family"] == "critical"
        assert payload["c_eff"] == pytest.approx(
            -0.5 / (1.0 + 4.0 * 3.141592653589793 ** 2), abs=1e-15)
        assert payload["chi1"]  # non-empty mode list
        assert payload["chi2"] == []  # no spatial-only modes to lift
        assert isinstance(payload["chain"], list)
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["command"] == "correctors"
        assert manifest["potential"]["d"] == 1
        assert "effective potential" in capsys.readouterr().out

    def test_strong_regime_payload(self, write_cfg, tmp_path):
        cfg = base_config()
        cfg["regime"] = {"k": 2.5, "gamma_mode": "k_minus_1"}
        cfg["potential"]["modes"] = COS_Y_SIN_TAU
        outdir = tmp_path / "out"
        assert run_cli("correctors", write_cfg(cfg), outdir) == cli.EXIT_OK
        payload = json.loads((outdir / "correctors.json").read_text())
        assert payload["regime"]["family"] == "strong_fast_time"
        assert payload["chi4"] is not None
        assert payload["chi5"] is not None
        assert payload["chi5_tilde"] is not None
        assert payload["chi7"] is not None
        assert payload["c_eff"] == pytest.approx(-0.25, abs=1e-15)


class TestVerifyCommand:
    def test_all_identities_ok(self, write_cfg, tmp_path, capsys):
        outdir = tmp_path / "out"
        code = run_cli("verify", write_cfg(base_config()), outdir)
        assert code == cli.EXIT_OK
        report = json.loads((outdir / "identities.json").read_text())
        assert report["all_passed"] is True
        out = capsys.readouterr().out
        assert "chi1_energy: ok" in out
        assert "FAIL" not in out

    def test_identity_failure_exits_3(self, write_cfg, tmp_path, capsys,
                                      monkeypatch):
        import oscpot.correctors as correctors
        from oscpot.potential import TrigField
        true_solver = correctors.solve_chi1

        def corrupted(W):
            return true_solver(W) + TrigField.from_cos(
                W.d, [1] + [0] * (W.d - 1), 0, 0.01)

        monkeypatch.setattr(correctors, "solve_chi1", corrupted)
        code = run_cli("verify", write_cfg(base_config()), tmp_path)
        assert code == cli.EXIT_IDENTITY
        captured = capsys.readouterr()
        assert "identity failure: chi1_energy" in captured.err


# ---------------------------------------------------------------------------
# solve command
# ---------------------------------------------------------------------------

class TestSolveCommand:
    def test_solve_writes_outputs(self, write_cfg, tmp_path, capsys):
        cfg = base_config(epsilon=0.25)
        cfg["grid"] = {"checkpoints": 8}
        outdir = tmp_path / "out"
        assert run_cli("solve", write_cfg(cfg), outdir) == cli.EXIT_OK
        blob = json.loads((outdir / "solve.json").read_text())
        assert blob["eps"] == 0.25
        assert 0.0 < blob["error_linf_l2"] < 1.0
        csv_lines = (outdir / "checkpoint_norms.csv").read_text().splitlines()
        assert csv_lines[0] == "t,l2_eps,l2_hom,l2_diff"
        assert len(csv_lines) == 1 + 9  # t = 0 plus 8 checkpoints
        first = csv_lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == pytest.approx(2 ** -0.5, abs=1e-12)
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["epsilon"] == 0.25
        assert "error (max over checkpoints, L2)" in capsys.readouterr().out

    def test_under_resolved_grid_exits_4(self, write_cfg, tmp_path, capsys):
        cfg = base_config(epsilon=0.125)
        cfg["grid"] = {"nx": 32, "checkpoints": 8}  # floor is 16/eps = 128
        assert run_cli("solve", write_cfg(cfg), tmp_path) == cli.EXIT_RESOURCE
        assert "resource violation" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep command
# ---------------------------------------------------------------------------

SWEEP_BLOCK = {"epsilons": [0.25, 0.2, 1 / 6, 0.125],
               "slope_tolerance": 5.0, "r2_min": 0.0}


class TestSweepCommand:
    def test_sweep_pass(self, write_cfg, tmp_path, capsys):
        cfg = base_config(sweep=dict(SWEEP_BLOCK), grid={"checkpoints": 16})
        outdir = tmp_path / "out"
        assert run_cli("sweep", write_cfg(cfg), outdir) == cli.EXIT_OK
        for name in ("report.json", "points.csv", "points.dat",
                     "manifest.json"):
            assert (outdir / name).exists()
        report = json.loads((outdir / "report.json").read_text())
        assert report["verdict"] == "pass"
        out = capsys.readouterr().out
        assert "verdict pass" in out
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["sweep"]["epsilons"] == SWEEP_BLOCK["epsilons"]
        assert manifest["versions"]["oscpot"]

    def test_sweep_verdict_failure_exits_5(self, write_cfg, tmp_path, capsys):
        block = dict(SWEEP_BLOCK, slope_tolerance=1e-9)
        cfg = base_config(sweep=block, grid={"checkpoints": 16})
        assert run_cli("sweep", write_cfg(cfg), tmp_path) == cli.EXIT_VERDICT
        out = capsys.readouterr().out
        assert "verdict fail" in out
        assert "deviates from theoretical" in out

    def test_sweep_budget_exits_4(self, write_cfg, tmp_path, capsys):
        cfg = base_config(sweep=dict(SWEEP_BLOCK), grid={"checkpoints": 16})
        code = run_cli("sweep", write_cfg(cfg), tmp_path, "--budget", "1000")
        assert code == cli.EXIT_RESOURCE
        assert "resource violation" in capsys.readouterr().err

    def test_sweep_reruns_byte_identical(self, write_cfg, tmp_path):
        cfg = base_config(sweep=dict(SWEEP_BLOCK), grid={"checkpoints": 16})
        path = write_cfg(cfg)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("sweep", path, out1) == cli.EXIT_OK
        assert run_cli("sweep", path, out2) == cli.EXIT_OK
        assert (out1 / "points.csv").read_bytes() == \
            (out2 / "points.csv").read_bytes()
        assert (out1 / "report.json").read_bytes() == \
            (out2 / "report.json").read_bytes()


# ---------------------------------------------------------------------------
# Entry points and metadata
# ---------------------------------------------------------------------------

class TestEntryPoints:
    def test_versions_fields(self):
        info = cli.versions()
        assert set(info) == {"oscpot", "numpy", "scipy", "python"}
        assert all(isinstance(v, str) and v for v in info.values())

    def test_console_script_subprocess(self, tmp_path):
        cfg = base_config()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        outdir = tmp_path / "out"
        proc = subprocess.run(
            [sys.executable, "-m", "oscpot.cli", "verify",
             "--config", str(path), "--out", str(outdir)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert "chi1_energy: ok" in proc.stdout
        assert (outdir / "identities.json").exists()

    def test_missing_subcommand_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2
