import json
from pathlib import Path

import numpy as np
import pytest

from qpst.cli import main
from qpst.scenario import (
    ConfigError,
    emit_plot_script,
    load_scenario,
    run_scenario,
    run_suite,
)

FIGURES = Path(__file__).resolve().parent.parent / "figures"

SMALL = """\
schema = 1
name = "small"
n = 3
omega = 10.0
Omega = 110.0
lambda = 1.0
epsilon = 1.0
Gamma = 1e-3
alpha = 1.0

[grid]
window = [80.0, 400.0]
samples = 40
mode = "raw"

[expectations]
peak_p_ex_min = 0.9
tau_ex_window = [100.0, 220.0]
"""


def write_small(tmp_path, text=SMALL, name="small.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadScenario:
    def test_small_roundtrip(self, tmp_path):
        sc = load_scenario(write_small(tmp_path))
        assert sc.n == 3 and sc.epsilon == 1.0 and sc.grid_mode == "raw"
        assert sc.window == (80.0, 400.0)

    def test_missing_field_names_it(self, tmp_path):
        broken = SMALL.replace('epsilon = 1.0\n', '')
        with pytest.raises(ConfigError, match="epsilon"):
            load_scenario(write_small(tmp_path, broken))

    def test_syntax_error_has_location(self, tmp_path):
        with pytest.raises(ConfigError, match="syntax"):
            load_scenario(write_small(tmp_path, "schema = [unclosed\n"))

    def test_wrong_schema_version(self, tmp_path):
        with pytest.raises(ConfigError, match="schema"):
            load_scenario(write_small(tmp_path, SMALL.replace("schema = 1",
                                                              "schema = 2")))

    def test_unknown_expectation_key(self, tmp_path):
        bad = SMALL + "\nwrong_key = 1.0\n"
        with pytest.raises(ConfigError, match="wrong_key"):
            load_scenario(write_small(tmp_path, bad))

    def test_bad_window(self, tmp_path):
        bad = SMALL.replace("window = [80.0, 400.0]", "window = [400.0, 80.0]")
        with pytest.raises(ConfigError, match="hi > lo"):
            load_scenario(write_small(tmp_path, bad))


class TestRunScenario:
    def test_small_passes_and_writes_artifacts(self, tmp_path):
        cfg = write_small(tmp_path)
        summary = run_scenario(cfg, tmp_path / "out")
        assert summary["status"] == "pass"
        assert summary["tau_ex"]["numeric"] == pytest.approx(np.pi / 2 * 100,
                                                             rel=0.05)
        csv = Path(summary["csv"])
        header = csv.read_text().splitlines()
        assert "tau,p_ex,p_rec,precision_flag" in header
        assert (tmp_path / "out" / "small_summary.json").exists()

    def test_bit_identical_reruns(self, tmp_path):
        cfg = write_small(tmp_path)
        run_scenario(cfg, tmp_path / "a")
        run_scenario(cfg, tmp_path / "b")
        assert ((tmp_path / "a" / "small.csv").read_bytes()
                == (tmp_path / "b" / "small.csv").read_bytes())

    def test_phase_budget_exceeded_flagged(self, tmp_path):
        # ideal chain (no decay) probed past the 1e12 phase budget
        text = SMALL.replace("Gamma = 1e-3", "Gamma = 0.0")
        text = text.replace("window = [80.0, 400.0]",
                            "window = [1.0e10, 1.0000015e10]")
        text = text.replace("tau_ex_window = [100.0, 220.0]",
                            "tau_ex_window = [9.9e9, 1.01e10]")
        cfg = write_small(tmp_path, text, "far.toml")
        summary = run_scenario(cfg, tmp_path / "out")
        assert summary["precise"] is False
        assert summary["status"] == "imprecise"
        allowed = run_scenario(cfg, tmp_path / "out2", allow_imprecise=True)
        assert allowed["status"] in ("pass", "fail")


class TestRunSuite:
    def test_empty_directory(self, tmp_path):
        with pytest.raises(ConfigError, match="no scenarios"):
            run_suite(tmp_path, tmp_path / "out")

    def test_failure_isolation(self, tmp_path):
        write_small(tmp_path)
        (tmp_path / "broken.toml").write_text("schema = 1\n")  # missing n
        aggregate = run_suite(tmp_path, tmp_path / "out", threads=2)
        assert aggregate["total"] == 2
        statuses = {s["name"]: s["status"] for s in aggregate["scenarios"]}
        assert statuses["small"] == "pass"
        assert statuses["broken"] == "error"
        assert (tmp_path / "out" / "suite_report.json").exists()
        assert (tmp_path / "out" / "suite_report.txt").exists()

    def test_shipped_figures_suite(self, tmp_path):
        aggregate = run_suite(FIGURES, tmp_path / "out", threads=2)
        assert aggregate["total"] == 7
        assert aggregate["passed"] == 7
        for stem in ("fig1a", "fig1b", "fig2", "fig3a", "fig4a", "fig4b",
                     "fig5"):
            assert (tmp_path / "out" / f"{stem}.csv").exists()


class TestEmitPlotScript:
    def test_single_panel_script(self, tmp_path):
        cfg = write_small(tmp_path)
        summary = run_scenario(cfg, tmp_path / "out")
        script = emit_plot_script(summary["csv"])
        text = Path(script).read_text()
        assert "matplotlib" in text
        assert "small.csv" in text

    def test_dual_panel_when_p_rec_present(self, tmp_path):
        csv = tmp_path / "curve.csv"
        rows = ["tau,p_ex,p_rec,precision_flag"]
        for i in range(10):
            rows.append(f"{i},0.1,{0.8 if i else 0.9},0")
        csv.write_text("\n".join(rows) + "\n")
        script = Path(emit_plot_script(csv)).read_text()
        assert "panels = 2 if True else 1" in script

    def test_log_x_option(self, tmp_path):
        csv = tmp_path / "curve.csv"
        csv.write_text("tau,p_ex,p_rec,precision_flag\n1,0.1,0.0,0\n")
        script = Path(emit_plot_script(csv, log_x=True)).read_text()
        assert 'set_xscale("log")' in script

    def test_missing_csv(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            emit_plot_script(tmp_path / "nope.csv")

    def test_emitted_script_executes(self, tmp_path):
        import subprocess
        import sys

        data_dir = tmp_path / "data"
        plot_dir = tmp_path / "plots"
        data_dir.mkdir()
        plot_dir.mkdir()
        csv = data_dir / "curve.csv"
        csv.write_text("tau,p_ex,p_rec,precision_flag\n"
                       "1,0.5,0.2,0\n2,0.6,0.3,0\n3,0.9,0.1,0\n")
        script = emit_plot_script(csv, plot_dir / "curve_plot.py")
        result = subprocess.run([sys.executable, str(script)],
                                capture_output=True, text=True)
        assert result.returncode == 0, result.stderr
        assert (plot_dir / "curve.png").exists()


class TestCli:
    def test_run_exit_codes(self, tmp_path, capsys):
        cfg = write_small(tmp_path)
        assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["status"] == "pass"

    def test_malformed_config_exit_two(self, tmp_path, capsys):
        cfg = write_small(tmp_path, SMALL.replace('epsilon = 1.0\n', ''))
        assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 2
        assert "epsilon" in capsys.readouterr().err

    def test_imprecise_exit_three(self, tmp_path, capsys):
        text = SMALL.replace("Gamma = 1e-3", "Gamma = 0.0")
        text = text.replace("window = [80.0, 400.0]",
                            "window = [1.0e10, 1.0000015e10]")
        text = text.replace("tau_ex_window = [100.0, 220.0]",
                            "tau_ex_window = [9.9e9, 1.01e10]")
        cfg = write_small(tmp_path, text, "far.toml")
        assert main(["run", str(cfg), "--out", str(tmp_path / "o1")]) == 3
        capsys.readouterr()
        code = main(["run", str(cfg), "--allow-imprecise",
                     "--out", str(tmp_path / "o2")])
        assert code in (0, 1)

    def test_plot_subcommand(self, tmp_path, capsys):
        cfg = write_small(tmp_path)
        main(["run", str(cfg), "--out", str(tmp_path / "out")])
        capsys.readouterr()
        csv = tmp_path / "out" / "small.csv"
        assert main(["plot", str(csv)]) == 0
        script = Path(capsys.readouterr().out.strip())
        assert script.exists()
