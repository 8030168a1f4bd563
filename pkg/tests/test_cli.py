import json
import shutil
import subprocess

import pytest

from nlft.cli import main


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["cascade", "--set", "colour=red", "--out", str(tmp_path)]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["cascade", "--d", "1", "--out", str(tmp_path)]) == 2
    assert main(["cascade", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_failing_checks_exit_one(tmp_path, capsys):
    # the stated closed forms are checked alongside the measured ones
    code = main(["quadratic-counterexample", "--N", "2", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 1 and "BAD sup_reference" in out and "ok  sup_corrected" in out


def test_passing_run_with_config_and_plots(tmp_path, capsys):
    cfg = tmp_path / "w.cfg"
    cfg.write_text("K=2\npotentials=2\nlambda_grid=0.05:1:6\n")
    code = main(["weak-type", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path),
                 "--plots"])
    assert code == 0
    assert (tmp_path / "weak-type-weak.png").stat().st_size > 1000
    doc = json.loads((tmp_path / "weak-type.json").read_text())
    assert doc["config"]["seed"] == 3 and doc["config"]["K"] == 2
    assert "seed=3" in (tmp_path / "weak-type.cfg").read_text()


def test_installed_script(tmp_path):
    exe = shutil.which("nlft")
    if exe is None:
        pytest.skip("console script not on PATH")
    r = subprocess.run([exe, "hs-counterexample", "--out", str(tmp_path), "--format", "json"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "hs-counterexample: pass" in r.stdout


def test_samples_flag(tmp_path):
    assert main(["swapping-test", "--d", "3", "--samples", "20", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "swapping-test.json").read_text())
    assert doc["summary"]["samples"] == 20
