import json
import subprocess
import sys

import pytest

from safecap.cli import build_parser, check, main


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["gridworld", "--seeds", "2", "--episodes", "2", "--init-samples", "500", "--out", str(out)])
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "gridworld_adaptive_seed000.csv", "gridworld_adaptive_seed001.csv", "summary.json"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_seeds"] == 2 and summary["config"]["init_samples"] == 500
    assert "final cost" in capsys.readouterr().out


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seeds": 3, "episodes": 1, "mode": "fixed:0.05", "init_samples": 200}))
    out = tmp_path / "o"
    assert main(["gridworld", "--config", str(cfg), "--seeds", "1", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_seeds"] == 1
    assert summary["mode"] == "fixed-0.05"


def test_bad_mode_exit_code(capsys):
    assert main(["gridworld", "--mode", "sideways", "--episodes", "1"]) == 2
    assert "cannot parse mode" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["gridworld", "--config", str(cfg)]) == 2


def test_flags_cover_config():
    args = build_parser().parse_args(["pointmass", "--replan-every", "3", "--estimator", "max_std",
                                      "--record-wall-time", "true"])
    assert args.replan_every == 3 and args.estimator == "max_std" and args.record_wall_time is True


class TestCheck:
    summary = {"final": {"cost": {"mean": 0.09}, "cum_violations": {"mean": 0.0}}}

    def test_function(self):
        res = check(self.summary, {"final.cost.mean": {"max": 0.105}, "final.cum_violations.mean": {"min": 1.0}})
        assert [ok for _, _, ok in res] == [True, False]

    def test_command(self, tmp_path, capsys):
        s = tmp_path / "summary.json"
        s.write_text(json.dumps(self.summary))
        good, bad = tmp_path / "good.json", tmp_path / "bad.json"
        good.write_text(json.dumps({"final.cost.mean": {"min": 0.0, "max": 0.105}}))
        bad.write_text(json.dumps({"final.cost.mean": {"max": 0.05}}))
        assert main(["check", "--against", str(s), "--thresholds", str(good)]) == 0
        assert main(["check", "--against", str(s), "--thresholds", str(bad)]) == 1
        assert "FAIL final.cost.mean" in capsys.readouterr().out

    def test_missing_key(self, tmp_path):
        s = tmp_path / "summary.json"
        s.write_text(json.dumps(self.summary))
        t = tmp_path / "t.json"
        t.write_text(json.dumps({"final.return.mean": {"min": 0}}))
        assert main(["check", "--against", str(s), "--thresholds", str(t)]) == 2


def test_selftest_subcommand():
    proc = subprocess.run([sys.executable, "-m", "safecap.cli", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
