import json
import subprocess
import sys

import pytest

from irsense.cli import main


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "irsense", *args], capture_output=True, text=True)


def test_cli_success_writes_files(tmp_path):
    r = run_cli("crb-vs-k", "--out", str(tmp_path), "--plot")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "scenario_crb_vs_k.csv").exists()
    assert (tmp_path / "scenario_crb_vs_k.svg").exists()
    assert r.stdout.split() == [str(tmp_path / "scenario_crb_vs_k.csv"), str(tmp_path / "scenario_crb_vs_k.svg")]


@pytest.mark.parametrize("cmd", ["crb-vs-power", "placement", "budget"])
def test_cli_subcommands_in_process(tmp_path, capsys, cmd):
    assert main([cmd, "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip()


def test_cli_beampattern_scheme_and_grid(tmp_path):
    assert main(["beampattern", "--out", str(tmp_path), "--grid-step", "0.1", "--scheme", "FP,MS"]) == 0
    lines = (tmp_path / "scenario_beampattern_summary.csv").read_text().splitlines()
    assert [l.split(",")[0] for l in lines[1:]] == ["FP", "MS"]


@pytest.mark.parametrize("args, code", [
    (["crb-vs-k", "--seed", "-3"], 2),
    (["crb-vs-k", "--seed", str(2**64)], 2),
    (["crb-vs-k", "--scheme", "FP,XX"], 2),
    (["crb-vs-k", "--grid-step", "0"], 2),
    (["nope"], 2),
    ([], 2),
    (["crb-vs-k", "--scenario", "/nonexistent.json"], 4),
])
def test_cli_errors_are_json(args, code):
    r = run_cli(*args)
    assert r.returncode == code
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["exit_code"] == code and err["error"] and err["message"]


def test_cli_rejects_unknown_scenario_keys(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"M": 32, "colour": "red"}))
    r = run_cli("crb-vs-power", "--scenario", str(p), "--out", str(tmp_path))
    assert r.returncode == 3
    err = json.loads(r.stderr)
    assert err["error"] == "DomainError" and "colour" in err["message"]


def test_cli_flags_override_scenario(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"name": "run", "out": str(tmp_path / "ignored"), "trials": 0,
                             "setups": [{"M": 32, "N": 32, "K": 8}],
                             "sweep": {"parameter": "P0_dbm", "values": [25, 30]}}))
    out = tmp_path / "o"
    assert main(["crb-vs-power", "--scenario", str(p), "--out", str(out), "--trials", "5",
                 "--seed", "7", "--scheme", "MS", "--grid-step", "0.05"]) == 0
    lines = (out / "run_crb_vs_power.csv").read_text().splitlines()
    assert len(lines) == 3
    assert all(l.split(",")[6] for l in lines[1:])
    assert not (tmp_path / "ignored").exists()
