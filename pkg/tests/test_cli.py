from __future__ import annotations

import csv
import json
import os
import subprocess
import sys

import pytest

from fxxz.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_magnetize_conjecture_exit_zero(capsys):
    code, out, _ = run(capsys, "magnetize", "--order", "16", "--check-conjecture")
    assert code == 0
    rep = json.loads(out)
    assert rep["ok"] is True
    assert rep["results"]["magnetisation"]["first_mismatch_order"] is None


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "magnetize", "--bogus")
    assert code == 2
    assert "usage:" in err


def test_missing_command(capsys):
    code, _, err = run(capsys)
    assert code == 2 and "usage:" in err


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest", "--order", "12")
    assert code == 0
    assert all(json.loads(out)["results"].values())


def test_bad_numeric_input_is_usage_error(capsys):
    code, _, err = run(capsys, "qkz-check", "--q", "-0.7")
    assert code == 2 and "fxxz: error" in err
    code, _, _ = run(capsys, "ed", "--sites", "7")
    assert code == 2


def test_threshold_from_config_can_fail(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[verify-weights]\nthreshold = 0.0\n')
    code, out, _ = run(capsys, "--config", str(cfg), "verify-weights")
    assert code == 1 and json.loads(out)["ok"] is False


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[common]\nformat = "csv"\n\n[magnetize]\norder = 12\ni = 1\n')
    code, out, _ = run(capsys, "--config", str(cfg), "magnetize", "--i", "0", "--print-config")
    assert code == 0
    shown = json.loads(out)["magnetize"]
    assert shown["order"] == 12  # from the file
    assert shown["i"] == 0  # the flag wins
    assert shown["format"] == "csv"  # from [common]
    assert shown["boundary"] is False  # built-in default


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[magnetize]\nordre = 12\n")
    code, _, err = run(capsys, "--config", str(cfg), "magnetize")
    assert code == 2 and "ordre" in err


def test_deterministic_output(capsys):
    a = run(capsys, "correlate", "--eps", "-+", "--order", "10")[1]
    b = run(capsys, "correlate", "--eps", "-+", "--order", "10")[1]
    assert a == b and "elapsed_s" not in a


def test_timing_opt_in(capsys):
    _, out, _ = run(capsys, "selftest", "--order", "8", "--timing")
    assert "elapsed_s" in json.loads(out)


def test_out_writes_json_and_csv(tmp_path, capsys):
    dest = tmp_path / "fig.json"
    code, out, _ = run(capsys, "fig10", "--steps", "8", "--out", str(dest))
    assert code == 0 and out == ""
    rep = json.loads(dest.read_text())
    assert rep["results"]["h0_meets_spontaneous"] is True
    with open(dest.with_suffix(".csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9
    assert set(rows[0]) == {"h", "r", "fracture_mag", "boundary_mag", "spontaneous_mag"}


def test_csv_to_stdout(capsys):
    code, out, _ = run(capsys, "fidelity", "--steps", "4", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].split(",")[:4] == ["delta", "h", "r", "fidelity"]
    assert len(out.splitlines()) == 6


def test_norms_single_sector(capsys):
    code, out, _ = run(capsys, "norms", "--order", "8", "--i", "0", "--primed", "no")
    assert code == 0
    assert json.loads(out)["ok"] is True


def test_ed_command(capsys):
    code, out, _ = run(capsys, "ed", "--sites", "8", "--h", "0.5", "--observable", "both")
    assert code == 0
    res = json.loads(out)["results"]
    assert -1 < res["magnetisation"] < 0 and 0 < res["fidelity"] <= 1


def test_threads_recorded():
    env = {**os.environ, "FXXZ_THREADS": "1"}
    proc = subprocess.run([sys.executable, "-m", "fxxz", "selftest", "--order", "6"],
                          capture_output=True, text=True, env=env, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["parameters"]["threads"] == 1


@pytest.mark.parametrize("command", ["verify-weights", "norms", "fidelity", "correlate", "magnetize",
                                     "fig10", "qkz-check", "ed", "selftest"])
def test_help_for_every_command(capsys, command):
    code, out, _ = run(capsys, command, "--help")
    assert code == 0 and "--out" in out
