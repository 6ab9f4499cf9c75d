import csv
import filecmp
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cli_cases import CASES
from fracnls.cli import ConfigError, parse_modes, run
from fracnls.dynamics import single_mode_solution

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "schemas.json")


def _run(cmd, args, outdir, *extra):
    return run([cmd, *args, "--seed", "7", "--output-dir", str(outdir), "--quiet", *extra])


def _schema(outdir):
    files = {}
    for f in sorted(os.listdir(outdir)):
        path = os.path.join(outdir, f)
        if f.endswith(".csv"):
            with open(path) as fh:
                files[f] = next(csv.reader(fh))
        else:
            with open(path) as fh:
                files[f] = sorted(json.load(fh))
    return files


@pytest.mark.parametrize("cmd", sorted(CASES))
def test_golden_schema(cmd, tmp_path):
    with open(GOLDEN) as fh:
        golden = json.load(fh)
    code = _run(cmd, CASES[cmd], tmp_path, "--workers", "1")
    assert code in (0, 3)
    assert _schema(tmp_path) == golden[cmd]


def test_identities_exit_zero(tmp_path):
    assert run(["identities", "--alpha", "1.5", "--N", "8", "--seed", "1", "--output-dir", str(tmp_path), "--quiet"]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["passed"] and man["seed"] == 1
    assert man["notes"]["run"]["subcommand"] == "identities"


def test_evolve_single_mode_csv(tmp_path):
    assert run(["evolve", "--alpha", "1.5", "--N", "4", "--modes", "k=1,c=1", "--T", "1", "--output-dir", str(tmp_path)]) == 0
    with open(tmp_path / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in rows if r["n"] == "1"])
    z = np.array([complex(float(r["re"]), float(r["im"])) for r in rows if r["n"] == "1"])
    assert t[-1] == pytest.approx(1.0)
    assert np.max(np.abs(z - single_mode_solution(1.0, 1, 1.5, t))) < 1e-10
    others = [complex(float(r["re"]), float(r["im"])) for r in rows if r["n"] != "1"]
    assert max(abs(x) for x in others) == 0.0


def test_validation_exit_codes(tmp_path, capsys):
    out = str(tmp_path)
    assert run(["identities", "--alpha", "3", "--output-dir", out]) == 2
    assert "alpha" in capsys.readouterr().err
    assert run(["converge", "--sigma", "0.3", "--output-dir", out]) == 2
    assert run(["evolve", "--N", "2", "--modes", "k=5,c=1", "--output-dir", out]) == 2
    assert run(["evolve", "--modes", "k=1;c", "--output-dir", out]) == 2
    assert run(["identities", "--N", "eight", "--output-dir", out]) == 2
    assert run(["identities", "--seed", "-1", "--output-dir", out]) == 2
    assert run(["identities", "--bogus", "1", "--output-dir", out]) == 2
    assert run(["nonsense"]) == 2
    assert not os.listdir(out)


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# identities run\nalpha = 1.2\nN = 3   # small\nsamples = 20\nseed = 5\n")
    out = tmp_path / "out"
    assert run(["identities", "--config", str(cfg), "--N", "2", "--output-dir", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    # flags override the file, the file overrides defaults
    assert man["config"] == {"alpha": 1.2, "N": 2, "samples": 20}
    assert man["seed"] == 5
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha = 1.2\nlambda = 3\n")
    assert run(["identities", "--config", str(bad), "--output-dir", str(out)]) == 2
    assert f"{bad}:2: unknown key 'lambda'" in capsys.readouterr().err
    bad.write_text("alpha 1.2\n")
    assert run(["identities", "--config", str(bad), "--output-dir", str(out)]) == 2
    bad.write_text("N = 1.5\n")
    assert run(["identities", "--config", str(bad), "--output-dir", str(out)]) == 2
    assert f"{bad}:1: field 'N'" in capsys.readouterr().err


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACNLS_OUTPUT_DIR", str(tmp_path))
    assert run(["identities", "--N", "2", "--samples", "10", "--quiet"]) == 0
    assert (tmp_path / "identities" / "report.csv").exists()


def test_failed_check_exit_code(tmp_path):
    # counting slopes over a too-short scan at alpha = 1.2 exceed the bound
    assert run(["counting", "--alphas", "1.2", "--N_list", "2,4", "--n_max", "0", "--output-dir", str(tmp_path)]) == 3


def test_runtime_error_exit_code(tmp_path, capsys):
    # rk4 with a huge step on large data overflows: blowup is a runtime failure
    with np.errstate(all="ignore"):
        code = run(["evolve", "--N", "2", "--modes", "k=0,c=30", "--dt", "1", "--T", "200", "--output-dir", str(tmp_path)])
    assert code == 1
    assert "blowup" in capsys.readouterr().err


def test_parse_modes():
    assert parse_modes("k=1,c=1; k=-2,c=0.5+0.1j") == [(1, 1 + 0j), (-2, 0.5 + 0.1j)]
    for bad in ("", "k=1", "k=1,c=1,d=2", "k=x,c=1", "c=1,n=2"):
        with pytest.raises(ConfigError):
            parse_modes(bad)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fracnls", "sample", "--N", "1", "--count", "2", "--output-dir", str(tmp_path), "--quiet"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "sample: PASS"


@pytest.mark.parametrize("cmd", ["invariance", "measure", "identities"])
def test_same_argv_byte_identical(cmd, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run(cmd, CASES[cmd], a, "--workers", "1")
    _run(cmd, CASES[cmd], b, "--workers", "2")
    csvs = sorted(f for f in os.listdir(a) if f.endswith(".csv"))
    assert csvs and csvs == sorted(f for f in os.listdir(b) if f.endswith(".csv"))
    match, mismatch, errors = filecmp.cmpfiles(a, b, csvs, shallow=False)
    assert not mismatch and not errors
