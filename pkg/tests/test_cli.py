"""Command-line surface: exit codes, output files, manifests, config
round-trips, strict JSON, deterministic reruns."""

import hashlib
import json
import os
import subprocess
import sys

import pytest

from sdnlwave import __version__
from sdnlwave.cli import run


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_bare_invocation_is_usage_error(capsys):
    assert run([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "frobnicate" in err


def test_missing_required_parameter_is_named(capsys):
    assert run(["partition", "--s", "1.0", "--N", "2"]) == 1
    assert "--samples" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.states")
    assert run(["functionals", "--in", missing]) == 1
    assert "error" in capsys.readouterr().err


def test_sample_mu_writes_states_and_manifest(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert run(["sample-mu", "--count", "2", "--s", "1.0", "--N", "3",
                "--seed", "5", "--out", out]) == 0
    man = json.loads(read(os.path.join(out, "manifest.json")))
    assert man["format"] == "sdnlwave-run-manifest/1"
    assert man["command"] == "sample-mu"
    assert man["master_seed"] == 5
    data = read(os.path.join(out, "samples.states"))
    assert man["outputs"]["samples.states"] == hashlib.sha256(data).hexdigest()
    # 2 records of header + two complex coefficient grids at cutoff 3
    assert len(data) == 2 * (20 + 2 * 16 * 7 * 7)


def test_evolve_outputs_parse_as_json(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert run(["evolve", "--s", "1.0", "--N", "2", "--dt", "0.05",
                "--T", "0.1", "--seed", "3", "--count", "2",
                "--out", out]) == 0
    names = set(os.listdir(out))
    assert {"manifest.json", "observables.jsonl",
            "sample0000.states", "sample0001.states"} <= names
    lines = read(os.path.join(out, "observables.jsonl")).decode().splitlines()
    assert lines
    for line in lines:
        rec = json.loads(line)  # strict JSON, no bare NaN/Infinity
        assert {"seed", "sample", "t", "name", "value"} <= set(rec)


def test_functionals_stdout_json(tmp_path, capsys):
    out = str(tmp_path / "run")
    run(["sample-mu", "--count", "1", "--s", "1.0", "--N", "3",
         "--seed", "11", "--out", out])
    capsys.readouterr()
    assert run(["functionals", "--in", os.path.join(out, "samples.states")]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["s"] == 1.0 and rec["N"] == 3
    assert "hamiltonian" in rec and "total" in rec and "bracket" in rec


def test_besov_stdout_inf_is_string(tmp_path, capsys):
    out = str(tmp_path / "run")
    run(["sample-mu", "--count", "1", "--s", "1.0", "--N", "3",
         "--seed", "11", "--out", out])
    capsys.readouterr()
    assert run(["besov", "--in", os.path.join(out, "samples.states"),
                "--alpha", "-0.5"]) == 0
    line = capsys.readouterr().out
    rec = json.loads(line)
    assert rec["p"] == "inf" and rec["q"] == "inf"
    assert isinstance(rec["norm"], float) and rec["norm"] > 0


def test_numerical_error_exits_2(tmp_path, capsys):
    out = str(tmp_path / "run")
    code = run(["density-check", "--s", "1.0", "--N", "2", "--samples", "64",
                "--dt", "0.01", "--t", "0.02", "--ess-floor", "0.9",
                "--seed", "1", "--out", out])
    assert code == 2
    assert "numerical error" in capsys.readouterr().err


def test_selftest_quick(capsys):
    assert run(["selftest", "--quick"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("ok - ") for line in lines)


def test_ini_config_matches_flags(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\ns = 1.0\nN = 2\nsamples = 512\nseed = 9\n")
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(["partition", "--config", str(ini), "--out", a]) == 0
    assert run(["partition", "--s", "1.0", "--N", "2", "--samples", "512",
                "--seed", "9", "--out", b]) == 0
    assert read(os.path.join(a, "reports.jsonl")) == \
        read(os.path.join(b, "reports.jsonl"))


def test_manifest_round_trip(tmp_path, capsys):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(["partition", "--s", "0.75", "--N", "2", "--samples", "512",
                "--seed", "4", "--out", a]) == 0
    assert run(["partition", "--config", os.path.join(a, "manifest.json"),
                "--out", b]) == 0
    assert read(os.path.join(a, "reports.jsonl")) == \
        read(os.path.join(b, "reports.jsonl"))
    assert read(os.path.join(a, "summary.csv")) == \
        read(os.path.join(b, "summary.csv"))


def test_flag_overrides_config(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\ns = 1.0\nN = 2\nsamples = 256\nseed = 9\n")
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(["partition", "--config", str(ini), "--seed", "10",
                "--out", a]) == 0
    assert run(["partition", "--s", "1.0", "--N", "2", "--samples", "256",
                "--seed", "10", "--out", b]) == 0
    assert read(os.path.join(a, "reports.jsonl")) == \
        read(os.path.join(b, "reports.jsonl"))


def cli_env(extra=None):
    env = dict(os.environ)
    env["SOURCE_DATE_EPOCH"] = "1700000000"
    env.pop("SDNLWAVE_OUT_DIR", None)
    if extra:
        env.update(extra)
    return env


def run_cli(argv, env):
    return subprocess.run([sys.executable, "-m", "sdnlwave.cli", *argv],
                          capture_output=True, text=True, env=env)


def test_rerun_is_byte_identical(tmp_path):
    args = ["invariance", "--s", "1.0", "--N", "2", "--dt", "0.1",
            "--T", "0.2", "--samples", "1500", "--seed", "21"]
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    env = cli_env()
    r1 = run_cli(args + ["--out", a], env)
    assert r1.returncode == 0, r1.stderr
    first = {n: read(os.path.join(a, n)) for n in os.listdir(a)}
    r2 = run_cli(args + ["--out", a], env)
    assert r2.returncode == 0
    for name, data in first.items():
        assert read(os.path.join(a, name)) == data, name

    # different thread count: data files identical, manifest differs only in
    # its threads/out_dir configuration echo
    r3 = run_cli(args + ["--threads", "3", "--out", b], env)
    assert r3.returncode == 0, r3.stderr
    assert read(os.path.join(b, "reports.jsonl")) == first["reports.jsonl"]
    assert read(os.path.join(b, "summary.csv")) == first["summary.csv"]
    m1 = json.loads(first["manifest.json"])
    m3 = json.loads(read(os.path.join(b, "manifest.json")))
    for m in (m1, m3):
        m["config"].pop("threads"), m["config"].pop("out_dir")
    assert m1 == m3
    assert r1.stdout == r3.stdout
