import json

import pytest

from twistkac import cli
from twistkac.parallel import THREADS_ENV
from twistkac.twist import PolyPotential


def run_json(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr().out
    return code, out


def test_exact_partition(capsys):
    code, out = run_json(["exact", "--m", "1", "--beta", "0.693147", "--theta", "0", "--omega", "1",
                          "--op", "partition"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1
    assert doc["result"] == pytest.approx(4.0, rel=1e-5)
    assert doc["config"]["m"] == 1


def test_exact_kernel_round_trips(capsys):
    code, out = run_json(["exact", "--m", "1", "--beta", "1", "--theta", "0.3", "--op", "kernel",
                          "--xi", "0.25"], capsys)
    assert code == 0
    assert "result" in json.loads(out)


def test_unknown_flag_exits_2(capsys):
    assert cli.run(["exact", "--bogus", "1"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_values_exit_2(capsys):
    assert cli.run(["exact", "--m", "-1", "--op", "partition"]) == 2
    assert cli.run(["mc", "--potential", "/nonexistent.json", "--samples", "10"]) == 2
    assert cli.run(["sample", "--T", "100"]) == 2


def test_unknown_subcommand_exits_2(capsys):
    assert cli.run(["nonsense"]) == 2


def test_mc_deterministic_bytes(tmp_path, monkeypatch, capsys):
    pot = tmp_path / "quartic.json"
    pot.write_text(PolyPotential.modulus_power(1, 2).to_json())
    argv = ["mc", "--potential", str(pot), "--lambda", "0.2", "--samples", "4000", "--seed", "9"]
    monkeypatch.setenv(THREADS_ENV, "1")
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert cli.run(argv + ["--output", str(a)]) == 0
    monkeypatch.setenv(THREADS_ENV, "3")
    assert cli.run(argv + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["config"]["lambda"] == 0.2
    assert doc["config"]["seed"] == 9


def test_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"m": 2.0, "beta": 0.5, "theta": 1.0, "op": "partition"}))
    code, out = run_json(["--config", str(cfg), "exact", "--beta", "1.0"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["m"] == 2 and doc["config"]["beta"] == 1


def test_floats_have_17_digits(capsys):
    code, out = run_json(["exact", "--m", "1", "--beta", "1", "--theta", "0.3", "--op", "partition"], capsys)
    value = json.loads(out)["result"]
    assert repr(value) in out or f"{value:.17g}" in out


@pytest.mark.parametrize("suite", ["oscillator", "fock", "field"])
def test_verify_passes(suite, capsys):
    code, out = run_json(["verify", "--suite", suite], capsys)
    assert code == 0
    assert json.loads(out)["result"]["passed"]


def test_verify_failure_exit_3(monkeypatch, capsys):
    monkeypatch.setattr(cli, "_verify_field", lambda cfg: [("forced", False)])
    assert cli.run(["verify", "--suite", "field"]) == 3


@pytest.mark.parametrize("argv", [
    ["sample", "--op", "path", "--T", "16"],
    ["sample", "--op", "moment", "--conj-times", "0.2", "--plain-times", "0.4", "--samples", "2000"],
    ["oracle", "--op", "trace", "--n-cut", "10"],
    ["oracle", "--op", "ratio", "--n-cut", "10", "--lambda", "0.3"],
    ["oracle", "--op", "trotter", "--n-cut", "8", "--N", "4"],
    ["oracle", "--op", "expectation", "--n-cut", "10", "--conj-times", "0.6", "--plain-times", "0.2"],
    ["mc", "--op", "expectation", "--samples", "2000", "--conj-times", "0.3", "--plain-times", "0.3"],
    ["field", "--op", "partition"],
    ["field", "--op", "spectrum", "--E-max", "20"],
    ["field", "--op", "sample"],
    ["field", "--op", "mc", "--samples", "500", "--points", "4", "--T", "16", "--k-cut", "1.5"],
    ["limits", "--op", "kernel", "--theta", "1.7"],
    ["limits", "--op", "mc", "--theta", "1.7", "--samples", "500"],
])
def test_subcommands_run(argv, capsys):
    code, out = run_json(argv, capsys)
    assert code == 0, capsys.readouterr().err
    json.loads(out)
