import json
import subprocess
import sys

import pytest

from pslab.cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:  # argparse rejects bad values before dispatch
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_solve_then_verify(tmp_path, capsys):
    rule = tmp_path / "rule.json"
    code, data = run_json(capsys, "solve", "--scenario", "pigou2", "--grid", "5", "--out", str(rule))
    assert code == EXIT_OK and data["status"] == "optimal"
    assert data["value"] == pytest.approx(0.821428571, abs=1e-8)
    code, rep = run_json(capsys, "verify", "--scenario", "pigou2", "--rule", str(rule), "--eps", "1e-7")
    assert code == EXIT_OK and rep["pass"]


def test_verify_full_revelation(capsys):
    code, rep = run_json(capsys, "verify", "--scenario", "pigou2", "--rule", "pigou2_full_revelation")
    assert code == EXIT_FAILED and rep["max_gain"] == 0.5


def test_verify_atomic(capsys):
    code, rep = run_json(capsys, "verify", "--scenario", "pigou2", "--rule", "pigou2_full_revelation",
                         "--atomic", "--n", "2")
    assert code == EXIT_FAILED and rep["check"] == "ps_bce_atomic" and rep["n"] == 2


def test_atomic_needs_n(capsys):
    code, _, err = run(capsys, "verify", "--scenario", "pigou2", "--rule", "pigou2_full_revelation",
                       "--atomic")
    assert code == EXIT_INVALID and "--n" in err


@pytest.mark.parametrize("argv, flag", [
    (["solve", "--scenario", "pigou2", "--grid", "0"], "--grid"),
    (["sweep", "--scenario", "pigou2", "--k", "2", "--step", "-1", "--out", "x.csv"], "--step"),
    (["bpd", "--scenario", "pigou2", "--load", "a,b", "--k", "2", "--out", "x.csv"], "--load"),
    (["converge", "--scenario", "pigou2", "--rule", "r", "--n", "4,x", "--out", "c.csv"], "--n"),
])
def test_bad_values_name_flag(capsys, argv, flag):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INVALID and flag in err


def test_load_length_checked(tmp_path, capsys):
    code, _, err = run(capsys, "bpd", "--scenario", "pigou2", "--load", "0.5", "--k", "2",
                       "--out", str(tmp_path / "b.csv"))
    assert code == EXIT_INVALID and "expected 2 values" in err


@pytest.mark.parametrize("content", ["", "{", "[]", '{"edges": 3}', '{"schema_version": 99}'])
def test_malformed_scenario(tmp_path, capsys, content):
    f = tmp_path / "bad.json"
    f.write_text(content)
    code, _, err = run(capsys, "solve", "--scenario", str(f))
    assert code == EXIT_INVALID and err.startswith("pslab: invalid input")


def test_malformed_rule(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text('{"schema_version": 1, "grid_m": 10, "K": 1, "states": {"s1": []}}')
    code, _, err = run(capsys, "verify", "--scenario", "pigou2", "--rule", str(f))
    assert code == EXIT_INVALID


def test_missing_file(capsys):
    code, _, _ = run(capsys, "solve", "--scenario", "/nonexistent/x.json")
    assert code == EXIT_INVALID


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, data = run_json(capsys, "sweep", "--scenario", "pigou2", "--grid", "5", "--k", "2",
                          "--step", "0.25", "--out", str(out))
    lines = out.read_text().splitlines()
    assert code == EXIT_OK and lines[0] == "x1,x2,J*,status,solve_ms"
    assert len(lines) == 4 and all(line.endswith(",") for line in lines[1:])


def test_bpd_pigou(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, data = run_json(capsys, "bpd", "--scenario", "pigou2", "--load", "0.25,0.75", "--k", "2",
                          "--step", "0.25", "--out", str(out))
    assert code == EXIT_OK and data["agree_exactly"] and data["cells"] == 3


def test_acl_full_revelation(capsys):
    code, data = run_json(capsys, "acl", "--scenario", "pigou2", "--rule", "pigou2_full_revelation")
    assert code == EXIT_FAILED and not data["direct_pass"]


def test_converge(tmp_path, capsys):
    rule = tmp_path / "rule.json"
    run(capsys, "solve", "--scenario", "pigou2", "--grid", "5", "--out", str(rule))
    out = tmp_path / "c.csv"
    code, data = run_json(capsys, "converge", "--scenario", "pigou2", "--grid", "5", "--rule", str(rule),
                          "--n", "4,16,64", "--out", str(out))
    assert code == EXIT_OK and data["loglog"]["slope"] < -1.5
    assert out.read_text().splitlines()[0] == "n,max_gap,witness_traveler,witness_route,eval_ms"


def test_baselines(capsys):
    code, data = run_json(capsys, "baselines", "--scenario", "pigou2", "--grid", "5")
    assert code == EXIT_OK
    assert data["full_information"] <= data["ps_bcwe"] <= data["no_information"]["value"]


def test_sample_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        run(capsys, "sample", "--scenario", "pigou2", "--rule", "pigou2_full_revelation",
            "--seed", "5", "--count", "50", "--out", str(f))
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["solve", "--scenario", "diamond4", "--grid", "2", "--k", "2"],
    ["baselines", "--scenario", "pigou2", "--grid", "4"],
    ["acl", "--scenario", "pigou2", "--rule", "pigou2_full_revelation"],
])
def test_stdout_byte_identical(capsys, argv):
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "pslab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "solve" in res.stdout
