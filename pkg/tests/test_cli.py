import csv
import io
import json
import subprocess
import sys

import pytest

from qkdfinite import __version__
from qkdfinite import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ideal_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"M": 10000, "delta": 0.05, "k": 1000, "t": 32,
                                "cascade_passes": 4, "loss_prob": 0.0, "seed": 7,
                                "channel": {"kind": "ideal"},
                                "epsilons": {"eps": 1e-9, "eps_ec": 1e-10,
                                             "eps_bar": 1e-10, "eps_bar_prime": 1e-11}}))
    return path


def test_version_and_help(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0 and __version__ in out
    code, out, _ = run(["--help"], capsys)
    assert code == 0
    for sub in ("simulate", "rate", "capacity", "entropy"):
        assert sub in out


def test_simulate_ideal(ideal_config, tmp_path, capsys):
    out_file = tmp_path / "out.json"
    code, out, _ = run(["simulate", str(ideal_config), "-o", str(out_file)], capsys)
    assert code == 0
    assert out.startswith("flags=sift:pass,pe:pass,ec:pass ")
    doc = json.loads(out_file.read_text())
    assert doc["key_a"] == doc["key_b"] and doc["key_length"] > 0


def test_simulate_deterministic_files(ideal_config, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["simulate", str(ideal_config), "-o", str(a)], capsys)[0] == 0
    assert run(["simulate", str(ideal_config), "-o", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_abort_is_success(tmp_path, capsys):
    path = tmp_path / "eve.json"
    path.write_text(json.dumps({"M": 10000, "k": 2000,
                                "channel": {"kind": "intercept_resend", "fraction": 1.0}}))
    code, out, err = run(["simulate", str(path)], capsys)
    assert code == 0
    assert json.loads(out)["flags"]["pe"] == "abort"
    assert "pe:abort" in err


@pytest.mark.parametrize("doc", [
    {"M": 100, "k": 100},
    {"M": 1000, "colour": "blue"},
    {"M": 1000, "channel": {"kind": "ideal", "p": 0.1}},
    {"M": 1000, "epsilons": {"eps": 1e-9, "delta": 1}},
    {"k": 10},
])
def test_simulate_config_errors(doc, tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["simulate", str(path)], capsys)
    assert code == 2
    assert "error" in err


def test_simulate_unreadable(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert run(["simulate", str(path)], capsys)[0] == 2
    assert run(["simulate", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_rate_json(capsys):
    code, out, _ = run(["rate", "--M", "10000000", "--qber", "0.01"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["r_per_signal"] > 0 and rep["feasible"]


def test_rate_infeasible_budget(capsys):
    code, out, _ = run(["rate", "--M", "10000", "--qber", "0.01", "--eps", "1e-10",
                        "--eps-ec", "1e-9"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert not rep["feasible"] and rep["r_per_signal"] == 0


def test_rate_sweep_csv(capsys):
    code, out, _ = run(["rate", "--qber", "0.02", "--sweep", "M=10000:1000000:3"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == cli.RATE_CSV_COLUMNS
    assert len(rows) == 1 + 3
    for row in rows[1:]:
        float(row[3])  # plain shortest round-trip doubles
        assert "np." not in ",".join(row)


@pytest.mark.parametrize("argv", [
    ["rate", "--qber", "0.01"],
    ["rate", "--M", "10", "--qber", "0.01"],
    ["rate", "--M", "1000", "--qber", "0.6"],
    ["rate", "--qber", "0.01", "--sweep", "N=1:2:3"],
    ["rate", "--M", "1000", "--qber", "0.01", "--eps", "2"],
    ["rate", "--M", "x"],
    ["capacity", "--gamma-min", "0.4", "--gamma-max", "0.1"],
    ["capacity", "--curve", "1.5"],
    ["nonsense"],
])
def test_bad_flags_exit_2(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_capacity_sweep_csv(capsys):
    code, out, _ = run(["capacity", "--gamma-min", "0", "--gamma-max", "0.5", "--steps", "11"],
                       capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 11
    assert tuple(rows[0]) == cli.CAPACITY_CSV_COLUMNS
    assert float(rows[0]["q"]) == pytest.approx(1, abs=1e-9)
    assert float(rows[-1]["q"]) == pytest.approx(0, abs=1e-9)
    assert all(r["degradable"] == "1" for r in rows)


def test_capacity_curve_csv(capsys):
    code, out, _ = run(["capacity", "--curve", "0.5", "--points", "21"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 21
    assert all(abs(float(r["I"])) <= 1e-12 for r in rows)


def test_entropy_uniform_bit(tmp_path, capsys):
    path = tmp_path / "dist.json"
    path.write_text(json.dumps({"distribution": [0.5, 0.5]}))
    code, out, _ = run(["entropy", str(path)], capsys)
    assert code == 0
    table = dict(line.split() for line in out.strip().splitlines())
    for key in ("H", "H_min", "H_max"):
        assert float(table[key]) == pytest.approx(1.0, abs=1e-12)


def test_entropy_state_and_joint(tmp_path, capsys):
    path = tmp_path / "state.json"
    bell = [[[0.5, 0], [0, 0], [0, 0], [0.5, 0]],
            [[0, 0], [0, 0], [0, 0], [0, 0]],
            [[0, 0], [0, 0], [0, 0], [0, 0]],
            [[0.5, 0], [0, 0], [0, 0], [0.5, 0]]]
    path.write_text(json.dumps({"density_matrix": bell, "dims": [2, 2],
                                "joint": [[0.4, 0.1], [0.2, 0.3]],
                                "distribution": [0.9, 0.1]}))
    code, out, _ = run(["entropy", str(path), "--eps", "0.05"], capsys)
    assert code == 0
    table = dict(line.split() for line in out.strip().splitlines())
    assert float(table["H_min(A|B)"]) == pytest.approx(-1, abs=1e-3)
    assert float(table["H_min(X|Y)"]) == pytest.approx(0.514573, abs=1e-6)
    assert "H_max^eps" in table


def test_entropy_bad_input(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"distribution": [0.5, 0.4]}))
    assert run(["entropy", str(path)], capsys)[0] == 2
    path.write_text(json.dumps({"probabilities": [0.5, 0.5]}))
    assert run(["entropy", str(path)], capsys)[0] == 2


def test_internal_invariant_exit_1(monkeypatch, ideal_config, capsys):
    def broken(*args, **kwargs):
        raise AssertionError("invariant")
    monkeypatch.setattr(cli, "run_protocol", broken)
    assert run(["simulate", str(ideal_config)], capsys)[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qkdfinite", "capacity", "--steps", "3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == ",".join(cli.CAPACITY_CSV_COLUMNS)
