import json
import math
import subprocess
import sys

import pytest

from ewaf import experiment
from ewaf.cli import main
from ewaf.experiment import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, TRAJECTORY_COLUMNS, bound_table

BASE = ["--experts", "3", "--horizon", "60", "--adversary", "bernoulli:0.3",
        "--advice", "walk:0.2", "--seed", "12345", "--verify"]


def test_csv_contract(tmp_path):
    out = tmp_path / "run.csv"
    assert main(BASE + ["--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == list(TRAJECTORY_COLUMNS)
    assert len(lines) == 61
    for line in lines[1:]:
        row = dict(zip(TRAJECTORY_COLUMNS, line.split(",")))
        assert float(row["regret"]) <= float(row["bound_eq1_prefix"]) + 1e-6
        assert float(row["ledger_mass"]) <= 1 + 1e-9
    sidecar = json.loads((tmp_path / "run.bounds.json").read_text())
    assert sidecar["ledger_summary"]["passed"]
    assert (tmp_path / "run.ledger.csv").read_text().count("\n") == 61


def test_json_document(tmp_path):
    out = tmp_path / "run.json"
    assert main(BASE + ["--format", "json", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert set(doc) >= {"config", "rows", "bound_report", "ledger_summary"}
    assert doc["config"]["seed"] == 12345 and len(doc["rows"]) == 60
    assert doc["bound_report"]["realized_regret"] == doc["rows"][-1]["regret"]


def test_floats_are_17_digits(tmp_path):
    out = tmp_path / "run.csv"
    main(BASE + ["--out", str(out)])
    eta = out.read_text().splitlines()[1].split(",")[1]
    assert float(eta) == math.sqrt(4 * math.log(3))
    assert len(eta.replace(".", "").lstrip("0")) <= 17


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_deterministic_output(tmp_path, fmt):
    a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
    assert main(BASE + ["--format", fmt, "--out", str(a)]) == EXIT_OK
    assert main(BASE + ["--format", fmt, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_increasing_custom_schedule_is_config_error(tmp_path, capsys):
    sched = tmp_path / "rates.txt"
    sched.write_text("0.1\n0.2\n0.3\n")
    out = tmp_path / "run.csv"
    code = main(["--experts", "2", "--horizon", "3", "--schedule", f"custom:{sched}", "--out", str(out)])
    assert code == EXIT_CONFIG
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [sched]
    assert "increases at t=2" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["--experts", "1", "--schedule", "paper"],
    ["--experts", "2", "--advice", "constant:0,1,0.5"],
    ["--experts", "2", "--schedule", "bogus"],
    ["--experts", "2", "--adversary", "fixed:/nonexistent"],
    ["--experts", "0"],
    ["--experts", "2", "--horizon", "5", "--schedule", "constant:-1"],
])
def test_config_errors(args, tmp_path):
    assert main(args + ["--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert not (tmp_path / "x.csv").exists()


def test_fixed_files(tmp_path):
    (tmp_path / "y.txt").write_text("0 1 1 0\n")
    (tmp_path / "f.csv").write_text("0,1\n0.5,0.5\n1,0\n0.2,0.8\n")
    (tmp_path / "eta.txt").write_text("1.0, 0.5, 0.5, 0.25  # decreasing\n")
    out = tmp_path / "o.json"
    code = main(["--experts", "2", "--horizon", "4", "--schedule", f"custom:{tmp_path / 'eta.txt'}",
                 "--adversary", f"fixed:{tmp_path / 'y.txt'}", "--advice", f"fixed:{tmp_path / 'f.csv'}",
                 "--loss", "sq", "--verify", "--format", "json", "--out", str(out)])
    assert code == EXIT_OK
    rows = json.loads(out.read_text())["rows"]
    assert [r["outcome"] for r in rows] == [0, 1, 1, 0]
    assert [r["eta_t"] for r in rows] == [1.0, 0.5, 0.5, 0.25]


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# sample\nexperts = 2\nhorizon = 7\nadvice = constant:0,1\nverify = true\nformat = json\n")
    out = tmp_path / "o.json"
    assert main(["--config", str(cfg), "--horizon", "9", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["config"]["horizon"] == 9 and doc["config"]["verify"] is True
    assert len(doc["rows"]) == 9


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("expertz = 2\n")
    assert main(["--config", str(cfg)]) == EXIT_CONFIG


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(experiment.OUT_DIR_ENV, str(tmp_path / "runs"))
    assert main(["--experts", "2", "--horizon", "5", "--format", "json"]) == EXIT_OK
    files = list((tmp_path / "runs").iterdir())
    assert len(files) == 1 and files[0].suffix == ".json"


def test_stdout_when_no_path(capsys, monkeypatch):
    monkeypatch.delenv(experiment.OUT_DIR_ENV, raising=False)
    assert main(["--experts", "2", "--horizon", "3"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0].startswith("t,eta_t,")


def test_verification_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(experiment.PrefixBound, "push", lambda self, eta: -1.0)
    out = tmp_path / "o.csv"
    assert main(["--experts", "2", "--horizon", "5", "--advice", "constant:0,1", "--out", str(out)]) == EXIT_VERIFY
    assert out.exists()


def test_bound_table_paper():
    rows = bound_table([2, 8], [10, 1000], ["paper"])
    assert len(rows) == 4
    assert all(r["ratio"] > 1 for r in rows)
    for r in rows:
        assert r["bound_eq1"] <= r["bound_corollary"] + 1e-9
        assert r["bound_corollary"] < r["bound_corollary_prior"]


def test_bound_table_constant_ratio_one():
    rows = bound_table([2, 10], [1, 100], ["constant:0.5"])
    assert all(abs(r["ratio"] - 1) <= 1e-12 for r in rows)


def test_bound_table_cli_contrast(tmp_path):
    out = tmp_path / "t.json"
    assert main(["--bound-table", "--experts", "2,16", "--horizon", "100",
                 "--schedule", "paper,cbl", "--format", "json", "--out", str(out)]) == EXIT_OK
    rows = json.loads(out.read_text())["rows"]
    assert [(r["schedule"], r["num_experts"]) for r in rows] == [
        ("cbl", 2), ("cbl", 16), ("paper", 2), ("paper", 16)]
    for cbl, paper in zip(rows[:2], rows[2:]):
        n_exp, n = paper["num_experts"], paper["horizon"]
        assert paper["bound_corollary"] == pytest.approx(math.sqrt(n * math.log(n_exp)), abs=1e-12)
        assert cbl["bound_corollary_prior"] == pytest.approx(
            math.sqrt(2 * n * math.log(n_exp)) + math.sqrt(0.125 * math.log(n_exp)), abs=1e-12)
        assert paper["bound_eq1"] < paper["bound_corollary"] < cbl["bound_corollary_prior"]
        # The older rate's own bound is also at most its own corollary.
        assert cbl["bound_eq1"] <= cbl["bound_corollary_prior"]


def test_module_entry_point(tmp_path):
    out = tmp_path / "o.csv"
    proc = subprocess.run([sys.executable, "-m", "ewaf", "--experts", "2", "--horizon", "4", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().count("\n") == 5
