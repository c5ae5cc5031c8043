import json
import subprocess
import sys

import pytest

from sparsespike import __version__
from sparsespike.cli import run
from sparsespike.io import parse_grid, read_csv


def cli(*argv):
    return subprocess.run([sys.executable, "-m", "sparsespike", *argv], capture_output=True, text=True)


def comment_config(comment):
    prefix = f"# sparsespike {__version__} config="
    assert comment.startswith(prefix)
    return json.loads(comment[len(prefix):])


def test_potential_curve_row_count(tmp_path):
    out = tmp_path / "pot.csv"
    assert run(["potential-curve", "--prior", "bernoulli", "--rho", "1e-8", "--gamma", "0.1:3:60",
                "--out", str(out)]) == 0
    comment, header, rows = read_csv(out)
    assert len(rows) == 60
    assert header[:2] == ["gamma", "lambda"]
    cfg = comment_config(comment)
    assert cfg["gamma"] == "0.1:3:60" and cfg["rho"] == "1e-8" and cfg["quad.nodes"] == 2000
    assert "out" not in cfg and "workers" not in cfg


def test_byte_identical_reruns_and_worker_count(tmp_path):
    args = ["potential-curve", "--rho", "1e-4,1e-2", "--gamma", "0.5:2:6"]
    paths = [tmp_path / f"{i}.csv" for i in range(3)]
    assert run(args + ["--out", str(paths[0])]) == 0
    assert run(args + ["--out", str(paths[1])]) == 0
    assert run(args + ["--out", str(paths[2]), "--workers", "2"]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()
    assert len(read_csv(paths[0])[2]) == 12


def test_stdout_default(capsys):
    assert run(["se-curve", "--rho", "1e-3", "--w", "0.1,1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# sparsespike") and len(lines) == 4


@pytest.mark.parametrize("argv", [
    ["potential-curve", "--rho", "0.1", "--gamma", "1", "--bogus"],
    ["potential-curve", "--rho", "0.1", "--gamma", "1", "--lambda", "3"],
    ["potential-curve", "--gamma", "1"],
    ["potential-curve", "--rho", "0.1"],
    ["potential-curve", "--rho", "0.1", "--gamma", "1:2"],
    ["wishart-curve", "--rho-v", "1e-4", "--w", "1"],
    ["nonsense"],
])
def test_config_errors_exit_2(argv):
    res = cli(*argv)
    assert res.returncode == 2
    assert "usage" in res.stderr


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"rho": 0.1, "gamma": "1", "n": 100}))
    assert cli("potential-curve", "--config", str(cfg)).returncode == 2


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"prior": {"kind": "bernoulli_rademacher", "rho": 0.05}, "gamma": "0.5,1",
                               "quad": {"nodes": 800}}))
    out = tmp_path / "o.csv"
    assert run(["potential-curve", "--config", str(cfg), "--out", str(out)]) == 0
    c = comment_config(read_csv(out)[0])
    assert (c["prior"], c["rho"], c["gamma"], c["quad.nodes"]) == ("bernoulli_rademacher", 0.05, "0.5,1", 800)
    # flags win; an SNR flag replaces the file's SNR grid
    assert run(["potential-curve", "--config", str(cfg), "--rho", "0.01", "--lambda", "10", "--out", str(out)]) == 0
    c = comment_config(read_csv(out)[0])
    assert c["rho"] == "0.01" and c["lambda"] == "10" and "gamma" not in c
    assert len(read_csv(out)[2]) == 1


def test_wishart_and_threshold(tmp_path):
    w = tmp_path / "w.csv"
    assert run(["wishart-curve", "--rho-v", "1e-6", "--gamma", "0.5,2", "--out", str(w)]) == 0
    _, header, rows = read_csv(w)
    assert len(rows) == 2 and "mmse_vv_norm" in header
    assert float(rows[1][header.index("mmse_vv_norm")]) <= 0.05
    t = tmp_path / "t.csv"
    assert run(["threshold", "--rho", "1e-3", "--out", str(t)]) == 0
    _, header, rows = read_csv(t)
    assert header == ["kind", "prior", "rho", "lambda", "gamma", "w"]
    kinds = {r[0]: r for r in rows}
    assert set(kinds) == {"statistical", "algorithmic"}
    assert float(kinds["algorithmic"][5]) == pytest.approx(0.37025, rel=1e-3)


def test_threshold_precondition_exits_2():
    assert cli("threshold", "--rho", "0.5", "--kind", "algorithmic").returncode == 2


def test_computation_failure_exits_1(monkeypatch, capsys):
    from sparsespike import cli as cli_mod
    from sparsespike.potential import ThresholdNotFoundError

    def fail(*a, **k):
        raise ThresholdNotFoundError("no crossing")

    monkeypatch.setattr(cli_mod, "statistical_threshold", fail)
    assert run(["threshold", "--rho", "1e-3", "--kind", "statistical"]) == 1
    assert "no crossing" in capsys.readouterr().err


def test_validate_quick():
    res = cli("validate", "--level", "quick")
    assert res.returncode == 0, res.stdout + res.stderr
    report = json.loads(res.stdout)
    assert {"nishimori_first_order", "nishimori_second_order", "immse_exact", "scalar_immse",
            "potential_stationarity"} <= {r["check"] for r in report}
    for r in report:
        assert set(r) == {"check", "value", "std_error", "pass"} and r["pass"] is True


def test_amp_run_outputs(tmp_path):
    assert run(["amp-run", "--n", "600", "--rho", "0.05", "--w", "2", "--seeds", "3", "--seed", "10",
                "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"config", "results", "version", "elapsed_seconds"}
    assert [r["seed"] for r in summary["results"]] == [10, 11, 12]
    for r in summary["results"]:
        comment, header, rows = read_csv(tmp_path / f"trajectory_seed{r['seed']}.csv")
        assert len(rows) == r["iterations"] and comment_config(comment)["n"] == 600
        assert "matrix_mse_norm" in header


def test_amp_run_needs_directory():
    assert cli("amp-run", "--n", "100", "--rho", "0.05", "--w", "2").returncode == 2


@pytest.mark.slow
def test_amp_run_twenty_seeds(tmp_path):
    assert run(["amp-run", "--n", "4000", "--rho", "0.05", "--w", "2", "--seeds", "20", "--workers", "4",
                "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["results"]) == 20
    assert len(list(tmp_path.glob("trajectory_seed*.csv"))) == 20


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("1:100:3:log") == pytest.approx([1.0, 10.0, 100.0])
    assert parse_grid("1e-3,0.5") == [1e-3, 0.5]
    assert parse_grid(2) == [2.0]
    for bad in ("1:2", "1:2:0", "0:1:3:log", "1:2:3:cubic", ","):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_failed_validation_exits_1(monkeypatch, capsys):
    from sparsespike import validation
    from sparsespike.oracle import CheckResult

    monkeypatch.setattr(validation, "run_checks", lambda *a: [CheckResult("fake", 1.0, 0.1, False)])
    assert run(["validate"]) == 1
    assert json.loads(capsys.readouterr().out)[0]["pass"] is False
