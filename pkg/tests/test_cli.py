import json

import numpy as np
import pytest

from sparse_portfolio import cli
from sparse_portfolio.experiments import read_csv

SOLVER = {"nu_schedule": [0.01, 1.0, 100.0, 10000.0], "max_iters": 2000}


def write_config(tmp_path, **overrides):
    cfg = {
        "seed": 0,
        "data": {"synthetic": {"n_assets": 12, "n_samples": 80, "sectors": 3}},
        "partition": {"by_sector": {"k": 2}},
        "objective": {"model": "markowitz", "gamma_return": 0.1},
        "solver": SOLVER,
        "output_dir": "out",
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_solve_roundtrip(tmp_path, capsys):
    path = write_config(tmp_path)
    assert cli.run(["solve", "--config", str(path)]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert cli.check_report(report) == []
    assert report["seed"] == 0 and len(report["config_hash"]) == 16
    assert set(report["state"]) == {"w", "v", "u", "alpha"}
    header, rows = read_csv(tmp_path / "out" / "weights.csv")
    np.testing.assert_allclose([float(x) for x in rows[0]], report["weights"])
    assert header == report["tickers"]


def test_solve_deterministic(tmp_path):
    path = write_config(tmp_path, objective={"model": "cvar", "beta": 0.9})
    out = []
    for d in ("a", "b"):
        assert cli.run(["solve", "--config", str(path), "--output-dir", d]) == 0
        out.append(json.loads((tmp_path / d / "report.json").read_text()))
    assert out[0]["weights"] == out[1]["weights"]
    assert out[0]["alpha"] is not None


def test_report_check_flags_tampering(tmp_path):
    path = write_config(tmp_path)
    cli.run(["solve", "--config", str(path)])
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    report["weights"] = [1.0 / len(report["weights"])] * len(report["weights"])
    assert any("exceed cap" in e for e in cli.check_report(report))


def test_infeasible_budgets_exit_1(tmp_path, capsys):
    path = write_config(tmp_path, partition={"by_sector": {"p": 0.5}})
    assert cli.run(["solve", "--config", str(path)]) == 1
    assert "sum of lower bounds" in capsys.readouterr().err


def test_all_errors_listed(tmp_path, capsys):
    path = write_config(
        tmp_path,
        objective={"model": "sharpe", "colour": 1},
        solver={"bogus": 1},
        data={"prices": "nope.csv", "synthetic": {}},
    )
    assert cli.run(["solve", "--config", str(path)]) == 1
    err = capsys.readouterr().err
    assert err.count("  - ") == 3
    assert "unknown solver keys" in err and "exactly one" in err


def test_missing_config_file(tmp_path, capsys):
    assert cli.run(["solve", "--config", str(tmp_path / "missing.json")]) == 1
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["bogus"], ["solve"], ["escape", "--model", "cvar"]])
def test_usage_errors(argv):
    assert cli.run(argv) == 1


def test_runtime_failure_exit_2(tmp_path, monkeypatch, capsys):
    def boom(*_):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(cli, "solve", boom)
    assert cli.run(["solve", "--config", str(write_config(tmp_path))]) == 2
    assert "solver exploded" in capsys.readouterr().err


def test_synth_then_prices_config(tmp_path):
    data = tmp_path / "data"
    assert cli.run(["synth", "--n-assets", "6", "--n-samples", "30", "--sectors", "2",
                    "--seed", "3", "--output-dir", str(data)]) == 0
    sectors = json.loads((data / "sectors.json").read_text())
    cfg = write_config(tmp_path, data={"prices": "data/prices.csv", "sectors": sectors},
                       partition={"global_k": 2})
    assert cli.run(["estimate", "--config", str(cfg)]) == 0
    header, rows = read_csv(tmp_path / "out" / "sigma.csv")
    sigma = np.array(rows, float)
    assert len(header) == 6 and np.allclose(sigma, sigma.T)
    _, ret_rows = read_csv(data / "returns.csv")
    assert len(ret_rows) == 30
    assert cli.run(["solve", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert len(report["support"]) <= 2


def test_escape_example(tmp_path, capsys):
    assert cli.run(["escape", "--model", "markowitz", "--n", "15", "--k", "1", "--trials", "20",
                    "--seed", "7", "--output-dir", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "escape_markowitz.csv")
    assert rows == [["markowitz", "15", "1", "20", "0.0"]]


def test_escape_k_above_n(tmp_path):
    assert cli.run(["escape", "--model", "cvar", "--n", "3", "--k", "4",
                    "--output-dir", str(tmp_path)]) == 1


def test_frontier_and_oracle(tmp_path):
    path = write_config(tmp_path, data={"synthetic": {"n_assets": 10, "n_samples": 60, "sectors": 4}})
    assert cli.run(["frontier", "--config", str(path), "--grid", "0", "1", "--k", "1"]) == 0
    header, rows = read_csv(tmp_path / "out" / "frontier_markowitz.csv")
    assert len(rows) == 6 and header[0] == "label"
    assert cli.run(["oracle", "--config", str(path), "--k", "3", "--timing-trials", "1",
                    "--time-cap", "5"]) == 0
    summary = json.loads((tmp_path / "out" / "oracle.json").read_text())
    assert summary["subsets_evaluated"] == 120
    assert isinstance(summary["solver_value"], float)
    assert summary["solver_value"] >= summary["best_value"] - 1e-12
    assert (tmp_path / "out" / "timing.csv").is_file()
