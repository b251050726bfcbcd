import json

import pytest

from sfcsim.cli import main


@pytest.fixture
def config_path(tmp_path):
    cfg = {
        "topology_generate": {"n_nodes": 4, "target_degree": 2.0, "seed": 3},
        "policy": "greedy",
        "horizon": 20,
        "arrival_mean": 1.5,
        "lifetime_mean": 6.0,
        "repetitions": 1,
        "master_seed": 2,
        "out_dir": str(tmp_path / "results"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_validate_ok(config_path, capsys):
    assert main(["validate", "--config", str(config_path)]) == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"policy": "greedy"}))  # missing topology
    assert main(["validate", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_validate_unknown_key_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"topology_generate": {"n_nodes": 3}, "nope": 1}))
    assert main(["validate", "--config", str(bad)]) == 1


def test_simulate_writes_outputs(config_path, tmp_path, capsys):
    assert main(["simulate", "--config", str(config_path)]) == 0
    out_dir = tmp_path / "results"
    for name in ("metrics.csv", "episodes.jsonl", "summary.json",
                 "aar_vs_iteration.png", "anuc_vs_iteration.png"):
        assert (out_dir / name).exists()
    assert "requests accepted" in capsys.readouterr().out


def test_simulate_policy_and_out_overrides(config_path, tmp_path):
    out = tmp_path / "elsewhere"
    assert main(["simulate", "--config", str(config_path), "--policy", "tabu",
                 "--out", str(out), "--seed", "11"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["policy"] == "tabu"
    assert summary["config"]["master_seed"] == 11


def test_plot_rerenders(config_path, tmp_path):
    assert main(["simulate", "--config", str(config_path)]) == 0
    out_dir = tmp_path / "results"
    (out_dir / "aar_vs_iteration.png").unlink()
    assert main(["plot", "--in", str(out_dir)]) == 0
    assert (out_dir / "aar_vs_iteration.png").exists()


def test_plot_missing_inputs(tmp_path):
    assert main(["plot", "--in", str(tmp_path)]) == 1


def test_sweep_command(config_path, tmp_path):
    out = tmp_path / "sweep_out"
    assert main(["sweep", "--config", str(config_path), "--param", "arrival_mean",
                 "--values", "1.0,2.0", "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists()
    assert (out / "aar_vs_arrival_mean.png").exists()


def test_sweep_bad_values(config_path):
    assert main(["sweep", "--config", str(config_path), "--param", "arrival_mean",
                 "--values", "a,b"]) == 1
    assert main(["sweep", "--config", str(config_path), "--param", "nope",
                 "--values", "1,2"]) == 1
