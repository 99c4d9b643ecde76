import json

import pandas as pd
import pytest

from coop_forecaster.__main__ import main
from coop_forecaster.Scenario.scenario_io import read_scenarios
from coop_forecaster.Utils.report_logger import ReportLogger

TINY_RUN = {
    "gen": {"n_agents": 4, "n_views": 3, "history_steps": 10, "future_steps": 5, "arm_length": 30.0,
            "lane_sample_step": 6.0, "occlusion_sectors": 1},
    "model": {"d": 8, "n_heads": 2, "motion_sa_layers": 1, "st_sa_layers": 1, "edge_sa_layers": 1, "mfg_layers": 1,
              "alg_layers": 1, "cig_layers": 1, "K": 3, "history_steps": 10, "future_steps": 5, "ffn_ratio": 2},
    "train": {"epochs": 1, "batch_size": 2, "lr0": 0.01, "val_split": 0.0},
}


@pytest.fixture
def workspace(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps(TINY_RUN))
    data = tmp_path / "data" / "scenarios.jsonl"
    assert main(["--config", str(config), "gen", "--out", str(data), "--n", "3", "--seed", "7"]) == 0
    return tmp_path, str(config), str(data)


def test_gen_is_reproducible(workspace):
    root, config, data = workspace
    again = root / "again" / "scenarios.jsonl"
    assert main(["--config", config, "gen", "--out", str(again), "--n", "3", "--seed", "7"]) == 0
    assert again.read_bytes() == (root / "data" / "scenarios.jsonl").read_bytes()
    assert len(read_scenarios(data)) == 3
    assert (root / "data" / "resolved_config.json").exists()


def test_baseline_eval_writes_reports(workspace):
    root, config, data = workspace
    reports = root / "reports"
    assert main(["--config", config, "eval", "--data", data, "--baseline", "--reports", str(reports)]) == 0
    report = pd.read_csv(reports / "report.csv")
    assert list(report.columns) == ReportLogger.fieldnames
    assert report.loc[0, "forecaster"] == "constant_velocity"
    assert report.loc[0, "agents"] == 3
    assert len(pd.read_csv(reports / "breakdown.csv")) == 3


def test_cooperation_sweep_and_masking(workspace):
    root, config, data = workspace
    reports = root / "sweep"
    assert main(["--config", config, "eval", "--data", data, "--baseline", "--coop-sweep",
                 "--reports", str(reports)]) == 0
    assert list(pd.read_csv(reports / "report.csv")["value"]) == ["vehicle-only", "V2I", "V2V", "V2V&I"]
    assert main(["--config", config, "eval", "--data", data, "--baseline", "--mask-views", "infrastructure,vehicle",
                 "--reports", str(root / "masked")]) == 0


def test_robustness_sweeps(workspace):
    root, config, data = workspace
    assert main(["--config", config, "robust", "--data", data, "--baseline", "--latency", "0,1,2",
                 "--reports", str(root / "latency")]) == 0
    assert list(pd.read_csv(root / "latency" / "report.csv")["value"]) == [0, 1, 2]
    assert main(["--config", config, "robust", "--data", data, "--baseline", "--drop", "0.1,0.5",
                 "--reports", str(root / "drop")]) == 0


def test_errors_exit_with_json_on_stderr(workspace, capsys):
    root, config, data = workspace
    code = main(["--config", config, "eval", "--data", str(root / "absent.jsonl"), "--baseline",
                 "--reports", str(root / "r")])
    assert code == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record == {"error": "ConfigError", "exit_code": 2, "message": record["message"]}
    assert "absent.jsonl" in record["message"]
    assert main(["--config", config, "eval", "--data", data, "--baseline", "--ablate", "no_mfg",
                 "--reports", str(root / "r")]) == 2


def test_corrupt_scenario_file_is_a_data_error(workspace, capsys):
    root, config, _ = workspace
    broken = root / "broken.jsonl"
    broken.write_text("{\"version\": 1}\n")
    assert main(["--config", config, "eval", "--data", str(broken), "--baseline", "--reports", str(root / "r")]) == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "ScenarioParseError"


def test_labels_train_eval_viz_pipeline(workspace):
    root, config, data = workspace
    labels = root / "data" / "labels.jsonl"
    checkpoint = root / "checkpoints" / "model.ckpt"
    assert main(["--config", config, "labels", "--data", data, "--out", str(labels)]) == 0
    assert main(["--config", config, "train", "--data", data, "--labels", str(labels), "--out", str(checkpoint)]) == 0
    assert checkpoint.exists()
    assert (root / "checkpoints" / "history.csv").exists()
    assert (root / "checkpoints" / "history.svg").exists()
    assert main(["--config", config, "eval", "--data", data, "--ckpt", str(checkpoint),
                 "--reports", str(root / "eval")]) == 0
    assert pd.read_csv(root / "eval" / "report.csv").loc[0, "forecaster"] == "v2x_graph"
    assert main(["--config", config, "eval", "--data", data, "--ckpt", str(checkpoint), "--ablate",
                 "mask_coop_in_cig", "--reports", str(root / "ablated")]) == 0

    figures = root / "figures"
    assert main(["--config", config, "viz", "--data", data, "--ckpt", str(checkpoint), "--out", str(figures)]) == 0
    first = sorted(p.read_bytes() for p in figures.glob("scenario_*.svg"))
    assert len(first) == 3
    assert main(["--config", config, "viz", "--data", data, "--ckpt", str(checkpoint), "--out", str(figures)]) == 0
    assert sorted(p.read_bytes() for p in figures.glob("scenario_*.svg")) == first


@pytest.mark.slow
def test_training_reduces_loss_on_generated_data(tmp_path):
    run = dict(TINY_RUN, train={"epochs": 6, "batch_size": 4, "lr0": 0.01, "val_split": 0.25})
    config = tmp_path / "run.json"
    config.write_text(json.dumps(run))
    data, labels = tmp_path / "scenarios.jsonl", tmp_path / "labels.jsonl"
    checkpoint = tmp_path / "out" / "model.ckpt"
    assert main(["--config", str(config), "gen", "--out", str(data), "--n", "16", "--seed", "1"]) == 0
    assert main(["--config", str(config), "labels", "--data", str(data), "--out", str(labels)]) == 0
    assert main(["--config", str(config), "train", "--data", str(data), "--labels", str(labels),
                 "--out", str(checkpoint)]) == 0
    history = pd.read_csv(tmp_path / "out" / "history.csv")
    assert history["loss_total"].iloc[-1] < history["loss_total"].iloc[0]
    assert history["val_min_ade"].notna().all()
