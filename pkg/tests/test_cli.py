from __future__ import annotations

import json

import pytest

from cpalab.cli import main


@pytest.fixture()
def config_path(tmp_path):
    config = {
        "experiment_id": "cli-tiny",
        "game": "hybrid-kem",
        "kem": "leaky-mock",
        "asym": "plaintext-identity",
        "mock_ct_len": 8,
        "ss_len": 8,
        "train_n": 100,
        "val_n": 30,
        "test_n": 30,
        "network": [8],
        "schedule": {"max_epochs": 2, "batch_size": 64},
        "seed": 9,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_generate_train_evaluate_test_chain(tmp_path, config_path, capsys):
    out = tmp_path / "runs"
    assert main(["generate", "--config", str(config_path), "--out", str(out)]) == 0
    dataset = out / "cli-tiny" / "dataset.bin"
    assert dataset.exists()

    assert main(["train", "--config", str(config_path), "--dataset", str(dataset),
                 "--out", str(out)]) == 0
    checkpoint = out / "cli-tiny" / "checkpoint.mlp"
    assert checkpoint.exists() and (out / "cli-tiny" / "history.csv").exists()

    predictions = tmp_path / "preds.csv"
    assert main(["evaluate", "--checkpoint", str(checkpoint), "--dataset", str(dataset),
                 "--out", str(predictions)]) == 0
    assert predictions.read_text().startswith("label,prob,pred")

    capsys.readouterr()
    assert main(["test", "--predictions", str(predictions)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert set(result) == {"n", "k", "accuracy", "p_value", "log2_p_value", "alpha", "reject"}
    assert result["n"] == 320  # evaluate covers the whole dataset file


def test_run_and_report(tmp_path, config_path, capsys):
    out = tmp_path / "runs"
    assert main(["run", "--config", str(config_path), "--out", str(out), "--seed", "123"]) == 0
    report_path = out / "cli-tiny" / "report.json"
    assert report_path.exists()
    report = json.loads(report_path.read_text())
    assert report["seed"] == 123

    capsys.readouterr()
    assert main(["report", "--results", str(report_path)]) == 0
    table = capsys.readouterr().out
    assert "cli-tiny" in table and "experiment" in table


def test_plot_command(tmp_path, config_path):
    out = tmp_path / "runs"
    main(["run", "--config", str(config_path), "--out", str(out)])
    history = out / "cli-tiny" / "history.csv"
    svg = tmp_path / "plot.svg"
    assert main(["plot", "--history", str(history), "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<?xml")


def test_include_iv_flag_changes_dataset(tmp_path):
    config = {
        "experiment_id": "iv-check",
        "cipher": "aes-cbc",
        "train_n": 30, "val_n": 10, "test_n": 10,
        "network": [4],
        "schedule": {"max_epochs": 1},
        "seed": 1,
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config))
    out_a, out_b = tmp_path / "with", tmp_path / "without"
    assert main(["generate", "--config", str(path), "--out", str(out_a)]) == 0
    assert main(["generate", "--config", str(path), "--out", str(out_b),
                 "--include-iv", "false"]) == 0
    from cpalab.datasets import load_dataset

    assert load_dataset(out_a / "iv-check" / "dataset.bin").feature_len == 32
    assert load_dataset(out_b / "iv-check" / "dataset.bin").feature_len == 16


def test_matrix_command_tiny(tmp_path, capsys):
    base = {
        "experiment_id": "mx",
        "train_n": 40, "val_n": 10, "test_n": 10,
        "network": [4],
        "schedule": {"max_epochs": 1, "batch_size": 32},
        "seed": 2,
    }
    path = tmp_path / "base.json"
    path.write_text(json.dumps(base))
    out = tmp_path / "mruns"
    assert main(["matrix", "--config", str(path), "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "inner \\ outer" in table
    assert table.count("skipped") == 8
    rows = json.loads((out / "matrix.json").read_text())
    assert sum(r["status"] == "ok" for r in rows) == 17
