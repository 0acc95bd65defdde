import json

import pytest

from climcast.cli import SUBCOMMANDS, cli_dispatch

SMALL_RUN = {
    "seed": 3,
    "synthetic": {"n_months": 240},
    "hyperparams": {"lstm_units": 8, "attention_units": 8, "learning_rate": 0.005, "batch_size": 32},
    "training": {"max_epochs": 5, "early_stopping_patience": 2},
    "tuning": {"n_trials": 2, "max_epochs": 3, "early_stopping_patience": 1,
               "search_space": {"lstm_units": [4, 8], "attention_units": [4], "batch_size": [64]}},
    "evaluation": {"n_boot": 50},
    "forecast": {"horizon": 3},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL_RUN))
    return path


def run(*argv):
    return cli_dispatch([str(a) for a in argv])


def test_unknown_subcommand_exits_2(capsys):
    assert run("explode") == 2
    assert "usage" in capsys.readouterr().err


def test_missing_config_exits_3(tmp_path, capsys):
    assert run("synth", "--config", tmp_path / "nope.json", "--run-dir", tmp_path / "r") == 3
    assert "nope.json" in capsys.readouterr().err


def test_invalid_config_lists_keys(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"training": {"max_epochs": 0, "bogus": 1}}))
    assert run("train", "--config", bad, "--run-dir", tmp_path / "r") == 3
    err = capsys.readouterr().err
    assert "training.max_epochs" in err and "training.bogus" in err


def test_bad_override_exits_3(tmp_path, capsys):
    assert run("synth", "--run-dir", tmp_path / "r", "--set", "synthetic.n_months=5") == 3
    assert "synthetic.n_months" in capsys.readouterr().err


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_on_every_subcommand(sub, capsys):
    assert run(sub, "--help") == 0
    assert "usage" in capsys.readouterr().out


def test_missing_data_is_exit_1(tmp_path):
    assert run("quality", "--run-dir", tmp_path / "empty") == 1


def test_smoke_chain(tmp_path, config):
    rd = tmp_path / "run"
    for sub in ("synth", "quality", "preprocess", "features", "tune", "train", "evaluate", "forecast", "report"):
        assert run(sub, "--config", config, "--run-dir", rd) == 0, sub
    for name in ("config.json", "data.csv", "params.json", "history.csv", "metrics.json", "tuning.csv",
                 "best_hyperparams.json", "forecast.json", "report.json", "plots/actual_vs_predicted.csv"):
        assert (rd / name).exists(), name
    metrics = json.loads((rd / "metrics.json").read_text())
    assert "r2" in metrics["metrics"]
    assert len(json.loads((rd / "forecast.json").read_text())["forecast"]) == 3
    params = json.loads((rd / "params.json").read_text())
    tuned = json.loads((rd / "best_hyperparams.json").read_text())
    assert params["dims"]["d_h"] == tuned["hyperparams"]["lstm_units"]


def test_seed_flag_changes_data(tmp_path, config):
    run("synth", "--config", config, "--run-dir", tmp_path / "a")
    run("synth", "--config", config, "--run-dir", tmp_path / "b", "--seed", 4)
    run("synth", "--config", config, "--run-dir", tmp_path / "c")
    a, b, c = ((tmp_path / d / "data.csv").read_bytes() for d in "abc")
    assert a == c != b


def test_metrics_are_byte_identical_across_runs(tmp_path, config):
    outs = []
    for d in ("one", "two"):
        rd = tmp_path / d
        for sub in ("synth", "features", "train", "evaluate", "report"):
            assert run(sub, "--config", config, "--run-dir", rd, "--set", "hyperparams.lstm_units=6") == 0
        outs.append((rd / "metrics.json").read_bytes())
    assert outs[0] == outs[1]
