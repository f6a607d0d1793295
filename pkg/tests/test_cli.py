import csv

import numpy as np
import pytest

from leapcatch.cli import main
from leapcatch.config import default_config, save_config
from leapcatch.nets import ActorCritic
from leapcatch.synthetic import generate_corpus


@pytest.fixture()
def short_config(tmp_path):
    cfg = default_config()
    cfg.train.num_envs = 8
    cfg.train.horizon = 8
    cfg.train.epochs = 2
    cfg.termination.episode_length = 1.0
    path = tmp_path / "config.yaml"
    save_config(cfg, path)
    return path


@pytest.fixture()
def checkpoint(tmp_path):
    net = ActorCritic(47, 12, backbone="recurrent", hidden_size=16,
                      mlp_width=32, seed=0)
    path = tmp_path / "net.lpck"
    net.save(path)
    return path


def test_no_command_errors():
    assert main([]) != 0


def test_make_config(tmp_path):
    rc = main(["make-config", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "config.yaml").exists()


def test_train_subcommand(short_config, tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["train", "--config", str(short_config), "--out", str(out),
               "--iterations", "2", "--fixed-height", "0.3"])
    assert rc == 0
    assert (out / "checkpoint_final.lpck").exists()
    assert (out / "metrics.csv").exists()
    assert "checkpoint:" in capsys.readouterr().out


def test_eval_subcommand(short_config, checkpoint, tmp_path, capsys):
    out = tmp_path / "ev"
    rc = main(["eval", "--config", str(short_config),
               "--checkpoint", str(checkpoint), "--out", str(out),
               "--trials", "2", "--heights", "0.3"])
    assert rc == 0
    assert (out / "eval.csv").exists()
    assert (out / "eval_summary.csv").exists()
    assert "success_rate=" in capsys.readouterr().out


def test_sweep_subcommand(short_config, checkpoint, tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--config", str(short_config),
               "--checkpoint", str(checkpoint), "--out", str(out),
               "--variable", "noise", "--values", "0.0,0.05",
               "--trials", "2"])
    assert rc == 0
    rows = list(csv.reader((out / "sweep.csv").open()))
    assert len(rows) == 3


def test_detect_subcommand(tmp_path):
    corpus = tmp_path / "corpus"
    generate_corpus(corpus, n_frames=5, seed=0)
    out = tmp_path / "det"
    rc = main(["detect", "--input", str(corpus), "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader((out / "detections.csv").open()))
    assert len(rows) == 6
    found = [r[1] for r in rows[1:]]
    assert all(f == "1" for f in found)


def test_replay_subcommand(short_config, checkpoint, tmp_path):
    out = tmp_path / "rp"
    rc = main(["replay", "--config", str(short_config),
               "--checkpoint", str(checkpoint), "--out", str(out),
               "--height", "0.3"])
    assert rc == 0
    assert (out / "trajectory.csv").exists()


def test_missing_config_is_config_error(tmp_path, capsys):
    rc = main(["train", "--config", str(tmp_path / "nope.yaml"),
               "--out", str(tmp_path)])
    assert rc == 2
    assert "error: config:" in capsys.readouterr().err


def test_bad_checkpoint_is_invalid_input(short_config, tmp_path, capsys):
    bad = tmp_path / "bad.lpck"
    bad.write_bytes(b"garbage")
    rc = main(["eval", "--config", str(short_config),
               "--checkpoint", str(bad), "--out", str(tmp_path)])
    assert rc == 3
    assert "error: invalid-input:" in capsys.readouterr().err


def test_detect_missing_corpus(tmp_path, capsys):
    rc = main(["detect", "--input", str(tmp_path / "nothing"),
               "--out", str(tmp_path)])
    assert rc == 2
    assert "error: config:" in capsys.readouterr().err


def test_detect_bad_hsv(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    generate_corpus(corpus, n_frames=1, seed=0)
    rc = main(["detect", "--input", str(corpus), "--out", str(tmp_path),
               "--hsv", "1,2,3"])
    assert rc == 2


def test_checkpoint_dim_mismatch_reported(short_config, tmp_path, capsys):
    net = ActorCritic(30, 12, backbone="memoryless", hidden_size=8,
                      mlp_width=16)
    ckpt = tmp_path / "small.lpck"
    net.save(ckpt)
    rc = main(["eval", "--config", str(short_config),
               "--checkpoint", str(ckpt), "--out", str(tmp_path),
               "--trials", "1"])
    assert rc == 3
    err = capsys.readouterr().err
    assert "30" in err and "47" in err
