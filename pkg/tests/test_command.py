# SPDX-License-Identifier: GPL-2.0-or-later

import os
import textwrap

import numpy as np
import pytest

import chrono
import chrono.command
import chrono.command_densify
import chrono.mdar

TINY = """\
seed = 1

[data]
n_samples = 8
n_val = 2
n_test = 3
height = 8
width = 8
workers = 1

[model]
d_feat = 8
d_time = 6
encoder_hidden = 8
spp_scales = 1, 2
n_layers = 1
n_heads = 2
ff_expansion = 1
decoder_hidden = 8

[train]
epochs = 1
batch_size = 4
val_min_gap_days = 0

[eval]
period_days = 60
step_days = 20
min_gap_days = 0
bootstrap_resamples = 50
attention_scenes = 2

[paths]
out = {out}
"""


def make_config(dirname):
    os.makedirs(dirname, exist_ok=True)
    fname = os.path.join(dirname, "chrono.conf")
    with open(fname, "w", encoding="utf-8") as f:
        f.write(textwrap.dedent(TINY.format(out=dirname)))
    return fname


def read_tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for fname in files:
            with open(os.path.join(dirpath, fname), "rb") as fh:
                out[os.path.relpath(os.path.join(dirpath, fname), root)] = fh.read()
    return out


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith("CHRONO_"):
            monkeypatch.delenv(name)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run"))
    conf = make_config(out)

    assert chrono.command.cmd(["synth", "-c", conf]) == chrono.EX_SUCCESS
    assert chrono.command.cmd(["train", "-c", conf]) == chrono.EX_SUCCESS

    return out, conf


def test_no_subcommand():
    assert chrono.command.cmd([]) == chrono.EX_FAILURE


def test_synth_is_reproducible(tmp_path):
    conf = make_config(str(tmp_path))

    assert chrono.command.cmd(["synth", "-c", conf]) == chrono.EX_SUCCESS
    first = read_tree(str(tmp_path / "dataset"))

    assert chrono.command.cmd(["synth", "-c", conf]) == chrono.EX_SUCCESS
    assert read_tree(str(tmp_path / "dataset")) == first

    assert (tmp_path / "synth" / "synth.json").exists()
    assert (tmp_path / "synth" / "config.snapshot").exists()
    assert not (tmp_path / "synth" / ".lock").exists()


def test_synth_flags_override_file(tmp_path):
    conf = make_config(str(tmp_path))
    other = str(tmp_path / "elsewhere")

    assert chrono.command.cmd(["synth", "-c", conf, "--data", other, "--seed", "4"]) == chrono.EX_SUCCESS
    assert os.path.exists(os.path.join(other, "manifest.json"))


def test_predict_without_checkpoint(tmp_path, capsys):
    conf = make_config(str(tmp_path))
    missing = str(tmp_path / "no-such-checkpoint")

    ret = chrono.command.cmd(["predict", "-c", conf, "--checkpoint", missing])

    assert ret == chrono.EX_FAILURE
    assert missing in capsys.readouterr().err


def test_locked_run_directory(tmp_path, capsys):
    conf = make_config(str(tmp_path))
    os.makedirs(tmp_path / "synth")
    (tmp_path / "synth" / ".lock").write_text("1\n")

    assert chrono.command.cmd(["synth", "-c", conf]) == chrono.EX_FAILURE
    assert "in use" in capsys.readouterr().err


def test_eval_compares_files(tmp_path, capsys):
    conf = make_config(str(tmp_path))
    patch = str(tmp_path / "patch.mdar")
    chrono.mdar.write(patch, np.random.default_rng(0).uniform(0, 1, (4, 8, 8)))

    ret = chrono.command.cmd(["eval", "-c", conf, "--pred", patch, "--truth", patch])

    assert ret == chrono.EX_SUCCESS
    assert "MAE 0.000000" in capsys.readouterr().out

    report = chrono.read_json(str(tmp_path / "eval" / "report.json"))
    assert not isinstance(report, chrono.Error)
    assert report["strata"]["all"]["mae_all"] == 0.0


def test_eval_needs_both_files(tmp_path):
    conf = make_config(str(tmp_path))
    assert chrono.command.cmd(["eval", "-c", conf, "--pred", "x.mdar"]) == chrono.EX_FAILURE


def test_train_writes_checkpoint(trained):
    out, _ = trained

    assert os.path.exists(os.path.join(out, "train", "checkpoint", "checkpoint.json"))

    metrics = chrono.read_json(os.path.join(out, "train", "metrics.json"))
    assert not isinstance(metrics, chrono.Error)
    assert [e["epoch"] for e in metrics["epochs"]] == [0, 1]


def test_predict(trained):
    out, conf = trained

    assert chrono.command.cmd(["predict", "-c", conf, "--sample", "1"]) == chrono.EX_SUCCESS

    mu = chrono.mdar.read(os.path.join(out, "predict", "mu.mdar"))
    scale = chrono.mdar.read(os.path.join(out, "predict", "scale.mdar"))

    assert not isinstance(mu, chrono.Error) and mu.shape == (4, 8, 8)
    assert not isinstance(scale, chrono.Error) and (scale > 0).all()


def test_predict_at_other_date(trained):
    out, conf = trained

    assert chrono.command.cmd(["predict", "-c", conf, "--target-date", "2024-07-01"]) == chrono.EX_SUCCESS

    summary = chrono.read_json(os.path.join(out, "predict", "prediction.json"))
    assert not isinstance(summary, chrono.Error)
    assert summary["target_date"] == "2024-07-01"
    assert "2024-07-01" not in summary["optical_dates"]
    assert "metrics" in summary

    assert chrono.command.cmd(["predict", "-c", conf, "--target-date", "July"]) == chrono.EX_FAILURE
    assert chrono.command.cmd(["predict", "-c", conf, "--sample", "99"]) == chrono.EX_FAILURE


def test_densify(trained):
    out, conf = trained

    assert chrono.command.cmd(["densify", "-c", conf]) == chrono.EX_SUCCESS

    summary = chrono.read_json(os.path.join(out, "densify", "densify.json"))
    assert not isinstance(summary, chrono.Error)
    assert len(summary["dates"]) == 3

    px = summary["pixel"]
    assert len(px["predicted"]) == len(px["lower"]) == len(px["upper"]) == 3
    assert 0 <= px["row"] < 8 and 0 <= px["col"] < 8


def test_central_crop_pixel():
    landcover = np.zeros((8, 8), dtype=np.int64)
    assert chrono.command_densify.central_crop_pixel(landcover) == (4, 4)

    landcover[0, 1] = landcover[6, 5] = 1
    assert chrono.command_densify.central_crop_pixel(landcover) == (6, 5)


def test_eval_checkpoint(trained, capsys):
    out, conf = trained

    assert chrono.command.cmd(["eval", "-c", conf]) == chrono.EX_SUCCESS

    report = chrono.read_json(os.path.join(out, "eval", "report.json"))
    assert not isinstance(report, chrono.Error)
    assert set(report) >= {"interpolation", "extrapolation", "variant"}
    assert "linear" in capsys.readouterr().out


def test_calib(trained):
    out, conf = trained

    assert chrono.command.cmd(["calib", "-c", conf]) == chrono.EX_SUCCESS

    curve = chrono.read_json(os.path.join(out, "calib", "calibration.json"))
    assert not isinstance(curve, chrono.Error)
    assert len(curve["coverage"]) == 9


def test_attn(trained):
    out, conf = trained

    assert chrono.command.cmd(["attn", "-c", conf]) == chrono.EX_SUCCESS
    assert os.path.exists(os.path.join(out, "attn", "attention", "attention.json"))

    summary = chrono.read_json(os.path.join(out, "attn", "attn.json"))
    assert not isinstance(summary, chrono.Error)
    assert summary["simplex_error"] < 1e-5


def test_ablate(trained):
    out, conf = trained

    assert chrono.command.cmd(["ablate", "-c", conf, "--ablation", "optical_only"]) == chrono.EX_SUCCESS

    table = chrono.read_json(os.path.join(out, "ablate", "ablation.json"))
    assert not isinstance(table, chrono.Error)
    assert set(table["variants"]) == {"full", "optical_only"}
