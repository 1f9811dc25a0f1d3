# SPDX-License-Identifier: GPL-2.0-or-later

import argparse
import dataclasses

from typing import Optional

import chrono
import chrono.config
import chrono.dataset
import chrono.rundir
import chrono.training

logger = chrono.logger

ABLATION_FLAGS = {
    "optical_only" : "optical_only",
    "absolute_time": "absolute_time_encoding",
}


def ablated(train_cfg: chrono.training.TrainConfig,
            ablation: Optional[str]) -> chrono.training.TrainConfig:
    if ablation is None:
        return train_cfg
    return dataclasses.replace(train_cfg, **{ABLATION_FLAGS[ablation]: True})


def run(cfg: chrono.config.ExperimentConfig, train_cfg: chrono.training.TrainConfig,
        checkpoint_dir: str) -> chrono.training.Checkpoint | chrono.Error:
    """Trains on the configured dataset and leaves the final checkpoint in checkpoint_dir."""
    train_split = chrono.dataset.open_split(cfg.paths.data, "train")

    if isinstance(train_split, chrono.Error):
        return train_split

    val_split = chrono.dataset.open_split(cfg.paths.data, "val")

    if isinstance(val_split, chrono.Error):
        return val_split

    if not len(train_split):
        return chrono.Error(f"{cfg.paths.data}: the train split is empty", "bad-dataset")

    manifest = train_split.manifest

    try:
        ckpt = chrono.training.train(train_split, val_split, train_cfg, cfg.model,
                                     manifest.y0, manifest.sar_stats, checkpoint_dir)
        chrono.training.save_checkpoint(ckpt, checkpoint_dir)

    except chrono.training.TrainingError as e:
        return chrono.Error(str(e), "training")
    except ValueError as e:
        return chrono.Error(f"invalid training setup: {e}", "bad-config")
    except OSError as e:
        return chrono.Error(str(e), "io")

    return ckpt


def main(cmdargs: argparse.Namespace) -> int:
    name = "train" if cmdargs.ablation is None else f"train-{cmdargs.ablation}"
    ret = chrono.rundir.prepare(cmdargs, name)

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    checkpoint_dir = cfg.paths.checkpoint
    if cmdargs.ablation is not None:
        checkpoint_dir = f"{checkpoint_dir}-{cmdargs.ablation}"

    with rundir:
        ckpt = run(cfg, ablated(cfg.train, cmdargs.ablation), checkpoint_dir)

        if isinstance(ckpt, chrono.Error):
            return chrono.report(ckpt)

        chrono.write_json(rundir.join("metrics.json"), {
            "variant"   : ckpt.train_cfg.variant(),
            "checkpoint": checkpoint_dir,
            "epochs"    : ckpt.metrics,
        })

    return chrono.EX_SUCCESS
