# SPDX-License-Identifier: GPL-2.0-or-later

import argparse

from typing import List

import chrono
import chrono.config
import chrono.dataset
import chrono.evaluation
import chrono.mdar
import chrono.rundir
import chrono.synthscene
import chrono.training

from chrono.dataset import SamplePool
from chrono.synthscene import CalendarDate

logger = chrono.logger


def load_checkpoint(cfg: chrono.config.ExperimentConfig) -> chrono.training.Checkpoint | chrono.Error:
    return chrono.training.load_checkpoint(cfg.paths.checkpoint)


def load_split(cfg: chrono.config.ExperimentConfig, split: str = "test") -> List[SamplePool] | chrono.Error:
    pools = chrono.dataset.open_split(cfg.paths.data, split)

    if isinstance(pools, chrono.Error):
        return pools

    try:
        return list(pools)
    except OSError as e:
        return chrono.Error(str(e), "bad-dataset")


def load_sample(cfg: chrono.config.ExperimentConfig, index: int,
                split: str = "test") -> SamplePool | chrono.Error:
    pools = chrono.dataset.open_split(cfg.paths.data, split)

    if isinstance(pools, chrono.Error):
        return pools

    if not 0 <= index < len(pools):
        return chrono.Error(f"sample {index} out of range: {split} split has {len(pools)} samples",
                            "bad-argument")

    return chrono.dataset.read_sample(cfg.paths.data, pools.names[index])


def main(cmdargs: argparse.Namespace) -> int:
    ret = chrono.rundir.prepare(cmdargs, "predict")

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    with rundir:
        ckpt = load_checkpoint(cfg)

        if isinstance(ckpt, chrono.Error):
            return chrono.report(ckpt)

        pool = load_sample(cfg, cmdargs.sample)

        if isinstance(pool, chrono.Error):
            return chrono.report(pool)

        try:
            target = CalendarDate.from_iso(cmdargs.target_date) if cmdargs.target_date else pool.target_date
        except ValueError:
            return chrono.report(chrono.Error(f"invalid target date: {cmdargs.target_date}", "bad-argument"))

        idx = chrono.training.window_indices(pool.optical_dates, pool.radar_dates, target, cmdargs.mode,
                                             0, ckpt.train_cfg.max_seq_len, ckpt.train_cfg.optical_only)

        if idx is None:
            return chrono.report(chrono.Error(f"{pool.name}: no optical input available for {target} "
                                              f"in {cmdargs.mode} mode", "empty-window"))

        truth = pool.target if target == pool.target_date else None

        if truth is None and target.year == pool.scene.year:
            truth = chrono.synthscene.render_optical(pool.scene, target)

        sample = chrono.training.sample_from_pool(pool, idx[0], idx[1], target, truth, cmdargs.mode, 0)

        try:
            pred = chrono.training.predict(ckpt, sample, target)
        except ValueError as e:
            return chrono.report(chrono.Error(str(e), "bad-input"))

        mu = pred.mu[0].numpy()
        scale = pred.scale[0].numpy()

        chrono.mdar.write(rundir.join("mu.mdar"), mu)
        chrono.mdar.write(rundir.join("scale.mdar"), scale)

        summary = {
            "sample"       : pool.name,
            "target_date"  : target.iso(),
            "mode"         : cmdargs.mode,
            "optical_dates": [d.iso() for d in sample.optical_dates],
            "radar_dates"  : [d.iso() for d in sample.radar_dates],
            "mean_scale"   : float(scale.mean()),
        }

        if truth is not None:
            chrono.mdar.write(rundir.join("truth.mdar"), truth)
            report = chrono.evaluation.metrics(pred.clipped_mu()[0].numpy(), truth, None, pool.landcover)
            summary["metrics"] = report.to_dict()

        chrono.write_json(rundir.join("prediction.json"), summary)

    return chrono.EX_SUCCESS
