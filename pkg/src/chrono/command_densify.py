# SPDX-License-Identifier: GPL-2.0-or-later

import argparse

from typing import Tuple

import numpy as np
import numpy.typing as npt

import chrono
import chrono.command_predict
import chrono.evaluation
import chrono.mdar
import chrono.plots
import chrono.rundir
import chrono.synthscene

logger = chrono.logger


def central_crop_pixel(landcover: npt.NDArray[np.int64]) -> Tuple[int, int]:
    """Most central pixel of the crop class, or the patch centre when there is none."""
    h, w = landcover.shape
    rows, cols = np.nonzero(landcover == chrono.synthscene.DYNAMIC_CROP)

    if rows.size == 0:
        return h // 2, w // 2

    i = int(np.argmin((rows - h // 2) ** 2 + (cols - w // 2) ** 2))
    return int(rows[i]), int(cols[i])


def main(cmdargs: argparse.Namespace) -> int:
    ret = chrono.rundir.prepare(cmdargs, "densify")

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    with rundir:
        ckpt = chrono.command_predict.load_checkpoint(cfg)

        if isinstance(ckpt, chrono.Error):
            return chrono.report(ckpt)

        pool = chrono.command_predict.load_sample(cfg, cmdargs.sample)

        if isinstance(pool, chrono.Error):
            return chrono.report(pool)

        try:
            result = chrono.evaluation.densify(ckpt, pool.scene, period_days=cfg.eval.period_days,
                                               step_days=cfg.eval.step_days,
                                               level=cfg.eval.interval_level)
        except ValueError as e:
            return chrono.report(chrono.Error(str(e), "empty-window"))

        logger.info("%s: %d dense predictions", pool.name, len(result.dates))

        chrono.mdar.write(rundir.join("mu.mdar"), np.concatenate([p.mu.numpy() for p in result.predictions]))
        chrono.mdar.write(rundir.join("scale.mdar"), np.concatenate([p.scale.numpy() for p in result.predictions]))
        chrono.mdar.write(rundir.join("ndvi.mdar"), result.ndvi.predicted)
        chrono.mdar.write(rundir.join("ndvi_lower.mdar"), result.ndvi.lower)
        chrono.mdar.write(rundir.join("ndvi_upper.mdar"), result.ndvi.upper)
        if result.ndvi.truth is not None:
            chrono.mdar.write(rundir.join("ndvi_truth.mdar"), result.ndvi.truth)

        summary = result.summary()
        summary["sample"] = pool.name
        summary["step_days"] = cfg.eval.step_days

        row, col = central_crop_pixel(pool.scene.landcover)
        summary["pixel"] = {"row": row, "col": col, **result.ndvi.pixel(row, col)}

        chrono.write_json(rundir.join("densify.json"), summary)

        if cmdargs.plot:
            chrono.plots.ndvi_series(result, rundir.join("ndvi.png"))

    return chrono.EX_SUCCESS
