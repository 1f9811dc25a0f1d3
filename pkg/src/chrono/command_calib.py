# SPDX-License-Identifier: GPL-2.0-or-later

import argparse

import chrono
import chrono.command_predict
import chrono.evaluation
import chrono.plots
import chrono.rundir
import chrono.training

logger = chrono.logger


def main(cmdargs: argparse.Namespace) -> int:
    ret = chrono.rundir.prepare(cmdargs, "calib")

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    with rundir:
        ckpt = chrono.command_predict.load_checkpoint(cfg)

        if isinstance(ckpt, chrono.Error):
            return chrono.report(ckpt)

        pools = chrono.command_predict.load_split(cfg)

        if isinstance(pools, chrono.Error):
            return chrono.report(pools)

        samples, skipped = chrono.evaluation.window_samples(pools, cmdargs.mode,
                                                            chrono.evaluation.mode_gap(cmdargs.mode, cfg.eval),
                                                            ckpt.train_cfg.optical_only)
        if not samples:
            return chrono.report(chrono.Error("no test sample has a usable input window", "empty-window"))

        preds = chrono.training.Predictor(ckpt).predict_many(samples)
        curve = chrono.evaluation.calibration(preds, [s.target for s in samples if s.target is not None],
                                              None, cfg.eval.levels)

        logger.info("calibration over %d samples (%d skipped): max deviation %.4f",
                    len(samples), skipped, curve.max_error())

        chrono.write_json(rundir.join("calibration.json"), {"mode": cmdargs.mode, **curve.to_dict()})

        for p, c in zip(curve.levels, curve.coverage):
            print(f"{p:.2f} {c:.4f}")

        if cmdargs.plot:
            chrono.plots.calibration_curve(curve, rundir.join("calibration.png"))

    return chrono.EX_SUCCESS
