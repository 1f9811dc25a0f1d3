# SPDX-License-Identifier: GPL-2.0-or-later

import argparse

from typing import Any, Dict

import chrono
import chrono.command_predict
import chrono.config
import chrono.evaluation
import chrono.mdar
import chrono.rundir
import chrono.training

logger = chrono.logger


def compare_files(cmdargs: argparse.Namespace) -> chrono.evaluation.MetricReport | chrono.Error:
    pred = chrono.mdar.read(cmdargs.pred)

    if isinstance(pred, chrono.Error):
        return pred

    truth = chrono.mdar.read(cmdargs.truth)

    if isinstance(truth, chrono.Error):
        return truth

    mask = None

    if cmdargs.mask:
        values = chrono.mdar.read(cmdargs.mask)
        if isinstance(values, chrono.Error):
            return values
        mask = values > 0.5

    try:
        return chrono.evaluation.metrics(pred, truth, mask)
    except ValueError as e:
        return chrono.Error(str(e), "bad-input")


def evaluate(cfg: chrono.config.ExperimentConfig, mode: str) -> Dict[str, Any] | chrono.Error:
    ckpt = chrono.command_predict.load_checkpoint(cfg)

    if isinstance(ckpt, chrono.Error):
        return ckpt

    pools = chrono.command_predict.load_split(cfg)

    if isinstance(pools, chrono.Error):
        return pools

    predictor = chrono.training.Predictor(ckpt)
    modes = chrono.training.MODES if mode == "both" else (mode,)
    report: Dict[str, Any] = {"variant": ckpt.train_cfg.variant()}

    try:
        for m in modes:
            report[m] = chrono.evaluation.evaluate_split(predictor, pools, m, cfg.eval, cfg.seed).to_dict()
    except ValueError as e:
        return chrono.Error(f"evaluation failed: {e}", "bad-input")

    return report


def print_summary(report: Dict[str, Any]) -> None:
    fmt = "{:<16}{:<14}{:>10}{:>10}{:>10}"

    print(fmt.format("MODE", "METHOD", "MAE", "RMSE", "PSNR"))
    print("-" * 60)

    for mode in chrono.training.MODES:
        if mode not in report:
            continue
        for method in ("model", "linear_baseline", "persistence_baseline"):
            stratum = report[mode][method]["strata"].get("all")
            if stratum is None:
                continue
            print(fmt.format(mode, method.split("_")[0], f"{stratum['mae_all']:.5f}",
                             f"{stratum['rmse_all']:.5f}", str(stratum["psnr_all"])[:8]))


def main(cmdargs: argparse.Namespace) -> int:
    ret = chrono.rundir.prepare(cmdargs, "eval")

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    with rundir:
        if cmdargs.pred or cmdargs.truth:
            if not (cmdargs.pred and cmdargs.truth):
                return chrono.report(chrono.Error("--pred and --truth go together", "bad-argument"))

            metrics = compare_files(cmdargs)

            if isinstance(metrics, chrono.Error):
                return chrono.report(metrics)

            chrono.write_json(rundir.join("report.json"), metrics.to_dict())

            if (stratum := metrics["all"]) is not None:
                print(f"MAE {stratum.mae_all:.6f} RMSE {stratum.rmse_all:.6f} PSNR {stratum.psnr_all:.3f}")
            return chrono.EX_SUCCESS

        report = evaluate(cfg, cmdargs.mode)

        if isinstance(report, chrono.Error):
            return chrono.report(report)

        chrono.write_json(rundir.join("report.json"), report)
        print_summary(report)

    return chrono.EX_SUCCESS
