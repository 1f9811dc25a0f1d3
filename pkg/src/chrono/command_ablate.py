# SPDX-License-Identifier: GPL-2.0-or-later
#
# Trains the full model and its ablated variants with the same seed and
# protocol, evaluates them on the same test scenes and writes one table.
#

import argparse

from typing import Any, Dict, List, Optional

import chrono
import chrono.command_predict
import chrono.command_train
import chrono.config
import chrono.evaluation
import chrono.rundir
import chrono.training

from chrono.evaluation import MetricReport

logger = chrono.logger

FULL = "full"


def variants(ablation: Optional[str]) -> List[str]:
    if ablation is not None:
        return [FULL, ablation]
    return [FULL] + list(chrono.command_train.ABLATION_FLAGS)


def summarize(report: MetricReport) -> Dict[str, Any]:
    out: Dict[str, Any] = {}

    for name in ("all", "dynamic_crop"):
        if (stratum := report[name]) is None:
            out[name] = None
            continue
        out[name] = stratum.to_dict()
        out[name] = {k: out[name][k] for k in ("mae_all", "rmse_all", "psnr_all", "count")}

    return out


def main(cmdargs: argparse.Namespace) -> int:
    ret = chrono.rundir.prepare(cmdargs, "ablate")

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    with rundir:
        pools = chrono.command_predict.load_split(cfg)

        if isinstance(pools, chrono.Error):
            return chrono.report(pools)

        mode = chrono.training.INTERPOLATION
        large_gap = chrono.evaluation.large_gap_pools(pools, mode, cfg.eval)

        logger.info("large-gap subset: %d of %d test scenes", len(large_gap), len(pools))

        table: Dict[str, Any] = {}

        for variant in variants(cmdargs.ablation):
            train_cfg = chrono.command_train.ablated(cfg.train, None if variant == FULL else variant)
            ckpt = chrono.command_train.run(cfg, train_cfg, rundir.join(variant, "checkpoint"))

            if isinstance(ckpt, chrono.Error):
                return chrono.report(ckpt)

            predictor = chrono.training.Predictor(ckpt)

            try:
                report = chrono.evaluation.evaluate_split(predictor, pools, mode, cfg.eval, cfg.seed)
                entry = {"test": summarize(report.model)}

                if large_gap:
                    subset = chrono.evaluation.evaluate_split(predictor, large_gap, mode, cfg.eval, cfg.seed)
                    entry["large_gap"] = summarize(subset.model)
                else:
                    entry["large_gap"] = None

            except ValueError as e:
                return chrono.report(chrono.Error(f"{variant}: evaluation failed: {e}", "bad-input"))

            entry["final_val_nll"] = ckpt.metrics[-1]["val_nll"] if ckpt.metrics else None
            table[variant] = entry

        chrono.write_json(rundir.join("ablation.json"), {
            "mode"          : mode,
            "min_gap_days"  : cfg.eval.min_gap_days,
            "large_gap_days": cfg.eval.large_gap_days,
            "variants"      : table,
        })

        fmt = "{:<16}{:>12}{:>12}{:>14}"
        print(fmt.format("VARIANT", "MAE", "CROP MAE", "LARGE-GAP MAE"))
        for variant, entry in table.items():
            large = entry["large_gap"]["all"]["mae_all"] if entry["large_gap"] and entry["large_gap"]["all"] else None
            crop = entry["test"]["dynamic_crop"]["mae_all"] if entry["test"]["dynamic_crop"] else None
            print(fmt.format(variant, f"{entry['test']['all']['mae_all']:.5f}",
                             f"{crop:.5f}" if crop is not None else "-",
                             f"{large:.5f}" if large is not None else "-"))

    return chrono.EX_SUCCESS
