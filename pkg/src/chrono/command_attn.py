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
    ret = chrono.rundir.prepare(cmdargs, "attn")

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

        if not 0 <= cmdargs.sample < len(pools):
            return chrono.report(chrono.Error(f"sample {cmdargs.sample} out of range: "
                                              f"test split has {len(pools)} samples", "bad-argument"))

        pool = pools[cmdargs.sample]
        sample = chrono.training.window_inputs(pool, chrono.training.INTERPOLATION, 0,
                                               ckpt.train_cfg.max_seq_len, ckpt.train_cfg.optical_only)

        if sample is None:
            return chrono.report(chrono.Error(f"{pool.name}: empty input window", "empty-window"))

        predictor = chrono.training.Predictor(ckpt)
        _, record = predictor.predict(sample, sample.target_date, record=True)
        assert record is not None

        index = chrono.evaluation.export_attention(record, sample, rundir.join("attention"))
        tokens = chrono.evaluation.token_meta(sample)
        share = chrono.evaluation.attention_modality_share(record, [t["modality"] for t in tokens])

        test = chrono.evaluation.cloud_attention_test(predictor, pools, cfg.eval.attention_scenes,
                                                      cfg.eval.clean_fraction)

        chrono.write_json(rundir.join("attn.json"), {
            "sample"         : pool.name,
            "simplex_error"  : record.simplex_error(),
            "modality_share" : {k: v.tolist() for k, v in share.items()},
            "cloud_attention": test.to_dict(),
        })

        print(f"cloud attention over {test.scenes} scenes: cloudy {test.cloudy_mean:.4f}, "
              f"clean {test.clean_mean:.4f}, p = {test.pvalue:.3g}")

        if cmdargs.plot:
            labels = [f"{t['modality'][0].upper()} {t['date']}" for t in tokens]
            chrono.plots.attention_summary(chrono.evaluation.attention_summary(record),
                                           labels, rundir.join("attention.png"))

        logger.info("attention maps written: %d", len(index["maps"]))

    return chrono.EX_SUCCESS
