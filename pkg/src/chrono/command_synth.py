# SPDX-License-Identifier: GPL-2.0-or-later

import argparse

import chrono
import chrono.rundir
import chrono.synthscene

logger = chrono.logger


def main(cmdargs: argparse.Namespace) -> int:
    ret = chrono.rundir.prepare(cmdargs, "synth")

    if isinstance(ret, chrono.Error):
        return chrono.report(ret)

    cfg, rundir = ret

    with rundir:
        manifest = chrono.synthscene.make_dataset(cfg.scene, cfg.n_samples, cfg.paths.data,
                                                  seed=cfg.seed, n_val=cfg.n_val, n_test=cfg.n_test,
                                                  workers=cfg.workers)

        if isinstance(manifest, chrono.Error):
            return chrono.report(manifest)

        chrono.write_json(rundir.join("synth.json"), {
            "data"     : cfg.paths.data,
            "seed"     : cfg.seed,
            "splits"   : {k: len(v) for k, v in manifest.splits.items()},
            "sar_stats": manifest.sar_stats.to_dict(),
        })

    return chrono.EX_SUCCESS
