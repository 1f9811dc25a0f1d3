# SPDX-License-Identifier: GPL-2.0-or-later

import argparse
import sys
import logging

from typing import List, Optional

import chrono
import chrono.parameters

logger = chrono.logger

ABLATIONS = ("optical_only", "absolute_time")
MODES     = ("interpolation", "extrapolation", "both")


def cmd_synth(cmdargs: argparse.Namespace) -> int:
    import chrono.command_synth
    return chrono.command_synth.main(cmdargs)


def cmd_train(cmdargs: argparse.Namespace) -> int:
    import chrono.command_train
    return chrono.command_train.main(cmdargs)


def cmd_predict(cmdargs: argparse.Namespace) -> int:
    import chrono.command_predict
    return chrono.command_predict.main(cmdargs)


def cmd_densify(cmdargs: argparse.Namespace) -> int:
    import chrono.command_densify
    return chrono.command_densify.main(cmdargs)


def cmd_eval(cmdargs: argparse.Namespace) -> int:
    import chrono.command_eval
    return chrono.command_eval.main(cmdargs)


def cmd_calib(cmdargs: argparse.Namespace) -> int:
    import chrono.command_calib
    return chrono.command_calib.main(cmdargs)


def cmd_attn(cmdargs: argparse.Namespace) -> int:
    import chrono.command_attn
    return chrono.command_attn.main(cmdargs)


def cmd_ablate(cmdargs: argparse.Namespace) -> int:
    import chrono.command_ablate
    return chrono.command_ablate.main(cmdargs)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose",
                        dest="verbose", action='count', default=0,
                        help="print a message for each action.")
    parser.add_argument('-q', '--quiet',
                        dest="quiet", action='store_true', default=False,
                        help='output critical information only.')
    parser.add_argument("-V", "--version",
                        action='version',
                        help="show program's version number and exit.",
                        version=chrono.__VERSION__)
    parser.add_argument("-h", "--help",
                        action='help',
                        help="show this help message and exit.")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config",
                        dest="config", action="store", default=None, metavar="PATH",
                        help="experiment configuration file.")
    for p in chrono.parameters.PARAMS:
        p.add_arguments(parser)


def add_sample_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sample",
                        dest="sample", action="store", type=int, default=0, metavar="N",
                        help="index of the test sample (default: %(default)s).")


def add_plot_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--plot",
                        dest="plot", action="store_true", default=False,
                        help="also write figures (needs matplotlib).")


def setup_parser() -> argparse.ArgumentParser:
    epilog = "Report bugs to authors."

    description = """\
Generates optical patches at arbitrary target dates from irregular optical and
radar time series, with per-pixel Laplace uncertainty. Works on seeded synthetic
scenes end to end: simulation, training, prediction and evaluation.
"""
    parser = argparse.ArgumentParser(
            prog="chrono",
            formatter_class=argparse.RawTextHelpFormatter,
            description=description,
            epilog=epilog,
            add_help=False,
            allow_abbrev=True)

    add_common_arguments(parser)

    subparsers = parser.add_subparsers(dest="subcmd", help="")

    def add_command(name: str, sp_description: str, func: object) -> argparse.ArgumentParser:
        sp = subparsers.add_parser(name,
                                   formatter_class=argparse.RawTextHelpFormatter,
                                   description=sp_description, help=sp_description,
                                   epilog=epilog, add_help=False)
        sp.set_defaults(func=func)
        add_common_arguments(sp)
        add_config_arguments(sp)
        return sp

    # command: synth
    add_command("synth", """\
Generates the synthetic dataset: train, val and test sample directories plus a
split manifest under the data path.

""", cmd_synth)

    # command: train
    sp = add_command("train", """\
Trains a model on the train split with self-supervised target masking and
writes the checkpoint to the checkpoint path.

""", cmd_train)
    sp.add_argument("--ablation",
                    dest="ablation", action="store", default=None, choices=ABLATIONS,
                    help="train an ablated variant instead of the full model.")

    # command: predict
    sp = add_command("predict", """\
Predicts one test sample at its held-out date, or at --target-date, and writes
the mean patch and its uncertainty map.

""", cmd_predict)
    add_sample_argument(sp)
    sp.add_argument("--target-date",
                    dest="target_date", action="store", default=None, metavar="YYYY-MM-DD",
                    help="date to generate (default: the sample's held-out date).")
    sp.add_argument("--mode",
                    dest="mode", action="store", default="interpolation", choices=MODES[:2],
                    help="input window policy (default: %(default)s).")

    # command: densify
    sp = add_command("densify", """\
Reconstructs a dense series over the scene of one test sample, one prediction
per grid date, and reports NDVI with uncertainty bands.

""", cmd_densify)
    add_sample_argument(sp)
    add_plot_argument(sp)

    # command: eval
    sp = add_command("eval", """\
Evaluates a checkpoint on the test split against the linear and persistence
baselines. With --pred and --truth, only compares two patch files.

""", cmd_eval)
    sp.add_argument("--mode",
                    dest="mode", action="store", default="both", choices=MODES,
                    help="evaluation regime (default: %(default)s).")
    sp.add_argument("--pred",
                    dest="pred", action="store", default=None, metavar="FILE",
                    help="predicted patch (array container).")
    sp.add_argument("--truth",
                    dest="truth", action="store", default=None, metavar="FILE",
                    help="reference patch (array container).")
    sp.add_argument("--mask",
                    dest="mask", action="store", default=None, metavar="FILE",
                    help="optional valid-pixel mask for --pred/--truth.")

    # command: calib
    sp = add_command("calib", """\
Computes the calibration curve of the predicted Laplace intervals on the test
split.

""", cmd_calib)
    sp.add_argument("--mode",
                    dest="mode", action="store", default="interpolation", choices=MODES[:2],
                    help="input window policy (default: %(default)s).")
    add_plot_argument(sp)

    # command: attn
    sp = add_command("attn", """\
Exports the attention maps of one test sample and runs the cloud attention test
over the test split.

""", cmd_attn)
    add_sample_argument(sp)
    add_plot_argument(sp)

    # command: ablate
    sp = add_command("ablate", """\
Trains the full model and the optical-only and absolute-date variants under the
same protocol and writes a side-by-side comparison table.

""", cmd_ablate)
    sp.add_argument("--ablation",
                    dest="ablation", action="store", default=None, choices=ABLATIONS,
                    help="compare the full model with this variant only.")

    return parser


def setup_logger(cmdargs: argparse.Namespace) -> None:
    match cmdargs.verbose:
        case 0:
            level = logging.WARNING
        case 1:
            level = logging.INFO
        case _:
            level = logging.DEBUG

    if cmdargs.quiet:
        level = logging.CRITICAL

    chrono.setup_logger(logger, level=level, fmt="[%(asctime)s] %(message)s")


def cmd(argv: Optional[List[str]] = None) -> int:
    parser = setup_parser()
    cmdargs = parser.parse_args(argv)

    setup_logger(cmdargs)

    if 'func' not in cmdargs:
        parser.print_help()
        return chrono.EX_FAILURE

    ret: int = cmdargs.func(cmdargs)

    return ret


if __name__ == '__main__':
    sys.exit(cmd())
