# SPDX-License-Identifier: GPL-2.0-or-later

import os
import argparse

from typing import Any, Callable, Dict, List, Optional

TRUE_WORDS  = ("1", "ON", "YES", "TRUE")
FALSE_WORDS = ("0", "OFF", "NO", "FALSE")


def parse_bool(value: str) -> bool:
    word = value.strip().upper()

    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False

    raise ValueError(f"not a boolean: '{value}'")


def parse_list(kind: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(value: str) -> List[Any]:
        return [kind(x.strip()) for x in value.split(",") if x.strip()]
    return parse


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(x) for x in value)
    return str(value)


class Parameter:
    def __init__(self,
                 section: str,
                 name: str,
                 cmdline: Optional[str],
                 action: str,
                 kind: Callable[[str], Any],
                 default: Any,
                 desc: str):
        self.section = section
        self.name    = name
        self.cmdline = cmdline
        self.action  = action
        self.kind    = kind
        self.desc    = desc

        if callable(default):
            self.default = default.__call__()
        else:
            self.default = default

    @property
    def confname(self) -> str:
        return f"{self.section}.{self.name}"

    @property
    def envname(self) -> str:
        return f"CHRONO_{self.section}_{self.name}".upper()

    @property
    def dest(self) -> str:
        return f"conf_{self.section}_{self.name}"

    def parse(self, value: str) -> Any:
        return self.kind(value)

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        if not self.cmdline:
            return

        args = [ f"--{self.cmdline}" ]

        kwargs: Dict[str, Any] = {
            'dest'    : self.dest,
            'action'  : self.action,
            'help'    : self.desc,
            'default' : None,
        }

        if self.default not in (None, "", [], False):
            kwargs['help'] += f' (default: {format_value(self.default)})'
        kwargs['help'] += '.'

        if self.action not in ('store_true', 'store_false'):
            kwargs["metavar"] = self.name.upper()

        parser.add_argument(*args, **kwargs)

    def add_config(self, args: argparse.Namespace, config: Dict[str, Dict[str, str]]) -> None:
        """Command-line value, as text, over whatever the file and environment set."""
        value = getattr(args, self.dest, None)

        if value is None:
            return

        config.setdefault(self.section, {})[self.name] = format_value(value)


def detect_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))


ints   = parse_list(int)
floats = parse_list(float)
words  = parse_list(str)

PARAMS = [
    # global
    Parameter(section = 'global',
              name    = 'seed',
              cmdline = 'seed',
              action  = 'store',
              kind    = int,
              default = 0,
              desc    = 'Master seed for data generation, initialization and resampling'),

    Parameter(section = 'global',
              name    = 'deterministic',
              cmdline = 'deterministic',
              action  = 'store_true',
              kind    = parse_bool,
              default = False,
              desc    = 'Use deterministic kernels and a single thread'),

    # data
    Parameter(section = 'data',
              name    = 'n_samples',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 2400,
              desc    = 'Number of generated samples over all splits'),

    Parameter(section = 'data',
              name    = 'n_val',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 200,
              desc    = 'Number of validation samples'),

    Parameter(section = 'data',
              name    = 'n_test',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 200,
              desc    = 'Number of test samples'),

    Parameter(section = 'data',
              name    = 'workers',
              cmdline = 'workers',
              action  = 'store',
              kind    = int,
              default = detect_workers,
              desc    = 'Number of generator processes'),

    Parameter(section = 'data',
              name    = 'height',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 32,
              desc    = 'Patch height in pixels'),

    Parameter(section = 'data',
              name    = 'width',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 32,
              desc    = 'Patch width in pixels'),

    Parameter(section = 'data',
              name    = 'year',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 2024,
              desc    = 'Simulated year, also the reference year of absolute date encodings'),

    Parameter(section = 'data',
              name    = 'n_fields_min',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 3,
              desc    = 'Smallest number of fields per scene'),

    Parameter(section = 'data',
              name    = 'n_fields_max',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 6,
              desc    = 'Largest number of fields per scene'),

    Parameter(section = 'data',
              name    = 'stable_fraction',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.3,
              desc    = 'Probability that a field is stable rather than dynamic crop'),

    Parameter(section = 'data',
              name    = 'cloud_probability',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.3,
              desc    = 'Probability that an optical acquisition carries a cloud event'),

    Parameter(section = 'data',
              name    = 's2_revisit',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 5,
              desc    = 'Optical revisit interval in days'),

    Parameter(section = 'data',
              name    = 's2_dropout',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.2,
              desc    = 'Probability of dropping an optical acquisition'),

    Parameter(section = 'data',
              name    = 's1_revisit',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 6,
              desc    = 'Radar revisit interval in days'),

    Parameter(section = 'data',
              name    = 's1_offset',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 2,
              desc    = 'Radar calendar offset from the optical one in days'),

    Parameter(section = 'data',
              name    = 'sar_noise_sigma',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.5,
              desc    = 'Radar noise standard deviation in dB'),

    Parameter(section = 'data',
              name    = 'texture_sigma',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.01,
              desc    = 'Static reflectance texture standard deviation'),

    Parameter(section = 'data',
              name    = 'pool_days',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 70,
              desc    = 'Length of the acquisition pool stored around each target date'),

    # model
    Parameter(section = 'model',
              name    = 'd_feat',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 64,
              desc    = 'Spatial feature channels'),

    Parameter(section = 'model',
              name    = 'd_time',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 30,
              desc    = 'Date embedding channels'),

    Parameter(section = 'model',
              name    = 'encoder_hidden',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 32,
              desc    = 'Spatial encoder hidden channels'),

    Parameter(section = 'model',
              name    = 'spp_scales',
              cmdline = None,
              action  = 'store',
              kind    = ints,
              default = [1, 2, 4],
              desc    = 'Spatial pyramid pooling grid sizes'),

    Parameter(section = 'model',
              name    = 'n_layers',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 3,
              desc    = 'Cross-attention layers'),

    Parameter(section = 'model',
              name    = 'n_heads',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 4,
              desc    = 'Attention heads per layer'),

    Parameter(section = 'model',
              name    = 'ff_expansion',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 2,
              desc    = 'Feed-forward expansion factor'),

    Parameter(section = 'model',
              name    = 'decoder_hidden',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 32,
              desc    = 'Decoder hidden channels'),

    # train
    Parameter(section = 'train',
              name    = 'learning_rate',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 1e-3,
              desc    = 'Adam learning rate'),

    Parameter(section = 'train',
              name    = 'batch_size',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 16,
              desc    = 'Samples per batch'),

    Parameter(section = 'train',
              name    = 'epochs',
              cmdline = 'epochs',
              action  = 'store',
              kind    = int,
              default = 10,
              desc    = 'Training epochs'),

    Parameter(section = 'train',
              name    = 'max_seq_len',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 8,
              desc    = 'Maximum number of input acquisitions'),

    Parameter(section = 'train',
              name    = 'min_gap_days',
              cmdline = None,
              action  = 'store',
              kind    = ints,
              default = [5, 30],
              desc    = 'Range of the random minimum gap between target and optical inputs'),

    Parameter(section = 'train',
              name    = 'p_extrapolation',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.5,
              desc    = 'Probability of drawing an extrapolation target'),

    Parameter(section = 'train',
              name    = 'truncation',
              cmdline = None,
              action  = 'store',
              kind    = ints,
              default = [2, 8],
              desc    = 'Range of the random input sequence length'),

    Parameter(section = 'train',
              name    = 'optical_only',
              cmdline = None,
              action  = 'store_true',
              kind    = parse_bool,
              default = False,
              desc    = 'Train without radar inputs'),

    Parameter(section = 'train',
              name    = 'absolute_time_encoding',
              cmdline = None,
              action  = 'store_true',
              kind    = parse_bool,
              default = False,
              desc    = 'Encode input dates independently of the target date'),

    Parameter(section = 'train',
              name    = 'val_min_gap_days',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 20,
              desc    = 'Minimum gap enforced on validation windows'),

    # eval
    Parameter(section = 'eval',
              name    = 'levels',
              cmdline = None,
              action  = 'store',
              kind    = floats,
              default = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
              desc    = 'Nominal levels of the calibration curve'),

    Parameter(section = 'eval',
              name    = 'strata',
              cmdline = None,
              action  = 'store',
              kind    = words,
              default = ["all", "stable", "dynamic_crop"],
              desc    = 'Land-cover strata reported by the metrics'),

    Parameter(section = 'eval',
              name    = 'step_days',
              cmdline = 'step-days',
              action  = 'store',
              kind    = int,
              default = 5,
              desc    = 'Dense reconstruction step in days'),

    Parameter(section = 'eval',
              name    = 'period_days',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 365,
              desc    = 'Dense reconstruction period in days'),

    Parameter(section = 'eval',
              name    = 'min_gap_days',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 20,
              desc    = 'Minimum gap enforced on interpolation test windows'),

    Parameter(section = 'eval',
              name    = 'large_gap_days',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 25,
              desc    = 'Gap defining the large-gap subset'),

    Parameter(section = 'eval',
              name    = 'interval_level',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.9,
              desc    = 'Nominal level of NDVI bands'),

    Parameter(section = 'eval',
              name    = 'clean_fraction',
              cmdline = None,
              action  = 'store',
              kind    = float,
              default = 0.05,
              desc    = 'Largest cloud fraction of an optical input considered clean'),

    Parameter(section = 'eval',
              name    = 'bootstrap_resamples',
              cmdline = None,
              action  = 'store',
              kind    = int,
              default = 2000,
              desc    = 'Resamples of the paired bootstrap'),

    Parameter(section = 'eval',
              name    = 'attention_scenes',
              cmdline = 'scenes',
              action  = 'store',
              kind    = int,
              default = 50,
              desc    = 'Scenes used by the cloud attention test'),

    # paths
    Parameter(section = 'paths',
              name    = 'out',
              cmdline = 'out',
              action  = 'store',
              kind    = str,
              default = 'runs',
              desc    = 'Directory holding every run directory'),

    Parameter(section = 'paths',
              name    = 'data',
              cmdline = 'data',
              action  = 'store',
              kind    = str,
              default = '${paths.out}/dataset',
              desc    = 'Dataset directory'),

    Parameter(section = 'paths',
              name    = 'checkpoint',
              cmdline = 'checkpoint',
              action  = 'store',
              kind    = str,
              default = '${paths.out}/train/checkpoint',
              desc    = 'Checkpoint directory'),
]

SECTIONS = ("global", "data", "model", "train", "eval", "paths")

CONFNAMES = [ p.confname for p in PARAMS ]


def lookup(section: str, name: str) -> Optional[Parameter]:
    confname = f"{section}.{name}"

    if confname in CONFNAMES:
        return PARAMS[CONFNAMES.index(confname)]

    return None
