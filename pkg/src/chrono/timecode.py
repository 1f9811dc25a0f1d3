# SPDX-License-Identifier: GPL-2.0-or-later
#
# Date encodings. Every encoding is a triple [linear, sin 2*pi*phase, cos 2*pi*phase]:
#
#   target date:  linear = y_d - y0,  phase = (day_of_year - 1) / 365.25
#   input date:   linear = phase = (d_i - d_target) / 365.25   (signed, years)
#

import math

from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt
import torch
import torch.nn as nn

import chrono
import chrono.synthscene

from chrono.synthscene import CalendarDate

logger = chrono.logger

DAYS_PER_YEAR = 365.25

Triple = Tuple[float, float, float]


def encode_value(linear: float, phase: float) -> Triple:
    angle = 2.0 * math.pi * phase
    return (linear, math.sin(angle), math.cos(angle))


def doy_fraction(d: CalendarDate) -> float:
    return (d.day_of_year - 1) / DAYS_PER_YEAR


def encode_target(d: CalendarDate, y0: int) -> Triple:
    return encode_value(float(d.year - y0), doy_fraction(d))


def encode_offset(delta_days: float) -> Triple:
    delta = delta_days / DAYS_PER_YEAR
    return encode_value(delta, delta)


def encode_relative(d_i: CalendarDate, d_target: CalendarDate) -> Triple:
    return encode_offset(float(chrono.synthscene.days_between(d_i, d_target)))


def input_features(dates: Sequence[CalendarDate], d_target: CalendarDate,
                   absolute: bool = False, y0: int = 0) -> npt.NDArray[np.float32]:
    """Raw encodings of input acquisition dates, shape [T, 3]."""
    if absolute:
        rows = [encode_target(d, y0) for d in dates]
    else:
        rows = [encode_relative(d, d_target) for d in dates]

    return np.asarray(rows, dtype=np.float32).reshape(len(rows), 3)


def target_features(d_target: CalendarDate, y0: int) -> npt.NDArray[np.float32]:
    return np.asarray(encode_target(d_target, y0), dtype=np.float32)


class TimeProjection(nn.Module):
    """Two-layer perceptron lifting a raw date triple to a temporal token."""

    def __init__(self, d_out: int, d_in: int = 3):
        super().__init__()
        self.d_in  = d_in
        self.d_out = d_out
        self.fc1   = nn.Linear(d_in, d_out)
        self.act   = nn.GELU()
        self.fc2   = nn.Linear(d_out, d_out)

    def forward(self, raw: torch.Tensor) -> torch.Tensor:
        if raw.shape[-1] != self.d_in:
            raise ValueError(f"expected date encodings of size {self.d_in}, got {raw.shape[-1]}")
        return self.fc2(self.act(self.fc1(raw)))


def project(raw: torch.Tensor, params: TimeProjection) -> torch.Tensor:
    return params(raw)
