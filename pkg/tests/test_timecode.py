# SPDX-License-Identifier: GPL-2.0-or-later

import math

import numpy as np
import pytest
import torch

import chrono.timecode

from chrono.synthscene import CalendarDate


def test_encode_target_new_year():
    assert chrono.timecode.encode_target(CalendarDate(2024, 1), 2024) == pytest.approx((0.0, 0.0, 1.0))


def test_encode_value_half_year():
    assert chrono.timecode.encode_value(1.0, 0.5) == pytest.approx((1.0, 0.0, -1.0), abs=1e-6)


def test_encode_target_quarter():
    lin, s, c = chrono.timecode.encode_target(CalendarDate(2025, 92), 2024)
    angle = 2 * math.pi * 91 / 365.25

    assert lin == 1.0
    assert (s, c) == pytest.approx((math.sin(angle), math.cos(angle)))


def test_encode_relative_same_day():
    d = CalendarDate(2024, 200)
    assert chrono.timecode.encode_relative(d, d) == pytest.approx((0.0, 0.0, 1.0))


def test_encode_offset_quarter_before():
    assert chrono.timecode.encode_offset(-91.3125) == pytest.approx((-0.25, -1.0, 0.0), abs=1e-12)


def test_encode_relative_sign():
    before = chrono.timecode.encode_relative(CalendarDate(2024, 170), CalendarDate(2024, 200))
    after = chrono.timecode.encode_relative(CalendarDate(2024, 230), CalendarDate(2024, 200))

    assert before[0] == pytest.approx(-30 / 365.25)
    assert after[0] == pytest.approx(30 / 365.25)
    assert before[1] == pytest.approx(-after[1])
    assert before[2] == pytest.approx(after[2])


def test_offset_periodicity():
    a = chrono.timecode.encode_offset(40.0)
    b = chrono.timecode.encode_offset(40.0 + 365.25)

    assert b[0] == pytest.approx(a[0] + 1.0)
    assert b[1:] == pytest.approx(a[1:], abs=1e-12)


def test_input_features():
    dates = [CalendarDate(2024, 100), CalendarDate(2024, 150)]
    target = CalendarDate(2024, 120)

    rel = chrono.timecode.input_features(dates, target)
    absolute = chrono.timecode.input_features(dates, target, absolute=True, y0=2024)
    empty = chrono.timecode.input_features([], target)

    assert rel.shape == absolute.shape == (2, 3)
    assert rel.dtype == np.float32
    assert rel[0, 0] == pytest.approx(-20 / 365.25)
    assert absolute[1, 0] == 0.0
    assert empty.shape == (0, 3)


def test_projection_with_zero_weights():
    proj = chrono.timecode.TimeProjection(6)

    with torch.no_grad():
        for p in proj.parameters():
            p.zero_()

    out = chrono.timecode.project(torch.randn(5, 3), proj)
    assert torch.equal(out, torch.zeros(5, 6))


def test_projection_matches_manual_forward():
    torch.manual_seed(0)
    proj = chrono.timecode.TimeProjection(4)
    raw = torch.randn(7, 3)

    hidden = torch.nn.functional.gelu(raw @ proj.fc1.weight.T + proj.fc1.bias)
    expected = hidden @ proj.fc2.weight.T + proj.fc2.bias

    assert torch.allclose(proj(raw), expected, atol=1e-6)


def test_projection_rejects_wrong_width():
    with pytest.raises(ValueError):
        chrono.timecode.TimeProjection(4)(torch.zeros(2, 4))
