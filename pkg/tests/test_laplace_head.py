# SPDX-License-Identifier: GPL-2.0-or-later

import math

import numpy as np
import pytest
import torch

import chrono.laplace_head

from chrono.laplace_head import LaplaceDecoder, LaplacePrediction


def prediction(mu, b):
    mu = torch.as_tensor(mu, dtype=torch.float64).reshape(1, 1, 1, -1)
    return LaplacePrediction(mu=mu, log_b=torch.log(torch.as_tensor(b, dtype=torch.float64)).expand_as(mu))


@pytest.mark.parametrize("residual, b, expected", [
    (0.0, 0.5, 0.0),
    (0.0, 1.0, math.log(2.0)),
    (0.1, 0.05, 2.0 + math.log(0.1)),
])
def test_nll_values(residual, b, expected):
    pred = prediction([0.3], b)
    y = pred.mu + residual

    assert float(chrono.laplace_head.nll_laplace(y, pred)) == pytest.approx(expected, abs=1e-6)


def test_nll_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    eps = 1e-6

    for _ in range(100):
        y = float(rng.uniform(0, 1))
        mu = y + float(rng.choice([-1, 1]) * rng.uniform(0.01, 0.5))
        log_b = float(rng.uniform(-4, 1))

        mu_t = torch.tensor([[[[mu]]]], dtype=torch.float64, requires_grad=True)
        lb_t = torch.tensor([[[[log_b]]]], dtype=torch.float64, requires_grad=True)
        y_t = torch.tensor([[[[y]]]], dtype=torch.float64)

        loss = chrono.laplace_head.nll_elements(y_t, LaplacePrediction(mu=mu_t, log_b=lb_t)).sum()
        g_mu, g_lb = torch.autograd.grad(loss, (mu_t, lb_t))

        def f(m, lb):
            return abs(y - m) * math.exp(-lb) + math.log(2.0) + lb

        n_mu = (f(mu + eps, log_b) - f(mu - eps, log_b)) / (2 * eps)
        n_lb = (f(mu, log_b + eps) - f(mu, log_b - eps)) / (2 * eps)

        assert float(g_mu) == pytest.approx(n_mu, rel=1e-3)
        assert float(g_lb) == pytest.approx(n_lb, rel=1e-3, abs=1e-6)


def test_nll_elements_closed_form():
    gen = torch.Generator().manual_seed(4)
    mu = torch.rand(2, 4, 3, 3, generator=gen, dtype=torch.float64)
    log_b = torch.rand(2, 4, 3, 3, generator=gen, dtype=torch.float64) * 4 - 3
    y = torch.rand(2, 4, 3, 3, generator=gen, dtype=torch.float64)

    got = chrono.laplace_head.nll_elements(y, LaplacePrediction(mu=mu, log_b=log_b))
    want = (y - mu).abs() / log_b.exp() + math.log(2.0) + log_b

    assert torch.allclose(got, want, atol=1e-12)


def test_nll_propagates_nan():
    pred = LaplacePrediction(mu=torch.full((1, 4, 2, 2), float("nan")), log_b=torch.zeros(1, 4, 2, 2))
    assert torch.isnan(chrono.laplace_head.nll_laplace(torch.zeros(1, 4, 2, 2), pred))


def test_clipped_mu():
    pred = LaplacePrediction(mu=torch.tensor([[[[-0.2, 0.4, 1.3]]]]), log_b=torch.zeros(1, 1, 1, 3))

    assert pred.clipped_mu().tolist() == [[[[0.0, pytest.approx(0.4), 1.0]]]]
    assert pred.mu.min() < 0


def test_nll_minimized_at_residual_scale():
    grid = np.linspace(0.01, 0.5, 491)
    values = [float(chrono.laplace_head.nll_laplace(prediction([0.5], b).mu + 0.1, prediction([0.5], b)))
              for b in grid]

    assert grid[int(np.argmin(values))] == pytest.approx(0.1, abs=1e-3)


def test_nll_valid_mask():
    pred = LaplacePrediction(mu=torch.zeros(1, 4, 2, 2), log_b=torch.zeros(1, 4, 2, 2))
    y = torch.zeros(1, 4, 2, 2)
    y[..., 0, 0] = 5.0
    mask = torch.ones(1, 2, 2, dtype=torch.bool)
    mask[0, 0, 0] = False

    assert float(chrono.laplace_head.nll_laplace(y, pred, mask)) == pytest.approx(math.log(2.0))

    with pytest.raises(ValueError):
        chrono.laplace_head.nll_laplace(y, pred, torch.zeros(1, 2, 2, dtype=torch.bool))


def test_nll_shape_mismatch():
    pred = LaplacePrediction(mu=torch.zeros(1, 4, 2, 2), log_b=torch.zeros(1, 4, 2, 2))

    with pytest.raises(ValueError):
        chrono.laplace_head.nll_laplace(torch.zeros(1, 4, 2, 3), pred)


def test_halfwidth_values():
    assert chrono.laplace_head.halfwidth(0.1, 0.5) == pytest.approx(0.069315, abs=1e-6)
    assert chrono.laplace_head.halfwidth(1.0, 1 - math.exp(-1)) == pytest.approx(1.0)

    levels = np.linspace(0.05, 0.95, 19)
    widths = [float(chrono.laplace_head.halfwidth(0.2, p)) for p in levels]
    assert all(a < b for a, b in zip(widths, widths[1:]))

    for p in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            chrono.laplace_head.halfwidth(0.1, p)


def test_decoder_shape_and_zero_weights():
    decoder = LaplaceDecoder(d_in=8, hidden=4)

    pred = chrono.laplace_head.decode(torch.randn(2, 16 * 16, 8), decoder, 32, 32)
    assert pred.mu.shape == pred.log_b.shape == (2, 4, 32, 32)

    with torch.no_grad():
        for p in decoder.parameters():
            p.zero_()

    pred = decoder(torch.randn(1, 4, 8), 4, 4)
    assert torch.equal(pred.mu, torch.zeros_like(pred.mu))
    assert torch.equal(pred.scale, torch.ones_like(pred.scale))


def test_log_scale_is_clamped():
    decoder = LaplaceDecoder(d_in=8, hidden=4)

    with torch.no_grad():
        decoder.conv_out.bias[4:] = 50.0
    high = decoder(torch.zeros(1, 4, 8), 4, 4)

    with torch.no_grad():
        decoder.conv_out.bias[4:] = -50.0
    low = decoder(torch.zeros(1, 4, 8), 4, 4)

    assert float(high.log_b.max()) <= chrono.laplace_head.LOG_B_MAX
    assert float(low.log_b.min()) >= chrono.laplace_head.LOG_B_MIN


def test_decoder_rejects_bad_tiling():
    with pytest.raises(ValueError):
        LaplaceDecoder(d_in=8)(torch.zeros(1, 5, 8), 4, 4)
