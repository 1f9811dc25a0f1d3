# SPDX-License-Identifier: GPL-2.0-or-later

import math

from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt
import torch
import torch.nn as nn
import torch.nn.functional as F

import chrono

logger = chrono.logger

LOG_B_MIN = -7.0
LOG_B_MAX = 2.0

N_BANDS = 4


@dataclass
class LaplacePrediction:
    mu: torch.Tensor        # [B, 4, H, W], unclipped
    log_b: torch.Tensor     # [B, 4, H, W], clamped to [LOG_B_MIN, LOG_B_MAX]

    @property
    def scale(self) -> torch.Tensor:
        return torch.exp(self.log_b)

    def clipped_mu(self) -> torch.Tensor:
        return self.mu.clamp(0.0, 1.0)

    def distribution(self) -> torch.distributions.Laplace:
        return torch.distributions.Laplace(self.mu, self.scale, validate_args=False)

    def detach(self) -> "LaplacePrediction":
        return LaplacePrediction(mu=self.mu.detach(), log_b=self.log_b.detach())

    def item(self, i: int) -> "LaplacePrediction":
        return LaplacePrediction(mu=self.mu[i:i + 1], log_b=self.log_b[i:i + 1])


class LaplaceDecoder(nn.Module):
    """Conv block at half resolution, x2 nearest upsampling, two conv layers, 4 mu + 4 log b."""

    def __init__(self, d_in: int, hidden: int = 32, bands: int = N_BANDS):
        super().__init__()
        self.bands    = bands
        self.conv_in  = nn.Conv2d(d_in, hidden, kernel_size=3, padding=1)
        self.conv_up  = nn.Conv2d(hidden, hidden, kernel_size=3, padding=1)
        self.conv_out = nn.Conv2d(hidden, 2 * bands, kernel_size=3, padding=1)

    def forward(self, latent: torch.Tensor, height: int, width: int) -> LaplacePrediction:
        b, p, d = latent.shape

        if p != (height // 2) * (width // 2) or height % 2 or width % 2:
            raise ValueError(f"{p} latent pixels do not tile a {height}x{width} patch at half resolution")

        x = latent.permute(0, 2, 1).reshape(b, d, height // 2, width // 2)
        x = F.relu(self.conv_in(x))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.relu(self.conv_up(x))
        x = self.conv_out(x)

        mu, log_b = x[:, :self.bands], x[:, self.bands:]

        return LaplacePrediction(mu=mu, log_b=log_b.clamp(LOG_B_MIN, LOG_B_MAX))


def decode(latent: torch.Tensor, params: LaplaceDecoder, height: int, width: int) -> LaplacePrediction:
    return params(latent, height, width)


def nll_elements(y: torch.Tensor, pred: LaplacePrediction) -> torch.Tensor:
    """Per-element |y - mu| / b + log(2b)."""
    if y.shape != pred.mu.shape:
        raise ValueError(f"target {tuple(y.shape)} and prediction {tuple(pred.mu.shape)} differ")

    return -pred.distribution().log_prob(y)


def nll_laplace(y: torch.Tensor, pred: LaplacePrediction,
                valid_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    elements = nll_elements(y, pred)

    if valid_mask is None:
        return elements.mean()

    if valid_mask.shape != (y.shape[0], *y.shape[2:]):
        raise ValueError(f"valid mask {tuple(valid_mask.shape)} does not match target {tuple(y.shape)}")

    mask = valid_mask[:, None].expand_as(elements)
    count = int(mask.sum())

    if count == 0:
        raise ValueError("valid mask selects no pixel")

    return elements[mask].sum() / count


def halfwidth(scale: npt.ArrayLike, p: float) -> npt.NDArray[np.float64]:
    """Half-width w of the central interval with Pr(|Y - mu| <= w) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"nominal level {p} is outside (0, 1)")

    return -np.asarray(scale, dtype=np.float64) * math.log1p(-p)


def interval_halfwidth(pred: LaplacePrediction, p: float) -> torch.Tensor:
    if not 0.0 < p < 1.0:
        raise ValueError(f"nominal level {p} is outside (0, 1)")

    return -pred.scale * math.log1p(-p)
