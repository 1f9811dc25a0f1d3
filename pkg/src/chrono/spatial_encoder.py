# SPDX-License-Identifier: GPL-2.0-or-later

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

import chrono

logger = chrono.logger

OPTICAL = "optical"
RADAR   = "radar"

MODALITY_CHANNELS: Dict[str, int] = {
    OPTICAL: 4,
    RADAR  : 2,
}


@dataclass
class FeatureMap:
    values: torch.Tensor    # [B*T, d_feat, H/2, W/2]
    modality: str
    batch: int
    steps: int

    def unflatten(self) -> torch.Tensor:
        n, c, h, w = self.values.shape
        return self.values.reshape(self.batch, self.steps, c, h, w) if n else \
               self.values.new_zeros((self.batch, 0, c, h, w))


def spp(f: torch.Tensor, scales: Sequence[int]) -> torch.Tensor:
    """Pools to every s x s grid, upsamples back and concatenates with the input."""
    _, _, h, w = f.shape

    if any(s > h or s > w for s in scales):
        raise ValueError(f"pyramid scale {max(scales)} exceeds feature map {h}x{w}")

    branches = [f]

    for s in scales:
        pooled = F.adaptive_avg_pool2d(f, (s, s))
        branches.append(F.interpolate(pooled, size=(h, w), mode="nearest"))

    return torch.cat(branches, dim=1)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, kernel_size=3, stride=1, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size=3, stride=1, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(x + self.conv2(F.relu(self.conv1(x))))


class SpatialEncoder(nn.Module):
    """Stride-2 stem, two residual blocks, spatial pyramid pooling, 1x1 fusion."""

    def __init__(self, in_channels: int, d_feat: int = 64, hidden: int = 32,
                 scales: Sequence[int] = (1, 2, 4)):
        super().__init__()
        self.in_channels = in_channels
        self.scales      = tuple(scales)
        self.stem        = nn.Conv2d(in_channels, hidden, kernel_size=3, stride=2, padding=1)
        self.blocks      = nn.Sequential(ResidualBlock(hidden), ResidualBlock(hidden))
        self.fusion      = nn.Conv2d(hidden * (1 + len(self.scales)), d_feat, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.blocks(F.relu(self.stem(x)))
        return self.fusion(spp(y, self.scales))


class ModalityEncoders(nn.Module):
    """Same architecture per modality, independent weights."""

    def __init__(self, d_feat: int = 64, hidden: int = 32, scales: Sequence[int] = (1, 2, 4)):
        super().__init__()
        self.encoders = nn.ModuleDict({
            name: SpatialEncoder(channels, d_feat, hidden, scales)
            for name, channels in MODALITY_CHANNELS.items()
        })

    def __getitem__(self, modality: str) -> SpatialEncoder:
        encoder: SpatialEncoder = self.encoders[modality]
        return encoder


def check_input(x: torch.Tensor, modality: str) -> Tuple[int, int, int, int, int]:
    if modality not in MODALITY_CHANNELS:
        raise ValueError(f"unknown modality: {modality}")

    if x.dim() != 5:
        raise ValueError(f"expected a [B, T, C, H, W] tensor, got {tuple(x.shape)}")

    b, t, c, h, w = x.shape

    if c != MODALITY_CHANNELS[modality]:
        raise ValueError(f"{modality} input needs {MODALITY_CHANNELS[modality]} channels, got {c}")

    if h % 4 or w % 4:
        raise ValueError(f"spatial size {h}x{w} is not divisible by 4")

    return b, t, c, h, w


def encode_acquisitions(x: torch.Tensor, modality: str, params: SpatialEncoder) -> FeatureMap:
    b, t, c, h, w = check_input(x, modality)

    if b * t == 0:
        d_feat = params.fusion.out_channels
        return FeatureMap(values=x.new_zeros((0, d_feat, h // 2, w // 2)),
                          modality=modality, batch=b, steps=t)

    values = params(x.reshape(b * t, c, h, w))

    return FeatureMap(values=values, modality=modality, batch=b, steps=t)
