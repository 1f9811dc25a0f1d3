# SPDX-License-Identifier: GPL-2.0-or-later

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Optional, Tuple

import torch
import torch.nn as nn

import chrono
import chrono.laplace_head
import chrono.spatial_encoder
import chrono.temporal_fusion
import chrono.timecode

from chrono.laplace_head import LaplacePrediction
from chrono.spatial_encoder import OPTICAL, RADAR
from chrono.temporal_fusion import AttentionRecord, TokenTensor

logger = chrono.logger


@dataclass
class ModelConfig:
    d_feat: int = 64
    d_time: int = 30
    encoder_hidden: int = 32
    spp_scales: Tuple[int, ...] = (1, 2, 4)
    n_layers: int = 3
    n_heads: int = 4
    ff_expansion: int = 2
    decoder_hidden: int = 32

    @property
    def d_tok(self) -> int:
        return self.d_feat + self.d_time + chrono.temporal_fusion.D_MOD

    def validate(self) -> None:
        for name in ("d_feat", "d_time", "encoder_hidden", "n_layers", "n_heads",
                     "ff_expansion", "decoder_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"model.{name} must be positive")
        if not self.spp_scales or min(self.spp_scales) < 1:
            raise ValueError("model.spp_scales must be positive integers")
        if self.d_tok % self.n_heads:
            raise ValueError(f"token size {self.d_tok} (d_feat + d_time + 2) "
                             f"is not divisible by {self.n_heads} heads")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["spp_scales"] = list(self.spp_scales)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        data = dict(data)
        data["spp_scales"] = tuple(int(s) for s in data["spp_scales"])
        return cls(**data)


@dataclass
class ModelInput:
    optical: torch.Tensor       # [B, T_S2, 4, H, W]
    radar: torch.Tensor         # [B, T_S1, 2, H, W]
    optical_time: torch.Tensor  # [B, T_S2, 3] raw date encodings
    radar_time: torch.Tensor    # [B, T_S1, 3]
    target_time: torch.Tensor   # [B, 3]
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return int(self.optical.shape[1] + self.radar.shape[1])

    @property
    def size(self) -> Tuple[int, int]:
        return int(self.optical.shape[-2]), int(self.optical.shape[-1])


class ChronoNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()

        self.cfg      = cfg
        self.encoders = chrono.spatial_encoder.ModalityEncoders(cfg.d_feat, cfg.encoder_hidden,
                                                                cfg.spp_scales)
        self.tokens   = chrono.temporal_fusion.TokenBuilder(cfg.d_time)
        self.target   = chrono.timecode.TimeProjection(cfg.d_tok)
        self.fusion   = chrono.temporal_fusion.CrossAttentionStack(cfg.d_tok, cfg.n_layers,
                                                                   cfg.n_heads, cfg.ff_expansion)
        self.decoder  = chrono.laplace_head.LaplaceDecoder(cfg.d_tok, cfg.decoder_hidden)

    def embed(self, batch: ModelInput) -> TokenTensor:
        opt = chrono.spatial_encoder.encode_acquisitions(batch.optical, OPTICAL, self.encoders[OPTICAL])
        sar = chrono.spatial_encoder.encode_acquisitions(batch.radar, RADAR, self.encoders[RADAR])

        return chrono.temporal_fusion.build_tokens(opt, sar, batch.optical_time, batch.radar_time,
                                                   self.tokens)

    def forward(self, batch: ModelInput,
                record: bool = False) -> Tuple[LaplacePrediction, Optional[AttentionRecord]]:
        if batch.steps < 1:
            raise ValueError("empty input sequence")

        tokens = self.embed(batch)
        query = chrono.timecode.project(batch.target_time, self.target)
        latent, attention = chrono.temporal_fusion.cross_attend(tokens, query, self.fusion, record)
        height, width = batch.size

        return chrono.laplace_head.decode(latent, self.decoder, height, width), attention


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
