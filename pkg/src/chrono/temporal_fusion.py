# SPDX-License-Identifier: GPL-2.0-or-later

import math

from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

import chrono
import chrono.spatial_encoder
import chrono.timecode

from chrono.spatial_encoder import FeatureMap

logger = chrono.logger

MODALITIES = (chrono.spatial_encoder.OPTICAL, chrono.spatial_encoder.RADAR)
D_MOD = len(MODALITIES)


@dataclass
class TokenTensor:
    tokens: torch.Tensor    # [B, P, T_total, d_tok]
    modality: List[str]     # per token slot, optical slots first
    height: int             # feature grid, P = height * width
    width: int

    @property
    def steps(self) -> int:
        return int(self.tokens.shape[2])


@dataclass
class AttentionRecord:
    weights: torch.Tensor   # [layers, heads, B, P, T_total]

    @property
    def layers(self) -> int:
        return int(self.weights.shape[0])

    @property
    def heads(self) -> int:
        return int(self.weights.shape[1])

    def simplex_error(self) -> float:
        if self.weights.numel() == 0:
            return 0.0
        if bool((self.weights < 0).any()):
            return math.inf
        return float((self.weights.sum(dim=-1) - 1.0).abs().max())


def modality_code(modality: str, steps: int, like: torch.Tensor) -> torch.Tensor:
    code = like.new_zeros((steps, D_MOD))
    code[:, MODALITIES.index(modality)] = 1.0
    return code


def _pixel_tokens(feat: FeatureMap, time_tokens: torch.Tensor) -> torch.Tensor:
    x = feat.unflatten()
    b, t, c, h, w = x.shape

    if time_tokens.shape[:2] != (b, t):
        raise ValueError(f"{feat.modality}: {time_tokens.shape[1]} dates for {t} acquisitions")

    x = x.permute(0, 3, 4, 1, 2).reshape(b, h * w, t, c)
    tt = time_tokens[:, None, :, :].expand(b, h * w, t, time_tokens.shape[-1])
    mod = modality_code(feat.modality, t, x)[None, None].expand(b, h * w, t, D_MOD)

    return torch.cat([x, tt, mod], dim=-1)


class TokenBuilder(nn.Module):
    """Concatenates [spatial feature | projected date encoding | modality one-hot] per pixel."""

    def __init__(self, d_time: int):
        super().__init__()
        self.d_time = d_time
        self.time   = chrono.timecode.TimeProjection(d_time)

    def forward(self, opt_feat: FeatureMap, sar_feat: Optional[FeatureMap],
                opt_time: torch.Tensor, sar_time: Optional[torch.Tensor]) -> TokenTensor:
        parts = [_pixel_tokens(opt_feat, self.time(opt_time))]
        modality = [opt_feat.modality] * opt_feat.steps

        if sar_feat is not None and sar_time is not None and sar_feat.steps > 0:
            if sar_feat.values.shape[-2:] != opt_feat.values.shape[-2:]:
                raise ValueError("optical and radar features differ in spatial size")
            parts.append(_pixel_tokens(sar_feat, self.time(sar_time)))
            modality += [sar_feat.modality] * sar_feat.steps

        h, w = opt_feat.values.shape[-2:]

        return TokenTensor(tokens=torch.cat(parts, dim=2), modality=modality,
                           height=int(h), width=int(w))


def build_tokens(opt_feat: FeatureMap, sar_feat: Optional[FeatureMap],
                 opt_time: torch.Tensor, sar_time: Optional[torch.Tensor],
                 params: TokenBuilder) -> TokenTensor:
    return params(opt_feat, sar_feat, opt_time, sar_time)


class CrossAttentionLayer(nn.Module):
    """Pre-norm multi-head cross-attention followed by a feed-forward block."""

    def __init__(self, d_model: int, n_heads: int, expansion: int = 2):
        super().__init__()

        if d_model % n_heads:
            raise ValueError(f"token size {d_model} is not divisible by {n_heads} heads")

        self.d_model = d_model
        self.n_heads = n_heads
        self.d_head  = d_model // n_heads
        self.norm_q  = nn.LayerNorm(d_model)
        self.norm_kv = nn.LayerNorm(d_model)
        self.q       = nn.Linear(d_model, d_model)
        self.k       = nn.Linear(d_model, d_model)
        self.v       = nn.Linear(d_model, d_model)
        self.o       = nn.Linear(d_model, d_model)
        self.norm_ff = nn.LayerNorm(d_model)
        self.ff      = nn.Sequential(nn.Linear(d_model, expansion * d_model),
                                     nn.GELU(),
                                     nn.Linear(expansion * d_model, d_model))

    def attention(self, query: torch.Tensor, kv: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        n, t, _ = kv.shape
        h, dh = self.n_heads, self.d_head

        q = self.q(query).reshape(n, h, dh)
        k = self.k(kv).reshape(n, t, h, dh)
        v = self.v(kv).reshape(n, t, h, dh)

        logits = torch.einsum("nhd,nthd->nht", q, k) / math.sqrt(dh)
        weights = F.softmax(logits, dim=-1)
        out = torch.einsum("nht,nthd->nhd", weights, v).reshape(n, h * dh)

        return self.o(out), weights

    def forward(self, query: torch.Tensor, kv: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        attended, weights = self.attention(self.norm_q(query), self.norm_kv(kv))
        query = query + attended
        query = query + self.ff(self.norm_ff(query))
        return query, weights


class CrossAttentionStack(nn.Module):
    def __init__(self, d_model: int, n_layers: int = 3, n_heads: int = 4, expansion: int = 2):
        super().__init__()
        self.d_model = d_model
        self.layers  = nn.ModuleList([CrossAttentionLayer(d_model, n_heads, expansion)
                                      for _ in range(n_layers)])
        self.norm    = nn.LayerNorm(d_model)

    def forward(self, tokens: TokenTensor, target_token: torch.Tensor,
                record: bool = False) -> Tuple[torch.Tensor, Optional[AttentionRecord]]:
        b, p, t, d = tokens.tokens.shape

        if d != self.d_model or target_token.shape != (b, d):
            raise ValueError(f"token size {d} and query {tuple(target_token.shape)} "
                             f"do not match model size {self.d_model}")
        if t < 1:
            raise ValueError("cross-attention needs at least one token")

        kv = tokens.tokens.reshape(b * p, t, d)
        query = target_token[:, None, :].expand(b, p, d).reshape(b * p, d)
        weights: List[torch.Tensor] = []

        for layer in self.layers:
            query, w = layer(query, kv)
            if record:
                weights.append(w.detach().reshape(b, p, -1, t).permute(2, 0, 1, 3))

        latent = self.norm(query).reshape(b, p, d)

        if not record:
            return latent, None

        return latent, AttentionRecord(weights=torch.stack(weights))


def cross_attend(tokens: TokenTensor, target_token: torch.Tensor, params: CrossAttentionStack,
                 record: bool = False) -> Tuple[torch.Tensor, Optional[AttentionRecord]]:
    return params(tokens, target_token, record)
