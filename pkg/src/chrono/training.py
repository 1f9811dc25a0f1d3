# SPDX-License-Identifier: GPL-2.0-or-later
#
# Self-supervised masking trainer. A target optical acquisition is removed
# from a sample pool, optical inputs closer than a random minimum gap are
# dropped, the rest is randomly truncated, and the network is fitted to the
# clean target with the Laplace negative log-likelihood.
#

import os
import os.path
import math

from collections import defaultdict
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import torch

import chrono
import chrono.dataset
import chrono.laplace_head
import chrono.mdar
import chrono.model
import chrono.synthscene
import chrono.timecode

from chrono.dataset import SamplePool
from chrono.laplace_head import LaplacePrediction
from chrono.model import ChronoNet, ModelConfig, ModelInput
from chrono.synthscene import CalendarDate, MultimodalSample, SarStats
from chrono.temporal_fusion import AttentionRecord

logger = chrono.logger

INTERPOLATION = "interpolation"
EXTRAPOLATION = "extrapolation"
MODES = (INTERPOLATION, EXTRAPOLATION)

CHECKPOINT_FORMAT  = "chrono-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingError(Exception):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    max_seq_len: int = chrono.synthscene.MAX_SEQ_LEN
    min_gap_days: Tuple[int, int] = (5, 30)
    p_extrapolation: float = 0.5
    truncation: Tuple[int, int] = (2, 8)
    optical_only: bool = False
    absolute_time_encoding: bool = False
    val_min_gap_days: int = 20
    deterministic: bool = False

    def validate(self) -> None:
        if self.max_seq_len != chrono.synthscene.MAX_SEQ_LEN:
            raise ValueError(f"train.max_seq_len is fixed to {chrono.synthscene.MAX_SEQ_LEN}")
        if not 0 <= self.min_gap_days[0] <= self.min_gap_days[1]:
            raise ValueError("train.min_gap_days must be a non-negative range")
        if not 0.0 <= self.p_extrapolation <= 1.0:
            raise ValueError("train.p_extrapolation must lie in [0, 1]")
        if not 1 <= self.truncation[0] <= self.truncation[1] <= self.max_seq_len:
            raise ValueError(f"train.truncation must lie within [1, {self.max_seq_len}]")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("invalid optimizer settings")
        if self.val_min_gap_days < 0:
            raise ValueError("train.val_min_gap_days must be non-negative")

    def variant(self) -> str:
        flags = [name for name in ("optical_only", "absolute_time_encoding") if getattr(self, name)]
        return "+".join(flags) or "multimodal"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["min_gap_days"] = list(self.min_gap_days)
        data["truncation"] = list(self.truncation)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        data = dict(data)
        data["min_gap_days"] = tuple(int(x) for x in data["min_gap_days"])
        data["truncation"] = tuple(int(x) for x in data["truncation"])
        return cls(**data)


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    state: Dict[str, torch.Tensor] = field(repr=False)
    y0: int
    sar_stats: SarStats
    epoch: int = 0
    metrics: List[Dict[str, Any]] = field(default_factory=list)
    optimizer_state: Optional[Dict[str, Any]] = field(default=None, repr=False)


#
# Sample preparation
#

def select_target(pool: SamplePool, rng: np.random.Generator,
                  cfg: TrainConfig) -> Optional[MultimodalSample]:
    """Masks one optical acquisition as the target; None means the sample must be skipped."""
    n_opt = len(pool.optical_dates)

    if n_opt < 3:
        return None

    if rng.random() < cfg.p_extrapolation:
        mode = EXTRAPOLATION
        ti = n_opt - 1
    else:
        mode = INTERPOLATION
        ti = int(rng.integers(1, n_opt - 1))

    target = pool.optical_dates[ti]
    gap = int(rng.integers(cfg.min_gap_days[0], cfg.min_gap_days[1] + 1))

    optical = [i for i, d in enumerate(pool.optical_dates)
               if i != ti and abs(d.days() - target.days()) >= gap
               and (mode == INTERPOLATION or d < target)]

    if cfg.optical_only:
        radar: List[int] = []
    else:
        radar = [j for j, d in enumerate(pool.radar_dates)
                 if mode == INTERPOLATION or d < target]

    if not optical:
        return None

    return sample_from_pool(pool, optical, radar, target,
                            chrono.synthscene.render_optical(pool.scene, target), mode, gap)


def truncate_sequence(sample: MultimodalSample, rng: np.random.Generator,
                      cfg: TrainConfig) -> MultimodalSample:
    n_opt, n_sar = sample.shape_key

    if n_opt < 1:
        raise ValueError("truncation needs at least one optical acquisition")

    hi = min(cfg.truncation[1], cfg.max_seq_len, n_opt + n_sar)
    lo = min(cfg.truncation[0], hi)
    k = int(rng.integers(lo, hi + 1))

    first = int(rng.integers(0, n_opt))
    rest = [(0, i) for i in range(n_opt) if i != first] + [(1, j) for j in range(n_sar)]
    picked = [rest[i] for i in rng.choice(len(rest), size=k - 1, replace=False)] if k > 1 else []

    optical = [first] + [i for m, i in picked if m == 0]
    radar = [j for m, j in picked if m == 1]

    return sample.subset(optical, radar)


def sample_from_pool(pool: Any, optical: Sequence[int], radar: Sequence[int],
                     target_date: CalendarDate, target: Optional[npt.NDArray[np.float32]],
                     mode: str, gap: int) -> MultimodalSample:
    oi = sorted(optical)
    ri = sorted(radar)

    return MultimodalSample(optical=pool.optical[oi], radar=pool.radar[ri],
                            optical_dates=[pool.optical_dates[i] for i in oi],
                            radar_dates=[pool.radar_dates[j] for j in ri],
                            target_date=target_date, target=target,
                            cloud_mask=pool.cloud_mask[oi], landcover=pool.landcover,
                            mode=mode, min_gap=gap)


def window_indices(optical_dates: Sequence[CalendarDate], radar_dates: Sequence[CalendarDate],
                   target: CalendarDate, mode: str, min_gap: int = 0,
                   max_len: int = chrono.synthscene.MAX_SEQ_LEN, optical_only: bool = False,
                   exclude_target: bool = True) -> Optional[Tuple[List[int], List[int]]]:
    """
    Evaluation window: the optical acquisitions nearest to the target (both
    sides in interpolation, strictly before in extrapolation) plus radar
    acquisitions within their span, capped at max_len preferring the
    temporally nearest.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode: {mode}")

    t0 = target.days()

    def delta(d: CalendarDate) -> int:
        return d.days() - t0

    opt = [i for i, d in enumerate(optical_dates)
           if abs(delta(d)) >= min_gap
           and not (exclude_target and delta(d) == 0)
           and (mode == INTERPOLATION or delta(d) < 0)]

    if not opt:
        return None

    opt.sort(key=lambda i: (abs(delta(optical_dates[i])), delta(optical_dates[i])))
    opt = opt[:max_len]

    lo = min([delta(optical_dates[i]) for i in opt] + [0])
    hi = max([delta(optical_dates[i]) for i in opt] + [0])

    sar: List[int] = []
    if not optical_only:
        sar = [j for j, d in enumerate(radar_dates)
               if lo <= delta(d) <= hi and (mode == INTERPOLATION or delta(d) < 0)]

    required = []
    before = [i for i in opt if delta(optical_dates[i]) < 0]
    after = [i for i in opt if delta(optical_dates[i]) >= 0]

    for side in (before, after):
        if side:
            required.append((0, side[0]))

    candidates = [(0, i) for i in opt] + [(1, j) for j in sar]
    candidates.sort(key=lambda c: (abs(delta((optical_dates if c[0] == 0 else radar_dates)[c[1]])), c[0]))

    chosen = list(required)
    for c in candidates:
        if len(chosen) >= max_len:
            break
        if c not in chosen:
            chosen.append(c)

    return sorted(i for m, i in chosen if m == 0), sorted(j for m, j in chosen if m == 1)


def window_inputs(pool: SamplePool, mode: str, min_gap: int,
                  max_len: int = chrono.synthscene.MAX_SEQ_LEN,
                  optical_only: bool = False) -> Optional[MultimodalSample]:
    """Model input for the pool's own held-out target."""
    idx = window_indices(pool.optical_dates, pool.radar_dates, pool.target_date, mode,
                         min_gap, max_len, optical_only)

    if idx is None:
        return None

    return sample_from_pool(pool, idx[0], idx[1], pool.target_date, pool.target, mode, min_gap)


def make_batch(samples: Sequence[MultimodalSample], absolute_time: bool = False,
               y0: int = 0) -> Tuple[ModelInput, Optional[torch.Tensor]]:
    if not samples:
        raise ValueError("empty batch")

    keys = {s.shape_key for s in samples}

    if len(keys) != 1:
        raise ValueError(f"batch mixes sequence shapes {sorted(keys)}")

    def stack(arrays: Iterable[npt.NDArray[Any]]) -> torch.Tensor:
        return torch.from_numpy(np.ascontiguousarray(np.stack(list(arrays)), dtype=np.float32))

    batch = ModelInput(
            optical      = stack(s.optical for s in samples),
            radar        = stack(s.radar for s in samples),
            optical_time = stack(chrono.timecode.input_features(s.optical_dates, s.target_date,
                                                                absolute_time, y0) for s in samples),
            radar_time   = stack(chrono.timecode.input_features(s.radar_dates, s.target_date,
                                                                absolute_time, y0) for s in samples),
            target_time  = stack(chrono.timecode.target_features(s.target_date, y0) for s in samples))

    if any(s.target is None for s in samples):
        return batch, None

    return batch, stack(s.target for s in samples if s.target is not None)


def group_batches(samples: Sequence[MultimodalSample], batch_size: int,
                  rng: Optional[np.random.Generator] = None) -> List[List[MultimodalSample]]:
    """Batches of equal (T_S2, T_S1); batch order is shuffled when rng is given."""
    groups: Dict[Tuple[int, int], List[MultimodalSample]] = defaultdict(list)

    for s in samples:
        groups[s.shape_key].append(s)

    batches = []

    for key in sorted(groups):
        items = groups[key]
        for i in range(0, len(items), batch_size):
            batches.append(items[i:i + batch_size])

    if rng is not None:
        order = rng.permutation(len(batches))
        batches = [batches[i] for i in order]

    return batches


#
# Training
#

def set_determinism(seed: int, deterministic: bool) -> None:
    torch.manual_seed(seed)

    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def init_model(model_cfg: ModelConfig, seed: int) -> ChronoNet:
    torch.manual_seed(seed)
    return ChronoNet(model_cfg)


def validation_samples(split: Iterable[SamplePool], cfg: TrainConfig) -> List[MultimodalSample]:
    samples = []

    for pool in split:
        sample = window_inputs(pool, INTERPOLATION, cfg.val_min_gap_days, cfg.max_seq_len, cfg.optical_only)
        if sample is not None:
            samples.append(sample)

    return samples


def mean_nll(model: ChronoNet, samples: Sequence[MultimodalSample], cfg: TrainConfig, y0: int) -> float:
    if not samples:
        return math.nan

    total = 0.0
    count = 0

    model.eval()
    with torch.no_grad():
        for items in group_batches(samples, cfg.batch_size):
            batch, target = make_batch(items, cfg.absolute_time_encoding, y0)
            assert target is not None
            pred, _ = model(batch)
            total += float(chrono.laplace_head.nll_laplace(target, pred)) * len(items)
            count += len(items)

    return total / count


def check_batch(items: Sequence[MultimodalSample], cfg: TrainConfig) -> None:
    for s in items:
        if problems := s.violations(cfg.max_seq_len):
            raise TrainingError(f"invalid training sample: {'; '.join(problems)}")
        if s.optical_dates and min(abs(d.days() - s.target_date.days()) for d in s.optical_dates) < s.min_gap:
            raise TrainingError("optical input closer to the target than the enforced gap")
        if s.mode == EXTRAPOLATION and any(d >= s.target_date for d in s.optical_dates + s.radar_dates):
            raise TrainingError("extrapolation input dated at or after the target")


def train(train_split: Sequence[SamplePool], val_split: Sequence[SamplePool], cfg: TrainConfig,
          model_cfg: ModelConfig, y0: int, sar_stats: SarStats,
          checkpoint_dir: Optional[str] = None) -> Checkpoint:
    cfg.validate()
    set_determinism(cfg.seed, cfg.deterministic)

    model = init_model(model_cfg, cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    logger.info("training %s model with %d parameters on %d samples",
                cfg.variant(), chrono.model.count_parameters(model), len(train_split))

    val_samples = validation_samples(val_split, cfg)
    metrics = [{"epoch": 0, "train_nll": None, "val_nll": mean_nll(model, val_samples, cfg, y0), "skipped": 0}]

    logger.info("epoch 0: val nll %.5f", metrics[0]["val_nll"])

    for epoch in range(1, cfg.epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch])
        samples = []
        skipped = 0

        for pool in train_split:
            sample = select_target(pool, rng, cfg)
            if sample is None:
                skipped += 1
                continue
            samples.append(truncate_sequence(sample, rng, cfg))

        if skipped:
            logger.warning("epoch %d: skipped %d samples too short after gap enforcement", epoch, skipped)

        model.train()
        total, count = 0.0, 0

        for nbatch, items in enumerate(group_batches(samples, cfg.batch_size, rng)):
            check_batch(items, cfg)
            batch, target = make_batch(items, cfg.absolute_time_encoding, y0)
            assert target is not None

            pred, _ = model(batch)
            loss = chrono.laplace_head.nll_laplace(target, pred)

            if not torch.isfinite(loss):
                raise TrainingError(f"epoch {epoch} batch {nbatch}: non-finite loss {float(loss)} "
                                    f"(mu range [{float(pred.mu.min())}, {float(pred.mu.max())}], "
                                    f"log b range [{float(pred.log_b.min())}, {float(pred.log_b.max())}])")

            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            total += float(loss) * len(items)
            count += len(items)
            logger.debug("epoch %d batch %d shape %s loss %.5f", epoch, nbatch, items[0].shape_key, float(loss))

        entry = {
            "epoch"    : epoch,
            "train_nll": total / count if count else None,
            "val_nll"  : mean_nll(model, val_samples, cfg, y0),
            "skipped"  : skipped,
        }
        metrics.append(entry)

        logger.info("epoch %d: train nll %s, val nll %.5f", epoch,
                    f"{entry['train_nll']:.5f}" if count else "n/a", entry["val_nll"])

        if checkpoint_dir:
            save_checkpoint(snapshot(model, optimizer, cfg, y0, sar_stats, epoch, metrics), checkpoint_dir)

    return snapshot(model, optimizer, cfg, y0, sar_stats, cfg.epochs, metrics)


def snapshot(model: ChronoNet, optimizer: Optional[torch.optim.Optimizer], cfg: TrainConfig,
             y0: int, sar_stats: SarStats, epoch: int, metrics: List[Dict[str, Any]]) -> Checkpoint:
    return Checkpoint(model_cfg=model.cfg, train_cfg=cfg,
                      state={k: v.detach().clone() for k, v in model.state_dict().items()},
                      y0=y0, sar_stats=sar_stats, epoch=epoch, metrics=list(metrics),
                      optimizer_state=optimizer.state_dict() if optimizer is not None else None)


#
# Checkpoint container
#

def save_checkpoint(ckpt: Checkpoint, dirname: str) -> None:
    params = []

    os.makedirs(os.path.join(dirname, "params"), mode=0o755, exist_ok=True)

    for i, (name, tensor) in enumerate(ckpt.state.items()):
        fname = os.path.join("params", f"{i:04d}.mdar")
        chrono.mdar.write(os.path.join(dirname, fname), tensor.detach().cpu().numpy())
        params.append({"name": name, "file": fname, "shape": list(tensor.shape)})

    if ckpt.optimizer_state is not None:
        torch.save(ckpt.optimizer_state, os.path.join(dirname, "optimizer.pt"))

    chrono.write_json(os.path.join(dirname, "checkpoint.json"), {
        "format"   : CHECKPOINT_FORMAT,
        "version"  : CHECKPOINT_VERSION,
        "epoch"    : ckpt.epoch,
        "y0"       : ckpt.y0,
        "sar_stats": ckpt.sar_stats.to_dict(),
        "model"    : ckpt.model_cfg.to_dict(),
        "train"    : ckpt.train_cfg.to_dict(),
        "metrics"  : ckpt.metrics,
        "params"   : params,
    })

    logger.info("checkpoint written to %s (epoch %d)", dirname, ckpt.epoch)


def load_checkpoint(dirname: str) -> Checkpoint | chrono.Error:
    index = os.path.join(dirname, "checkpoint.json")

    if not os.path.exists(index):
        return chrono.Error(f"checkpoint not found: {dirname}", "missing-checkpoint")

    data = chrono.read_json(index)

    if isinstance(data, chrono.Error):
        return data

    if data.get("format") != CHECKPOINT_FORMAT or data.get("version") != CHECKPOINT_VERSION:
        return chrono.Error(f"{dirname}: not a checkpoint of version {CHECKPOINT_VERSION}", "bad-checkpoint")

    state: Dict[str, torch.Tensor] = {}

    for entry in data["params"]:
        value = chrono.mdar.read(os.path.join(dirname, entry["file"]))
        if isinstance(value, chrono.Error):
            return value
        state[entry["name"]] = torch.from_numpy(value.reshape(entry["shape"]).copy())

    optimizer_state = None
    optfile = os.path.join(dirname, "optimizer.pt")

    if os.path.exists(optfile):
        optimizer_state = torch.load(optfile, weights_only=True)

    try:
        return Checkpoint(model_cfg=ModelConfig.from_dict(data["model"]),
                          train_cfg=TrainConfig.from_dict(data["train"]),
                          state=state, y0=int(data["y0"]),
                          sar_stats=SarStats.from_dict(data["sar_stats"]),
                          epoch=int(data["epoch"]), metrics=list(data["metrics"]),
                          optimizer_state=optimizer_state)
    except (KeyError, TypeError, ValueError) as e:
        return chrono.Error(f"{dirname}: malformed checkpoint: {e}", "bad-checkpoint")


def build_model(ckpt: Checkpoint) -> ChronoNet:
    model = ChronoNet(ckpt.model_cfg)
    model.load_state_dict(ckpt.state)
    model.eval()
    return model


#
# Inference
#

class Predictor:
    def __init__(self, ckpt: Checkpoint):
        self.ckpt  = ckpt
        self.model = build_model(ckpt)

    def prepare(self, inputs: MultimodalSample, target_date: CalendarDate) -> MultimodalSample:
        if inputs.steps < 1:
            raise ValueError("empty input sequence")

        if self.ckpt.train_cfg.optical_only and inputs.radar_dates:
            inputs = inputs.subset(range(len(inputs.optical_dates)), [])

        return MultimodalSample(optical=inputs.optical, radar=inputs.radar,
                                optical_dates=list(inputs.optical_dates),
                                radar_dates=list(inputs.radar_dates),
                                target_date=target_date, target=None,
                                cloud_mask=inputs.cloud_mask, landcover=inputs.landcover,
                                mode=inputs.mode, min_gap=inputs.min_gap)

    def run(self, samples: Sequence[MultimodalSample],
            record: bool = False) -> List[Tuple[LaplacePrediction, Optional[AttentionRecord]]]:
        batch, _ = make_batch(samples, self.ckpt.train_cfg.absolute_time_encoding, self.ckpt.y0)

        with torch.no_grad():
            pred, attention = self.model(batch, record)

        out: List[Tuple[LaplacePrediction, Optional[AttentionRecord]]] = []

        for i in range(len(samples)):
            rec = None
            if attention is not None:
                rec = AttentionRecord(weights=attention.weights[:, :, i:i + 1])
            out.append((pred.item(i), rec))

        return out

    def predict(self, inputs: MultimodalSample, target_date: CalendarDate,
                record: bool = False) -> Tuple[LaplacePrediction, Optional[AttentionRecord]]:
        return self.run([self.prepare(inputs, target_date)], record)[0]

    def predict_many(self, samples: Sequence[MultimodalSample],
                     batch_size: int = 16) -> List[LaplacePrediction]:
        """Predictions for every sample at its own target date, in input order."""
        prepared = [self.prepare(s, s.target_date) for s in samples]
        order: Dict[int, LaplacePrediction] = {}
        position = {id(s): i for i, s in enumerate(prepared)}

        for items in group_batches(prepared, batch_size):
            for s, (pred, _) in zip(items, self.run(items)):
                order[position[id(s)]] = pred

        return [order[i] for i in range(len(prepared))]


def predict(ckpt: Checkpoint, inputs: MultimodalSample, target_date: CalendarDate) -> LaplacePrediction:
    pred, _ = Predictor(ckpt).predict(inputs, target_date)
    return pred
