# SPDX-License-Identifier: GPL-2.0-or-later
#
# Metrics, baselines, calibration, dense reconstruction and attention
# analysis. Everything here works on numpy arrays; the network is only
# reached through training.Predictor.
#

import os
import os.path
import math

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.stats

import chrono
import chrono.laplace_head
import chrono.mdar
import chrono.spatial_encoder
import chrono.synthscene
import chrono.temporal_fusion
import chrono.training

from chrono.laplace_head import LaplacePrediction
from chrono.synthscene import CalendarDate, MultimodalSample, SarStats, SceneSpec
from chrono.temporal_fusion import AttentionRecord
from chrono.training import INTERPOLATION, Predictor

logger = chrono.logger

STRATA = {
    "all"         : None,
    "stable"      : chrono.synthscene.STABLE,
    "dynamic_crop": chrono.synthscene.DYNAMIC_CROP,
}

DEFAULT_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

PSNR_PEAK = 1.0


@dataclass
class EvalConfig:
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    strata: Tuple[str, ...] = tuple(STRATA)
    step_days: int = 5
    period_days: int = 365
    min_gap_days: int = 20
    large_gap_days: int = 25
    interval_level: float = 0.9
    clean_fraction: float = 0.05
    bootstrap_resamples: int = 2000
    attention_scenes: int = 50

    def validate(self) -> None:
        if not self.levels or any(not 0.0 < p < 1.0 for p in self.levels):
            raise ValueError("eval.levels must lie in (0, 1)")
        if unknown := set(self.strata) - set(STRATA):
            raise ValueError(f"unknown strata: {', '.join(sorted(unknown))}")
        if self.step_days < 1 or self.period_days < 1:
            raise ValueError("eval.step_days and eval.period_days must be positive")
        if not 0.0 < self.interval_level < 1.0:
            raise ValueError("eval.interval_level must lie in (0, 1)")
        if not 0.0 <= self.clean_fraction <= 1.0:
            raise ValueError("eval.clean_fraction must lie in [0, 1]")


def _number(value: float) -> Any:
    """JSON has no infinity: +inf PSNR is reported as the string 'inf', NaN as null."""
    if math.isnan(value):
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


#
# Reconstruction metrics
#

def psnr(mse: float, peak: float = PSNR_PEAK) -> float:
    if mse <= 0.0:
        return math.inf
    return -10.0 * math.log10(mse / (peak * peak))


@dataclass
class StratumMetrics:
    count: int
    mae: List[float]
    rmse: List[float]
    psnr: List[float]
    mae_all: float
    rmse_all: float
    psnr_all: float

    def __post_init__(self) -> None:
        for mae, rmse in zip(self.mae + [self.mae_all], self.rmse + [self.rmse_all]):
            if mae > rmse * (1.0 + 1e-9) + 1e-12:
                raise ValueError(f"MAE {mae} exceeds RMSE {rmse}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "count"   : self.count,
            "mae"     : [_number(x) for x in self.mae],
            "rmse"    : [_number(x) for x in self.rmse],
            "psnr"    : [_number(x) for x in self.psnr],
            "mae_all" : _number(self.mae_all),
            "rmse_all": _number(self.rmse_all),
            "psnr_all": _number(self.psnr_all),
        }


@dataclass
class MetricReport:
    bands: Tuple[str, ...] = chrono.synthscene.OPTICAL_BANDS
    strata: Dict[str, Optional[StratumMetrics]] = field(default_factory=dict)

    def __getitem__(self, stratum: str) -> Optional[StratumMetrics]:
        return self.strata.get(stratum)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bands" : list(self.bands),
            "strata": {k: (v.to_dict() if v is not None else None) for k, v in self.strata.items()},
        }


def stratum_metrics(diff: npt.NDArray[np.float64]) -> Optional[StratumMetrics]:
    """diff is [bands, pixels]; an empty stratum is absent, not zero."""
    if diff.shape[1] == 0:
        return None

    absdiff = np.abs(diff)
    mse = (diff ** 2).mean(axis=1)
    mse_all = float((diff ** 2).mean())

    return StratumMetrics(count=int(diff.shape[1]),
                          mae=[float(x) for x in absdiff.mean(axis=1)],
                          rmse=[float(math.sqrt(x)) for x in mse],
                          psnr=[psnr(float(x)) for x in mse],
                          mae_all=float(absdiff.mean()),
                          rmse_all=math.sqrt(mse_all),
                          psnr_all=psnr(mse_all))


def _batched(array: npt.ArrayLike, ndim: int) -> npt.NDArray[Any]:
    x = np.asarray(array)
    return x[None] if x.ndim == ndim - 1 else x


def metrics(pred_mu: npt.ArrayLike, truth: npt.ArrayLike,
            valid_mask: Optional[npt.ArrayLike] = None,
            strata: Optional[npt.ArrayLike] = None,
            names: Sequence[str] = tuple(STRATA)) -> MetricReport:
    pred = _batched(pred_mu, 4).astype(np.float64)
    true = _batched(truth, 4).astype(np.float64)

    if pred.shape != true.shape or pred.ndim != 4:
        raise ValueError(f"prediction {pred.shape} and truth {true.shape} differ")

    n, c, h, w = pred.shape

    valid = np.ones((n, h, w), dtype=np.bool_) if valid_mask is None \
            else _batched(valid_mask, 3).astype(np.bool_)

    if valid.shape != (n, h, w):
        raise ValueError(f"valid mask {valid.shape} does not match {(n, h, w)}")

    labels = None if strata is None else _batched(strata, 3)

    if labels is not None and labels.shape != (n, h, w):
        raise ValueError(f"strata {labels.shape} do not match {(n, h, w)}")

    diff = (pred - true).transpose(1, 0, 2, 3)
    report = MetricReport(bands=chrono.synthscene.OPTICAL_BANDS[:c])

    for name in names:
        label = STRATA[name]
        if label is not None and labels is None:
            continue
        select = valid if label is None else valid & (labels == label)
        report.strata[name] = stratum_metrics(diff[:, select])
        if report.strata[name] is None:
            logger.warning("metrics: stratum %s is empty", name)

    return report


def regression_stats(pred: npt.ArrayLike, truth: npt.ArrayLike,
                     valid_mask: Optional[npt.ArrayLike] = None) -> List[Optional[Dict[str, float]]]:
    """Per-band least-squares fit of predicted against true reflectance."""
    p = _batched(pred, 4).astype(np.float64).transpose(1, 0, 2, 3)
    t = _batched(truth, 4).astype(np.float64).transpose(1, 0, 2, 3)
    valid = np.ones(p.shape[1:], dtype=np.bool_) if valid_mask is None \
            else _batched(valid_mask, 3).astype(np.bool_)

    out: List[Optional[Dict[str, float]]] = []

    for band in range(p.shape[0]):
        x, y = t[band][valid], p[band][valid]
        if x.size < 2 or np.ptp(x) == 0.0:
            out.append(None)
            continue
        fit = scipy.stats.linregress(x, y)
        out.append({"slope": float(fit.slope), "intercept": float(fit.intercept),
                    "r2": float(fit.rvalue ** 2)})

    return out


#
# Baselines
#

def _relative_days(dates: Sequence[CalendarDate], target: CalendarDate) -> npt.NDArray[np.float64]:
    return np.array([d.days() - target.days() for d in dates], dtype=np.float64)


def _check_sequence(optical: npt.NDArray[np.float64], dates: Sequence[CalendarDate],
                    clean: npt.NDArray[np.bool_]) -> None:
    if optical.ndim != 4 or optical.shape[0] != len(dates) or \
       clean.shape != (optical.shape[0], *optical.shape[2:]):
        raise ValueError(f"{len(dates)} dates, images {optical.shape} and masks {clean.shape} disagree")


def _pick(x: npt.NDArray[np.float64], index: npt.NDArray[np.int64]) -> npt.NDArray[np.float64]:
    full = np.broadcast_to(index[None, None], (1, *x.shape[1:]))
    return np.take_along_axis(x, full, axis=0)[0]


def linear_baseline(optical_seq: npt.ArrayLike, dates: Sequence[CalendarDate],
                    cloud_masks: npt.ArrayLike,
                    target_date: CalendarDate) -> Tuple[npt.NDArray[np.float32], npt.NDArray[np.bool_]]:
    """
    Per pixel and band, linear interpolation between the nearest cloud-free
    observations before and after the target. With a single side available the
    nearest value is held. Pixels cloudy at every date are returned invalid.
    """
    x = np.asarray(optical_seq, dtype=np.float64)
    clean = ~np.asarray(cloud_masks, dtype=np.bool_)

    _check_sequence(x, dates, clean)

    _, c, h, w = x.shape
    out = np.zeros((c, h, w), dtype=np.float64)

    if not dates:
        return out.astype(np.float32), np.zeros((h, w), dtype=np.bool_)

    t = np.broadcast_to(_relative_days(dates, target_date)[:, None, None], clean.shape)
    before = clean & (t <= 0)
    after = clean & (t > 0)

    ib = np.where(before, t, -np.inf).argmax(axis=0)
    ia = np.where(after, t, np.inf).argmin(axis=0)
    has_b = before.any(axis=0)
    has_a = after.any(axis=0)

    tb = np.where(has_b, np.take_along_axis(t, ib[None], axis=0)[0], 0.0)
    ta = np.where(has_a, np.take_along_axis(t, ia[None], axis=0)[0], 1.0)
    xb = _pick(x, ib)
    xa = _pick(x, ia)

    both = has_b & has_a
    weight = np.where(both, -tb / np.where(both, ta - tb, 1.0), 0.0)

    out = np.where(both, xb + weight * (xa - xb), np.where(has_b, xb, xa))
    valid = has_b | has_a
    out[:, ~valid] = 0.0

    return out.astype(np.float32), valid


def persistence_baseline(optical_seq: npt.ArrayLike, dates: Sequence[CalendarDate],
                         cloud_masks: npt.ArrayLike,
                         target_date: CalendarDate) -> Tuple[npt.NDArray[np.float32], npt.NDArray[np.bool_]]:
    """Nearest cloud-free observation in time, earlier one on ties."""
    x = np.asarray(optical_seq, dtype=np.float64)
    clean = ~np.asarray(cloud_masks, dtype=np.bool_)

    _check_sequence(x, dates, clean)

    _, c, h, w = x.shape

    if not dates:
        return np.zeros((c, h, w), dtype=np.float32), np.zeros((h, w), dtype=np.bool_)

    t = np.broadcast_to(_relative_days(dates, target_date)[:, None, None], clean.shape)
    key = np.where(clean, 2.0 * np.abs(t) + (t > 0), np.inf)
    index = key.argmin(axis=0)
    valid = clean.any(axis=0)

    out = _pick(x, index)
    out[:, ~valid] = 0.0

    return out.astype(np.float32), valid


def baseline_for(sample: MultimodalSample,
                 kind: str = "linear") -> Tuple[npt.NDArray[np.float32], npt.NDArray[np.bool_]]:
    fn = linear_baseline if kind == "linear" else persistence_baseline
    return fn(sample.optical, sample.optical_dates, sample.cloud_mask, sample.target_date)


#
# Calibration
#

@dataclass
class CalibrationCurve:
    levels: List[float]
    coverage: List[float]               # aggregated over bands
    band_coverage: List[List[float]]    # [level][band]
    count: int

    def max_error(self) -> float:
        return max(abs(c - p) for p, c in zip(self.levels, self.coverage))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "levels"       : self.levels,
            "coverage"     : self.coverage,
            "band_coverage": self.band_coverage,
            "count"        : self.count,
            "max_error"    : self.max_error(),
        }


def calibration(preds: Sequence[LaplacePrediction], truths: Sequence[npt.ArrayLike],
                valid_masks: Optional[Sequence[npt.ArrayLike]] = None,
                levels: Sequence[float] = DEFAULT_LEVELS) -> CalibrationCurve:
    if not levels or any(not 0.0 < p < 1.0 for p in levels):
        raise ValueError("calibration levels must lie in (0, 1)")

    if len(preds) != len(truths) or (valid_masks is not None and len(valid_masks) != len(preds)):
        raise ValueError("predictions, truths and masks differ in number")

    residuals = []
    scales = []

    for i, pred in enumerate(preds):
        mu = pred.mu.detach().cpu().numpy().astype(np.float64).reshape(-1, *pred.mu.shape[-3:])
        scale = pred.scale.detach().cpu().numpy().astype(np.float64).reshape(mu.shape)
        y = np.asarray(truths[i], dtype=np.float64).reshape(mu.shape)

        valid = np.ones((mu.shape[0], *mu.shape[2:]), dtype=np.bool_)
        if valid_masks is not None:
            valid = np.asarray(valid_masks[i], dtype=np.bool_).reshape(valid.shape)

        residuals.append(np.abs(y - mu).transpose(1, 0, 2, 3)[:, valid])
        scales.append(scale.transpose(1, 0, 2, 3)[:, valid])

    res = np.concatenate(residuals, axis=1) if residuals else np.zeros((0, 0))
    scale = np.concatenate(scales, axis=1) if scales else np.zeros((0, 0))

    if res.size == 0:
        raise ValueError("calibration needs at least one valid element")

    coverage = []
    band_coverage = []

    for p in levels:
        inside = res <= chrono.laplace_head.halfwidth(scale, p)
        coverage.append(float(inside.mean()))
        band_coverage.append([float(x) for x in inside.mean(axis=1)])

    return CalibrationCurve(levels=[float(p) for p in levels], coverage=coverage,
                            band_coverage=band_coverage, count=int(res.size))


#
# Dense reconstruction
#

@dataclass
class SceneObservations:
    """Every observed acquisition of a scene over its year."""
    scene: SceneSpec
    optical_dates: List[CalendarDate]
    radar_dates: List[CalendarDate]
    optical: npt.NDArray[np.float32] = field(repr=False)
    cloud_mask: npt.NDArray[np.bool_] = field(repr=False)
    radar: npt.NDArray[np.float32] = field(repr=False)
    landcover: npt.NDArray[np.int64] = field(repr=False)


def observe_scene(scene: SceneSpec, stats: SarStats) -> SceneObservations:
    h, w = scene.height, scene.width
    optical = []
    masks = []

    for d in scene.s2_calendar:
        image, mask = chrono.synthscene.apply_clouds(chrono.synthscene.render_optical(scene, d), scene, d)
        optical.append(image)
        masks.append(mask)

    radar = [chrono.synthscene.render_sar(scene, d, stats) for d in scene.s1_calendar]

    return SceneObservations(
            scene         = scene,
            optical_dates = list(scene.s2_calendar),
            radar_dates   = list(scene.s1_calendar),
            optical       = np.stack(optical) if optical else np.zeros((0, 4, h, w), dtype=np.float32),
            cloud_mask    = np.stack(masks) if masks else np.zeros((0, h, w), dtype=np.bool_),
            radar         = np.stack(radar) if radar else np.zeros((0, 2, h, w), dtype=np.float32),
            landcover     = scene.landcover)


def ndvi_bounds(mu: npt.ArrayLike,
                halfwidth: npt.ArrayLike) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64],
                                                   npt.NDArray[np.float64]]:
    """
    NDVI of the clipped mean and its interval, taken as min and max of NDVI
    over the four (red, nir) corners of the per-band intervals. mu and
    halfwidth carry bands on axis -3.
    """
    m = np.clip(np.asarray(mu, dtype=np.float64), 0.0, 1.0)
    w = np.asarray(halfwidth, dtype=np.float64)

    red, nir = m[..., 0, :, :], m[..., 3, :, :]
    wr, wn = w[..., 0, :, :], w[..., 3, :, :]

    center = chrono.synthscene.ndvi(nir, red)
    corners = np.stack([chrono.synthscene.ndvi(np.clip(nir + sn * wn, 0.0, 1.0),
                                               np.clip(red + sr * wr, 0.0, 1.0))
                        for sn in (-1.0, 1.0) for sr in (-1.0, 1.0)])

    lower = np.minimum(corners.min(axis=0), center)
    upper = np.maximum(corners.max(axis=0), center)

    return center, lower, upper


@dataclass
class NdviSeries:
    dates: List[CalendarDate]
    predicted: npt.NDArray[np.float64] = field(repr=False)   # [D, H, W]
    lower: npt.NDArray[np.float64] = field(repr=False)
    upper: npt.NDArray[np.float64] = field(repr=False)
    truth: Optional[npt.NDArray[np.float64]] = field(default=None, repr=False)
    level: float = 0.9

    def pixel(self, row: int, col: int) -> Dict[str, List[Optional[float]]]:
        return {
            "predicted": [float(x) for x in self.predicted[:, row, col]],
            "lower"    : [float(x) for x in self.lower[:, row, col]],
            "upper"    : [float(x) for x in self.upper[:, row, col]],
            "truth"    : [float(x) for x in self.truth[:, row, col]] if self.truth is not None
                         else [None] * len(self.dates),
        }

    def coverage(self, pixelwise: bool = True) -> float:
        """
        Fraction of date-pixels whose truth lies within that pixel's own band.
        With pixelwise=False only patch means are compared, which is far looser.
        """
        if self.truth is None or not self.dates:
            return math.nan
        if pixelwise:
            return float(((self.lower <= self.truth) & (self.truth <= self.upper)).mean())
        t = self.truth.mean(axis=(1, 2))
        inside = (self.lower.mean(axis=(1, 2)) <= t) & (t <= self.upper.mean(axis=(1, 2)))
        return float(inside.mean())

    def rmse(self, other: Optional[npt.NDArray[np.float64]] = None) -> float:
        if self.truth is None:
            return math.nan
        values = self.predicted if other is None else other
        return float(np.sqrt(((values - self.truth) ** 2).mean()))


@dataclass
class DensifyResult:
    dates: List[CalendarDate]
    predictions: List[LaplacePrediction]
    ndvi: NdviSeries
    baseline_ndvi: npt.NDArray[np.float64] = field(repr=False)
    windows: List[Tuple[List[int], List[int]]] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            "dates"         : [d.iso() for d in self.dates],
            "level"         : self.ndvi.level,
            "ndvi_mean"     : [float(x) for x in self.ndvi.predicted.mean(axis=(1, 2))],
            "ndvi_lower"    : [float(x) for x in self.ndvi.lower.mean(axis=(1, 2))],
            "ndvi_upper"    : [float(x) for x in self.ndvi.upper.mean(axis=(1, 2))],
            "ndvi_truth"    : [float(x) for x in self.ndvi.truth.mean(axis=(1, 2))]
                              if self.ndvi.truth is not None else None,
            "ndvi_rmse"     : _number(self.ndvi.rmse()),
            "baseline_rmse" : _number(self.ndvi.rmse(self.baseline_ndvi)),
            "band_coverage" : _number(self.ndvi.coverage()),
        }


def densify_dates(start: CalendarDate, period_days: int, step_days: int) -> List[CalendarDate]:
    if step_days < 1:
        raise ValueError(f"step must be at least one day, got {step_days}")
    return [start.shift(k) for k in range(0, period_days, step_days)]


def densify(ckpt: chrono.training.Checkpoint, scene: SceneSpec,
            start: Optional[CalendarDate] = None, period_days: int = 365, step_days: int = 5,
            level: float = 0.9, predictor: Optional[Predictor] = None,
            observations: Optional[SceneObservations] = None) -> DensifyResult:
    """
    Predicts the scene on a regular date grid, each date independently from
    its own sliding window. An acquisition on a grid date is never its own input.
    """
    start = start or CalendarDate(scene.year, 1)
    grid = densify_dates(start, period_days, step_days)
    predictor = predictor or Predictor(ckpt)
    obs = observations or observe_scene(scene, ckpt.sar_stats)
    cfg = ckpt.train_cfg

    predictions = []
    windows = []
    truth = []
    baseline = []

    for d in grid:
        idx = chrono.training.window_indices(obs.optical_dates, obs.radar_dates, d, INTERPOLATION,
                                             0, cfg.max_seq_len, cfg.optical_only)
        if idx is None:
            raise ValueError(f"no optical acquisition available around {d}")

        clean = chrono.synthscene.render_optical(scene, d)
        sample = chrono.training.sample_from_pool(obs, idx[0], idx[1], d, clean, INTERPOLATION, 0)
        pred, _ = predictor.predict(sample, d)

        logger.debug("densify %s: %d optical, %d radar inputs", d, len(idx[0]), len(idx[1]))

        others = [i for i, od in enumerate(obs.optical_dates) if od != d]
        lin, _ = linear_baseline(obs.optical[others], [obs.optical_dates[i] for i in others],
                                 obs.cloud_mask[others], d)

        predictions.append(pred)
        windows.append(idx)
        truth.append(clean)
        baseline.append(lin)

    mu = np.concatenate([p.mu.cpu().numpy() for p in predictions]).astype(np.float64)
    scale = np.concatenate([p.scale.cpu().numpy() for p in predictions]).astype(np.float64)
    center, lower, upper = ndvi_bounds(mu, chrono.laplace_head.halfwidth(scale, level))

    true = np.stack(truth).astype(np.float64)
    base = np.stack(baseline).astype(np.float64)

    series = NdviSeries(dates=grid, predicted=center, lower=lower, upper=upper,
                        truth=chrono.synthscene.ndvi(true[:, 3], true[:, 0]), level=level)

    return DensifyResult(dates=grid, predictions=predictions, ndvi=series,
                         baseline_ndvi=chrono.synthscene.ndvi(base[:, 3], base[:, 0]),
                         windows=windows)


#
# Attention
#

def attention_summary(record: AttentionRecord, item: int = 0) -> npt.NDArray[np.float64]:
    """Mean attention per input acquisition, [layers, heads, T_total]."""
    return np.asarray(record.weights[:, :, item].double().mean(dim=2).cpu().numpy())


def token_meta(sample: MultimodalSample) -> List[Dict[str, str]]:
    """Token slots in model order: optical acquisitions first, then radar."""
    return [{"modality": chrono.spatial_encoder.OPTICAL, "date": d.iso()} for d in sample.optical_dates] + \
           [{"modality": chrono.spatial_encoder.RADAR, "date": d.iso()} for d in sample.radar_dates]


def export_attention(record: AttentionRecord, sample: MultimodalSample,
                     out_dir: str, item: int = 0) -> Dict[str, Any]:
    tokens = token_meta(sample)
    weights = record.weights[:, :, item].double().cpu().numpy()   # [L, H, P, T]
    h, w = sample.optical.shape[-2] // 2, sample.optical.shape[-1] // 2

    if weights.shape[-1] != len(tokens) or weights.shape[-2] != h * w:
        raise ValueError(f"attention {weights.shape} does not match {len(tokens)} tokens on {h}x{w}")

    summary = attention_summary(record, item)
    maps = []

    for layer in range(record.layers):
        for head in range(record.heads):
            fname = f"layer{layer}-head{head}.mdar"
            per_token = weights[layer, head].T.reshape(len(tokens), h, w)
            chrono.mdar.write(os.path.join(out_dir, fname), per_token)
            maps.append({"layer": layer, "head": head, "file": fname, "shape": [len(tokens), h, w]})

    index = {
        "target_date": sample.target_date.iso(),
        "tokens"     : tokens,
        "summary"    : summary.tolist(),
        "maps"       : maps,
    }

    chrono.write_json(os.path.join(out_dir, "attention.json"), index)

    return index


def attention_modality_share(record: AttentionRecord, modality: Sequence[str],
                             item: int = 0) -> Dict[str, npt.NDArray[np.float64]]:
    """Total attention on each modality per layer and head."""
    summary = attention_summary(record, item)
    kinds = np.asarray(modality)

    return {m: summary[..., kinds == m].sum(axis=-1) for m in chrono.temporal_fusion.MODALITIES}


@dataclass
class CloudAttentionResult:
    scenes: int
    cloudy_mean: float
    clean_mean: float
    statistic: float
    pvalue: float

    def to_dict(self) -> Dict[str, Any]:
        return {k: _number(v) if isinstance(v, float) else v for k, v in self.__dict__.items()}


def cloud_fraction(sample: Any) -> npt.NDArray[np.float64]:
    return np.asarray(sample.cloud_mask, dtype=np.float64).reshape(len(sample.optical_dates), -1).mean(axis=1)


def with_heavy_cloud(sample: MultimodalSample, index: int, scene: SceneSpec,
                     opacity: float = 0.95, brightness: float = 0.9) -> MultimodalSample:
    """Sample copy where one optical input is almost entirely covered."""
    clean = chrono.synthscene.render_optical(scene, sample.optical_dates[index])
    optical = sample.optical.copy()
    cloud_mask = sample.cloud_mask.copy()

    optical[index] = np.clip(chrono.synthscene.blend(clean, opacity, brightness), 0.0, 1.0)
    cloud_mask[index] = True

    return MultimodalSample(optical=optical, radar=sample.radar,
                            optical_dates=sample.optical_dates, radar_dates=sample.radar_dates,
                            target_date=sample.target_date, target=sample.target,
                            cloud_mask=cloud_mask, landcover=sample.landcover,
                            mode=sample.mode, min_gap=sample.min_gap)


def cloud_attention_test(predictor: Predictor, pools: Sequence[Any], scenes: int = 50,
                         clean_fraction: float = 0.05) -> CloudAttentionResult:
    """
    Covers the optical input nearest to the target with a heavy cloud and
    tests, one-sided, whether it receives less attention than the clean
    optical inputs of the same window.
    """
    cfg = predictor.ckpt.train_cfg
    diffs = []
    cloudy = []
    clean = []

    for pool in pools:
        if len(diffs) >= scenes:
            break

        sample = chrono.training.window_inputs(pool, INTERPOLATION, 0, cfg.max_seq_len, cfg.optical_only)
        if sample is None or len(sample.optical_dates) < 2:
            continue

        t0 = sample.target_date.days()
        nearest = min(range(len(sample.optical_dates)),
                      key=lambda i: abs(sample.optical_dates[i].days() - t0))
        fractions = cloud_fraction(sample)
        others = [i for i in range(len(sample.optical_dates))
                  if i != nearest and fractions[i] < clean_fraction]

        if not others:
            continue

        _, record = predictor.predict(with_heavy_cloud(sample, nearest, pool.scene),
                                      sample.target_date, record=True)
        assert record is not None
        weight = attention_summary(record).mean(axis=(0, 1))

        cloudy.append(float(weight[nearest]))
        clean.append(float(weight[others].mean()))
        diffs.append(cloudy[-1] - clean[-1])

    if len(diffs) < scenes:
        logger.warning("cloud attention test: only %d usable scenes (wanted %d)", len(diffs), scenes)

    if len(diffs) < 2 or not np.any(diffs):
        return CloudAttentionResult(len(diffs), float(np.mean(cloudy)) if cloudy else math.nan,
                                    float(np.mean(clean)) if clean else math.nan, math.nan, math.nan)

    test = scipy.stats.wilcoxon(diffs, alternative="less")

    return CloudAttentionResult(scenes=len(diffs), cloudy_mean=float(np.mean(cloudy)),
                                clean_mean=float(np.mean(clean)),
                                statistic=float(test.statistic), pvalue=float(test.pvalue))


#
# Split evaluation
#

def nearest_clean_gap(sample: Any, clean_fraction: float = 0.05) -> Optional[int]:
    """Days between the target and the closest optical input that is essentially cloud free."""
    fractions = cloud_fraction(sample)
    t0 = sample.target_date.days()
    gaps = [abs(d.days() - t0) for d, f in zip(sample.optical_dates, fractions) if f < clean_fraction]

    return min(gaps) if gaps else None


def large_gap_subset(samples: Sequence[Any], min_days: int = 25,
                     clean_fraction: float = 0.05) -> List[Any]:
    """Samples with no clean optical input closer than min_days (none at all counts as large)."""
    out = []

    for s in samples:
        gap = nearest_clean_gap(s, clean_fraction)
        if gap is None or gap >= min_days:
            out.append(s)

    return out


def window_samples(pools: Sequence[Any], mode: str, min_gap: int,
                   optical_only: bool = False) -> Tuple[List[MultimodalSample], int]:
    samples = []
    skipped = 0

    for pool in pools:
        s = chrono.training.window_inputs(pool, mode, min_gap, optical_only=optical_only)
        if s is None:
            skipped += 1
            continue
        samples.append(s)

    return samples, skipped


@dataclass
class SplitReport:
    mode: str
    samples: int
    skipped: int
    model: MetricReport
    model_unclipped: Optional[MetricReport]
    model_paired: MetricReport
    linear: MetricReport
    persistence: MetricReport
    calibration: CalibrationCurve
    regression: List[Optional[Dict[str, float]]]
    uncertainty_gap_spearman: float
    uncertainty_error_spearman: float
    crop_bootstrap: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode"                      : self.mode,
            "samples"                   : self.samples,
            "skipped"                   : self.skipped,
            "model"                     : self.model.to_dict(),
            "model_unclipped"           : self.model_unclipped.to_dict() if self.model_unclipped else None,
            "model_paired"              : self.model_paired.to_dict(),
            "linear_baseline"           : self.linear.to_dict(),
            "persistence_baseline"      : self.persistence.to_dict(),
            "calibration"               : self.calibration.to_dict(),
            "regression"                : self.regression,
            "uncertainty_gap_spearman"  : _number(self.uncertainty_gap_spearman),
            "uncertainty_error_spearman": _number(self.uncertainty_error_spearman),
            "crop_bootstrap"            : self.crop_bootstrap,
        }


def _spearman(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    rho, _ = scipy.stats.spearmanr(x, y)
    return float(rho)


def paired_bootstrap(diffs: Sequence[float], resamples: int, seed: int) -> Dict[str, Any]:
    """Mean model-minus-baseline error with a one-sided 95% upper bound."""
    d = np.asarray(diffs, dtype=np.float64)

    if d.size < 2:
        return {"samples": int(d.size), "mean_diff": _number(float(d.mean())) if d.size else None,
                "upper": None, "model_better": None}

    res = scipy.stats.bootstrap((d,), np.mean, confidence_level=0.90, n_resamples=resamples,
                                method="percentile", random_state=np.random.default_rng(seed))
    upper = float(res.confidence_interval.high)

    return {"samples": int(d.size), "mean_diff": float(d.mean()), "upper": _number(upper),
            "model_better": bool(upper < 0.0)}


def evaluate_samples(predictor: Predictor, samples: Sequence[MultimodalSample], mode: str,
                     cfg: EvalConfig, skipped: int = 0, seed: int = 0) -> SplitReport:
    if not samples:
        raise ValueError("no sample to evaluate")

    preds = predictor.predict_many(samples)

    mu = np.concatenate([p.mu.cpu().numpy() for p in preds]).astype(np.float64)
    scale = np.concatenate([p.scale.cpu().numpy() for p in preds]).astype(np.float64)
    truth = np.stack([s.target for s in samples if s.target is not None]).astype(np.float64)
    labels = np.stack([s.landcover for s in samples])

    lin = [baseline_for(s, "linear") for s in samples]
    per = [baseline_for(s, "persistence") for s in samples]
    lin_mu, lin_valid = np.stack([b[0] for b in lin]), np.stack([b[1] for b in lin])
    per_mu, per_valid = np.stack([b[0] for b in per]), np.stack([b[1] for b in per])

    clipped = np.concatenate([p.clipped_mu().cpu().numpy() for p in preds]).astype(np.float64)
    unclipped = None

    if (clipped != mu).any():
        unclipped = metrics(mu, truth, None, labels, cfg.strata)

    gaps = []
    uncertainty = []

    for s, b in zip(samples, scale):
        gap = nearest_clean_gap(s, cfg.clean_fraction)
        if gap is not None:
            gaps.append(float(gap))
            uncertainty.append(float(b.mean()))

    err = np.abs(clipped - truth)
    crop_diffs = []

    for i in range(len(samples)):
        select = lin_valid[i] & (labels[i] == chrono.synthscene.DYNAMIC_CROP)
        if select.any():
            crop_diffs.append(float(err[i][:, select].mean() - np.abs(lin_mu[i] - truth[i])[:, select].mean()))

    report = SplitReport(
            mode                       = mode,
            samples                    = len(samples),
            skipped                    = skipped,
            model                      = metrics(clipped, truth, None, labels, cfg.strata),
            model_unclipped            = unclipped,
            model_paired               = metrics(clipped, truth, lin_valid, labels, cfg.strata),
            linear                     = metrics(lin_mu, truth, lin_valid, labels, cfg.strata),
            persistence                = metrics(per_mu, truth, per_valid, labels, cfg.strata),
            calibration                = calibration(preds, list(truth), None, cfg.levels),
            regression                 = regression_stats(clipped, truth),
            uncertainty_gap_spearman   = _spearman(gaps, uncertainty),
            uncertainty_error_spearman = _spearman(scale.mean(axis=1).ravel().tolist(),
                                                   err.mean(axis=1).ravel().tolist()),
            crop_bootstrap             = paired_bootstrap(crop_diffs, cfg.bootstrap_resamples, seed))

    logger.info("%s: %d samples, model MAE %.5f, linear MAE %.5f", mode, len(samples),
                report.model["all"].mae_all if report.model["all"] else math.nan,
                report.linear["all"].mae_all if report.linear["all"] else math.nan)

    return report


def mode_gap(mode: str, cfg: EvalConfig) -> int:
    return cfg.min_gap_days if mode == INTERPOLATION else 0


def large_gap_pools(pools: Sequence[Any], mode: str, cfg: EvalConfig) -> List[Any]:
    """
    Pools whose optical window has no clean input within cfg.large_gap_days.
    Decided on the optical part of the window alone, so every model variant
    is compared on the same scenes.
    """
    out = []

    for pool in pools:
        s = chrono.training.window_inputs(pool, mode, mode_gap(mode, cfg), optical_only=True)
        if s is not None and large_gap_subset([s], cfg.large_gap_days, cfg.clean_fraction):
            out.append(pool)

    return out


def evaluate_split(predictor: Predictor, pools: Sequence[Any], mode: str, cfg: EvalConfig,
                   seed: int = 0) -> SplitReport:
    samples, skipped = window_samples(pools, mode, mode_gap(mode, cfg),
                                      predictor.ckpt.train_cfg.optical_only)

    return evaluate_samples(predictor, samples, mode, cfg, skipped, seed)
