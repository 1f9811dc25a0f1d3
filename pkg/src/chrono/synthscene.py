# SPDX-License-Identifier: GPL-2.0-or-later
#
# Seeded simulator of multimodal patch time series. Every scene is fully
# described by a SceneSpec, so clean reflectance can be rendered for any
# date, observed or not.
#

import datetime
import functools
import hashlib
import json
import os
import os.path
import concurrent.futures

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.special

import chrono
import chrono.dataset

logger = chrono.logger

OPTICAL_BANDS = ("red", "green", "blue", "nir")
RADAR_BANDS   = ("vv", "vh")

STABLE       = 0
DYNAMIC_CROP = 1

CLOUD_MASK_THRESHOLD = 0.3

MAX_RESEEDS = 100

# Seed-sequence stream identifiers.
STREAM_LAYOUT  = 0
STREAM_TEXTURE = 1
STREAM_SAR     = 2


@functools.total_ordering
@dataclass(frozen=True)
class CalendarDate:
    year: int
    day_of_year: int

    def __post_init__(self) -> None:
        if not 1 <= self.day_of_year <= days_in_year(self.year):
            raise ValueError(f"invalid day of year {self.day_of_year} for {self.year}")

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, CalendarDate):
            return NotImplemented
        return (self.year, self.day_of_year) < (other.year, other.day_of_year)

    def days(self) -> int:
        """Proleptic Gregorian ordinal of the date."""
        return datetime.date(self.year, 1, 1).toordinal() + self.day_of_year - 1

    def shift(self, ndays: int) -> "CalendarDate":
        return CalendarDate.from_days(self.days() + ndays)

    def iso(self) -> str:
        return datetime.date.fromordinal(self.days()).isoformat()

    @classmethod
    def from_days(cls, ordinal: int) -> "CalendarDate":
        d = datetime.date.fromordinal(ordinal)
        return cls(d.year, d.timetuple().tm_yday)

    @classmethod
    def from_iso(cls, value: str) -> "CalendarDate":
        d = datetime.date.fromisoformat(value)
        return cls(d.year, d.timetuple().tm_yday)

    def __str__(self) -> str:
        return self.iso()


def days_in_year(year: int) -> int:
    return 366 if datetime.date(year, 12, 31).timetuple().tm_yday == 366 else 365


def days_between(a: CalendarDate, b: CalendarDate) -> int:
    return a.days() - b.days()


@dataclass(frozen=True)
class FieldPhenology:
    b0: float
    amplitude: float
    t1: float
    t2: float
    k1: float
    k2: float
    dynamic: bool

    def validate(self) -> None:
        if not 0.0 <= self.b0 <= 0.2:
            raise ValueError(f"base value out of range: {self.b0}")
        if not 0.0 <= self.amplitude <= 0.8:
            raise ValueError(f"amplitude out of range: {self.amplitude}")
        if self.b0 + self.amplitude > 1.0:
            raise ValueError("base plus amplitude exceeds 1")
        if not self.t1 < self.t2:
            raise ValueError(f"green-up {self.t1} must precede senescence {self.t2}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("logistic slopes must be positive")


@dataclass(frozen=True)
class CloudEvent:
    date: CalendarDate
    centers: Tuple[Tuple[float, float], ...]
    radii: Tuple[float, ...]
    opacity: float
    brightness: float


@dataclass
class SceneSpec:
    seed: int
    height: int
    width: int
    year: int
    field_centers: List[Tuple[float, float]]
    fields: List[FieldPhenology]
    cloud_events: List[CloudEvent]
    s2_calendar: List[CalendarDate]
    s1_calendar: List[CalendarDate]
    sar_noise_sigma: float = 0.5
    texture_sigma: float = 0.01

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    def validate(self) -> None:
        if self.height <= 0 or self.width <= 0:
            raise ValueError("patch size must be positive")
        if len(self.field_centers) != len(self.fields) or not self.fields:
            raise ValueError("every field needs exactly one center")
        for f in self.fields:
            f.validate()
        for name, cal in (("s2", self.s2_calendar), ("s1", self.s1_calendar)):
            if any(a >= b for a, b in zip(cal, cal[1:])):
                raise ValueError(f"{name} calendar is not strictly increasing")
        for ev in self.cloud_events:
            if not 0.6 <= ev.opacity <= 1.0 or not 0.7 <= ev.brightness <= 0.95:
                raise ValueError(f"cloud event out of range on {ev.date}")
        if self.sar_noise_sigma < 0 or self.texture_sigma < 0:
            raise ValueError("noise levels must be non-negative")

    @functools.cached_property
    def field_map(self) -> npt.NDArray[np.int64]:
        rows, cols = np.mgrid[0:self.height, 0:self.width]
        centers = np.asarray(self.field_centers, dtype=np.float64)
        dist = (rows[None] - centers[:, 0, None, None]) ** 2 + (cols[None] - centers[:, 1, None, None]) ** 2
        return np.argmin(dist, axis=0)

    @functools.cached_property
    def landcover(self) -> npt.NDArray[np.int64]:
        labels = np.array([DYNAMIC_CROP if f.dynamic else STABLE for f in self.fields], dtype=np.int64)
        return labels[self.field_map]

    @functools.cached_property
    def texture(self) -> npt.NDArray[np.float64]:
        rng = np.random.default_rng([self.seed, STREAM_TEXTURE])
        return rng.normal(0.0, self.texture_sigma, size=(len(OPTICAL_BANDS), self.height, self.width))

    @functools.cached_property
    def cloud_index(self) -> Dict[CalendarDate, CloudEvent]:
        return {ev.date: ev for ev in self.cloud_events}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed"           : self.seed,
            "height"         : self.height,
            "width"          : self.width,
            "year"           : self.year,
            "field_centers"  : [list(c) for c in self.field_centers],
            "fields"         : [
                {"b0": f.b0, "amplitude": f.amplitude, "t1": f.t1, "t2": f.t2,
                 "k1": f.k1, "k2": f.k2, "dynamic": f.dynamic} for f in self.fields
            ],
            "cloud_events"   : [
                {"date": ev.date.iso(), "centers": [list(c) for c in ev.centers],
                 "radii": list(ev.radii), "opacity": ev.opacity, "brightness": ev.brightness}
                for ev in self.cloud_events
            ],
            "s2_calendar"    : [d.iso() for d in self.s2_calendar],
            "s1_calendar"    : [d.iso() for d in self.s1_calendar],
            "sar_noise_sigma": self.sar_noise_sigma,
            "texture_sigma"  : self.texture_sigma,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneSpec":
        return cls(
                seed          = int(data["seed"]),
                height        = int(data["height"]),
                width         = int(data["width"]),
                year          = int(data["year"]),
                field_centers = [(float(r), float(c)) for r, c in data["field_centers"]],
                fields        = [FieldPhenology(**f) for f in data["fields"]],
                cloud_events  = [
                    CloudEvent(date       = CalendarDate.from_iso(ev["date"]),
                               centers    = tuple((float(r), float(c)) for r, c in ev["centers"]),
                               radii      = tuple(float(r) for r in ev["radii"]),
                               opacity    = float(ev["opacity"]),
                               brightness = float(ev["brightness"]))
                    for ev in data["cloud_events"]
                ],
                s2_calendar     = [CalendarDate.from_iso(d) for d in data["s2_calendar"]],
                s1_calendar     = [CalendarDate.from_iso(d) for d in data["s1_calendar"]],
                sar_noise_sigma = float(data["sar_noise_sigma"]),
                texture_sigma   = float(data["texture_sigma"]))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class SceneDistribution:
    height: int = 32
    width: int = 32
    year: int = 2024
    n_fields_min: int = 3
    n_fields_max: int = 6
    stable_fraction: float = 0.3
    cloud_probability: float = 0.3
    s2_revisit: int = 5
    s2_dropout: float = 0.2
    s1_revisit: int = 6
    s1_offset: int = 2
    sar_noise_sigma: float = 0.5
    texture_sigma: float = 0.01
    pool_days: int = 70

    def validate(self) -> None:
        if self.height % 4 or self.width % 4 or self.height <= 0 or self.width <= 0:
            raise ValueError("patch size must be a positive multiple of 4")
        if not 1 <= self.n_fields_min <= self.n_fields_max:
            raise ValueError("invalid field count range")
        for name in ("stable_fraction", "cloud_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.s2_dropout < 1.0:
            raise ValueError("s2_dropout must lie in [0, 1)")
        if self.s2_revisit < 1 or self.s1_revisit < 1:
            raise ValueError("revisit intervals must be positive")
        if not 10 <= self.pool_days <= 300:
            raise ValueError("pool_days must lie in [10, 300]")
        # a target needs two optical revisits on either side
        if self.pool_days // 2 < 2 * self.s2_revisit:
            raise ValueError(f"pool_days {self.pool_days} too short for an s2_revisit of {self.s2_revisit} days")


@dataclass
class SarStats:
    mean: Tuple[float, float] = (0.0, 0.0)
    std: Tuple[float, float] = (1.0, 1.0)

    def to_dict(self) -> Dict[str, List[float]]:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SarStats":
        return cls(mean=(float(data["mean"][0]), float(data["mean"][1])),
                   std=(float(data["std"][0]), float(data["std"][1])))


MAX_SEQ_LEN = 8


@dataclass
class MultimodalSample:
    """One model input: windowed acquisitions plus the target they are asked to generate."""
    optical: npt.NDArray[np.float32] = field(repr=False)    # [T_S2, 4, H, W]
    radar: npt.NDArray[np.float32] = field(repr=False)      # [T_S1, 2, H, W]
    optical_dates: List[CalendarDate]
    radar_dates: List[CalendarDate]
    target_date: CalendarDate
    target: Optional[npt.NDArray[np.float32]] = field(repr=False)
    cloud_mask: npt.NDArray[np.bool_] = field(repr=False)   # [T_S2, H, W]
    landcover: npt.NDArray[np.int64] = field(repr=False)
    mode: str = ""
    min_gap: int = 0

    @property
    def steps(self) -> int:
        return len(self.optical_dates) + len(self.radar_dates)

    @property
    def shape_key(self) -> Tuple[int, int]:
        return len(self.optical_dates), len(self.radar_dates)

    def violations(self, max_len: int = MAX_SEQ_LEN) -> List[str]:
        out = []

        if not 1 <= self.steps <= max_len:
            out.append(f"{self.steps} acquisitions, expected 1..{max_len}")
        if self.target_date in self.optical_dates and self.target is not None:
            out.append(f"target date {self.target_date} is among the optical inputs")
        if self.optical.shape[0] != len(self.optical_dates) or self.radar.shape[0] != len(self.radar_dates):
            out.append("acquisition count differs from date count")
        if self.optical.size and (self.optical.min() < 0.0 or self.optical.max() > 1.0):
            out.append("optical reflectance outside [0, 1]")

        return out

    def subset(self, optical_index: Sequence[int], radar_index: Sequence[int]) -> "MultimodalSample":
        oi = sorted(optical_index)
        ri = sorted(radar_index)

        return MultimodalSample(optical=self.optical[oi], radar=self.radar[ri],
                                optical_dates=[self.optical_dates[i] for i in oi],
                                radar_dates=[self.radar_dates[i] for i in ri],
                                target_date=self.target_date, target=self.target,
                                cloud_mask=self.cloud_mask[oi], landcover=self.landcover,
                                mode=self.mode, min_gap=self.min_gap)


#
# Phenology and radiometry
#

def double_logistic(t: npt.ArrayLike, b0: float, amplitude: float,
                    t1: float, t2: float, k1: float, k2: float) -> npt.NDArray[np.float64]:
    t = np.asarray(t, dtype=np.float64)
    rise = scipy.special.expit(k1 * (t - t1))
    fall = scipy.special.expit(k2 * (t - t2))
    return np.asarray(b0 + amplitude * (rise - fall), dtype=np.float64)


def vegetation_signal(spec: SceneSpec, field_index: int, t: CalendarDate) -> float:
    if not 0 <= field_index < spec.n_fields:
        raise ValueError(f"field index {field_index} out of range [0, {spec.n_fields})")

    f = spec.fields[field_index]
    v = double_logistic(float(t.day_of_year), f.b0, f.amplitude, f.t1, f.t2, f.k1, f.k2)

    return float(np.clip(v, 0.0, 1.0))


def vegetation_map(spec: SceneSpec, t: CalendarDate) -> npt.NDArray[np.float64]:
    values = np.array([vegetation_signal(spec, i, t) for i in range(spec.n_fields)])
    return values[spec.field_map]


def band_model(v: npt.ArrayLike) -> npt.NDArray[np.float64]:
    v = np.asarray(v, dtype=np.float64)
    return np.stack([
        0.30 - 0.22 * v,
        0.08 + 0.04 * v,
        0.06 + 0.01 * v,
        0.15 + 0.45 * v,
    ])


def ndvi(nir: npt.ArrayLike, red: npt.ArrayLike, eps: float = 1e-8) -> npt.NDArray[np.float64]:
    nir = np.asarray(nir, dtype=np.float64)
    red = np.asarray(red, dtype=np.float64)
    return np.asarray((nir - red) / (nir + red + eps), dtype=np.float64)


def render_optical(spec: SceneSpec, t: CalendarDate, texture: bool = True) -> npt.NDArray[np.float32]:
    bands = band_model(vegetation_map(spec, t))

    if texture:
        bands = bands + spec.texture

    return np.clip(bands, 0.0, 1.0).astype(np.float32)


def cloud_alpha(spec: SceneSpec, t: CalendarDate) -> npt.NDArray[np.float64]:
    alpha = np.zeros((spec.height, spec.width), dtype=np.float64)
    ev = spec.cloud_index.get(t)

    if ev is None:
        return alpha

    rows, cols = np.mgrid[0:spec.height, 0:spec.width]

    for (r0, c0), radius in zip(ev.centers, ev.radii):
        d2 = ((rows - r0) ** 2 + (cols - c0) ** 2) / (radius ** 2)
        alpha += ev.opacity * np.clip(1.0 - d2, 0.0, None) ** 2

    return np.clip(alpha, 0.0, 1.0)


def blend(clean: npt.ArrayLike, alpha: npt.ArrayLike, brightness: float) -> npt.NDArray[np.float64]:
    clean = np.asarray(clean, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    return np.asarray((1.0 - alpha) * clean + alpha * brightness, dtype=np.float64)


def apply_clouds(clean: npt.ArrayLike, spec: SceneSpec,
                 t: CalendarDate) -> Tuple[npt.NDArray[np.float32], npt.NDArray[np.bool_]]:
    alpha = cloud_alpha(spec, t)
    ev = spec.cloud_index.get(t)

    if ev is None:
        observed = np.asarray(clean, dtype=np.float64)
    else:
        observed = blend(clean, alpha[None], ev.brightness)

    return np.clip(observed, 0.0, 1.0).astype(np.float32), alpha > CLOUD_MASK_THRESHOLD


def render_sar_db(spec: SceneSpec, t: CalendarDate, noise: bool = True) -> npt.NDArray[np.float64]:
    v = vegetation_map(spec, t)
    vv = -14.0 + 4.0 * v
    vh = -22.0 + 8.0 * v
    raw = np.stack([vv, vh])

    if noise and spec.sar_noise_sigma > 0:
        rng = np.random.default_rng([spec.seed, STREAM_SAR, t.days()])
        raw = raw + rng.normal(0.0, spec.sar_noise_sigma, size=raw.shape)

    return raw


def standardize(raw: npt.ArrayLike, stats: SarStats) -> npt.NDArray[np.float64]:
    raw = np.asarray(raw, dtype=np.float64)
    mean = np.asarray(stats.mean).reshape(2, *([1] * (raw.ndim - 1)))
    std = np.asarray(stats.std).reshape(2, *([1] * (raw.ndim - 1)))
    return np.asarray((raw - mean) / std, dtype=np.float64)


def destandardize(values: npt.ArrayLike, stats: SarStats) -> npt.NDArray[np.float64]:
    values = np.asarray(values, dtype=np.float64)
    mean = np.asarray(stats.mean).reshape(2, *([1] * (values.ndim - 1)))
    std = np.asarray(stats.std).reshape(2, *([1] * (values.ndim - 1)))
    return np.asarray(values * std + mean, dtype=np.float64)


def render_sar(spec: SceneSpec, t: CalendarDate, stats: SarStats,
               noise: bool = True) -> npt.NDArray[np.float32]:
    return standardize(render_sar_db(spec, t, noise), stats).astype(np.float32)


#
# Scene sampling
#

def make_calendar(year: int, start: int, revisit: int, dropout: float,
                  rng: Optional[np.random.Generator]) -> List[CalendarDate]:
    dates = []

    for doy in range(start, days_in_year(year) + 1, revisit):
        if rng is not None and dropout > 0 and rng.random() < dropout:
            continue
        dates.append(CalendarDate(year, doy))

    return dates


def sample_field(rng: np.random.Generator, dynamic: bool) -> FieldPhenology:
    b0 = float(rng.uniform(0.0, 0.2))

    if dynamic:
        amplitude = float(rng.uniform(0.4, 0.8))
        t1 = float(rng.uniform(80.0, 160.0))
        t2 = float(rng.uniform(t1 + 60.0, min(t1 + 160.0, 330.0)))
        k1 = float(rng.uniform(0.04, 0.15))
        k2 = float(rng.uniform(0.04, 0.15))
    else:
        amplitude = float(rng.uniform(0.0, 0.05))
        t1 = float(rng.uniform(60.0, 150.0))
        t2 = float(rng.uniform(t1 + 60.0, 330.0))
        k1 = float(rng.uniform(0.02, 0.1))
        k2 = float(rng.uniform(0.02, 0.1))

    return FieldPhenology(b0=b0, amplitude=min(amplitude, 1.0 - b0),
                          t1=t1, t2=t2, k1=k1, k2=k2, dynamic=dynamic)


def sample_cloud(rng: np.random.Generator, date: CalendarDate, height: int, width: int) -> CloudEvent:
    nblobs = int(rng.integers(1, 4))
    size = min(height, width)

    return CloudEvent(
            date       = date,
            centers    = tuple((float(rng.uniform(0, height)), float(rng.uniform(0, width)))
                               for _ in range(nblobs)),
            radii      = tuple(float(rng.uniform(size / 6.0, size / 2.0)) for _ in range(nblobs)),
            opacity    = float(rng.uniform(0.6, 1.0)),
            brightness = float(rng.uniform(0.7, 0.95)))


def sample_scene(dist: SceneDistribution, seed: int) -> SceneSpec:
    rng = np.random.default_rng([seed, STREAM_LAYOUT])

    n_fields = int(rng.integers(dist.n_fields_min, dist.n_fields_max + 1))
    centers = [(float(rng.uniform(0, dist.height)), float(rng.uniform(0, dist.width)))
               for _ in range(n_fields)]
    fields = [sample_field(rng, dynamic=bool(rng.random() >= dist.stable_fraction))
              for _ in range(n_fields)]

    s2_start = int(rng.integers(1, dist.s2_revisit + 1))
    s2 = make_calendar(dist.year, s2_start, dist.s2_revisit, dist.s2_dropout, rng)
    s1 = make_calendar(dist.year, s2_start + dist.s1_offset, dist.s1_revisit, 0.0, None)

    clouds = [sample_cloud(rng, d, dist.height, dist.width)
              for d in s2 if rng.random() < dist.cloud_probability]

    spec = SceneSpec(seed=seed, height=dist.height, width=dist.width, year=dist.year,
                     field_centers=centers, fields=fields, cloud_events=clouds,
                     s2_calendar=s2, s1_calendar=s1,
                     sar_noise_sigma=dist.sar_noise_sigma, texture_sigma=dist.texture_sigma)
    spec.validate()

    return spec


#
# Dataset generation
#

@dataclass
class GeneratedSample:
    index: int
    scene: SceneSpec
    target_date: CalendarDate
    optical_dates: List[CalendarDate]
    radar_dates: List[CalendarDate]
    optical: npt.NDArray[np.float32] = field(repr=False)
    cloud_mask: npt.NDArray[np.bool_] = field(repr=False)
    radar_db: npt.NDArray[np.float64] = field(repr=False)
    target: npt.NDArray[np.float32] = field(repr=False)


def scene_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence([master_seed, index])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def pool_dates(scene: SceneSpec, target: CalendarDate,
               pool_days: int) -> Tuple[List[CalendarDate], List[CalendarDate]]:
    half = pool_days // 2
    lo, hi = target.days() - half, target.days() + half

    optical = [d for d in scene.s2_calendar if lo <= d.days() <= hi and d != target]
    radar = [d for d in scene.s1_calendar if lo <= d.days() <= hi]

    return optical, radar


def choose_target(scene: SceneSpec, dist: SceneDistribution,
                  rng: np.random.Generator) -> Optional[CalendarDate]:
    half = dist.pool_days // 2
    last = days_in_year(scene.year)
    candidates = [d for d in scene.s2_calendar if half < d.day_of_year <= last - half]

    while candidates:
        i = int(rng.integers(0, len(candidates)))
        target = candidates.pop(i)
        optical, _ = pool_dates(scene, target, dist.pool_days)
        before = sum(1 for d in optical if d < target)
        if before >= 1 and len(optical) - before >= 1 and len(optical) >= 3:
            return target

    return None


def generate_sample(dist: SceneDistribution, master_seed: int, index: int,
                    radar_only: bool = False) -> GeneratedSample:
    seed = scene_seed(master_seed, index)

    for _ in range(MAX_RESEEDS):
        scene = sample_scene(dist, seed)
        rng = np.random.default_rng([seed, 7])
        target = choose_target(scene, dist, rng)
        if target is not None:
            break
        seed = scene_seed(seed, index)
    else:
        raise ValueError(f"sample {index}: no usable target date after {MAX_RESEEDS} scenes, "
                         f"optical calendar too sparse for pool_days={dist.pool_days}")

    optical_dates, radar_dates = pool_dates(scene, target, dist.pool_days)
    h, w = scene.height, scene.width

    radar = np.stack([render_sar_db(scene, d) for d in radar_dates]) if radar_dates \
            else np.zeros((0, len(RADAR_BANDS), h, w))

    if radar_only:
        return GeneratedSample(index=index, scene=scene, target_date=target,
                               optical_dates=optical_dates, radar_dates=radar_dates,
                               optical=np.zeros((0, len(OPTICAL_BANDS), h, w), dtype=np.float32),
                               cloud_mask=np.zeros((0, h, w), dtype=np.bool_),
                               radar_db=radar, target=np.zeros((len(OPTICAL_BANDS), h, w), dtype=np.float32))

    observed = []
    masks = []

    for d in optical_dates:
        image, mask = apply_clouds(render_optical(scene, d), scene, d)
        observed.append(image)
        masks.append(mask)

    return GeneratedSample(index=index, scene=scene, target_date=target,
                           optical_dates=optical_dates, radar_dates=radar_dates,
                           optical=np.stack(observed), cloud_mask=np.stack(masks),
                           radar_db=radar, target=render_optical(scene, target))


def _radar_moments(args: Tuple[SceneDistribution, int, int]) -> npt.NDArray[np.float64]:
    dist, master_seed, index = args
    radar = generate_sample(dist, master_seed, index, radar_only=True).radar_db
    flat = radar.transpose(1, 0, 2, 3).reshape(len(RADAR_BANDS), -1)
    return np.stack([np.full(len(RADAR_BANDS), flat.shape[1], dtype=np.float64),
                     flat.sum(axis=1), (flat ** 2).sum(axis=1)])


def _generate(args: Tuple[SceneDistribution, int, int]) -> GeneratedSample:
    return generate_sample(*args)


def split_of(index: int, n_train: int, n_val: int) -> str:
    if index < n_train:
        return "train"
    if index < n_train + n_val:
        return "val"
    return "test"


def make_dataset(dist: SceneDistribution, n_samples: int, out_dir: str,
                 seed: int = 0, n_val: int = 0, n_test: int = 0,
                 workers: int = 1) -> chrono.dataset.Manifest | chrono.Error:
    try:
        dist.validate()
    except ValueError as e:
        return chrono.Error(f"invalid scene distribution: {e}", "bad-config")

    if n_samples < 0 or n_val < 0 or n_test < 0 or n_val + n_test > n_samples:
        return chrono.Error(f"invalid split sizes: {n_samples} samples, {n_val} val, {n_test} test",
                            "bad-config")

    n_train = n_samples - n_val - n_test
    jobs = [(dist, seed, i) for i in range(n_samples)]

    try:
        with _executor(workers) as pool:
            moments = np.zeros((3, len(RADAR_BANDS)), dtype=np.float64)
            for m in pool.map(_radar_moments, jobs):
                moments += m

    except ValueError as e:
        return chrono.Error(f"invalid scene distribution: {e}", "bad-config")

    if moments[0, 0] > 0:
        mean = moments[1] / moments[0]
        std = np.sqrt(np.maximum(moments[2] / moments[0] - mean ** 2, 1e-12))
        stats = SarStats(mean=(float(mean[0]), float(mean[1])), std=(float(std[0]), float(std[1])))
    else:
        stats = SarStats()

    logger.info("radar standardization: mean=%s std=%s", stats.mean, stats.std)

    manifest = chrono.dataset.Manifest(seed=seed, y0=dist.year, sar_stats=stats,
                                       height=dist.height, width=dist.width)

    try:
        os.makedirs(out_dir, mode=0o755, exist_ok=True)

        with _executor(workers) as pool:
            for sample in pool.map(_generate, jobs):
                split = split_of(sample.index, n_train, n_val)
                name = chrono.dataset.sample_name(split, sample.index)
                chrono.dataset.write_sample(os.path.join(out_dir, name), split, sample, stats, seed)
                manifest.splits[split].append(name)

                if (sample.index + 1) % 100 == 0:
                    logger.info("generated %d/%d samples", sample.index + 1, n_samples)

        chrono.dataset.write_manifest(out_dir, manifest)

    except OSError as e:
        return chrono.Error(f"unable to write dataset to {out_dir}: {e}", "io")

    logger.info("dataset written to %s: %s", out_dir,
                ", ".join(f"{k}={len(v)}" for k, v in manifest.splits.items()))

    return manifest


class _SerialExecutor:
    def __enter__(self) -> "_SerialExecutor":
        return self

    def __exit__(self, *args: Any) -> None:
        pass

    def map(self, fn: Any, iterable: Sequence[Any]) -> Any:
        return map(fn, iterable)


def _executor(workers: int) -> Any:
    if workers <= 1:
        return _SerialExecutor()
    return concurrent.futures.ProcessPoolExecutor(max_workers=workers)

