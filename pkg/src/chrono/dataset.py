# SPDX-License-Identifier: GPL-2.0-or-later
#
# On-disk layout:
#
#   <root>/manifest.json
#   <root>/<split>/<index>/{optical,radar,target,cloudmask,landcover}.mdar
#   <root>/<split>/<index>/meta.json
#

import os
import os.path

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, TYPE_CHECKING

import numpy as np
import numpy.typing as npt

import chrono
import chrono.mdar

if TYPE_CHECKING:
    import chrono.synthscene

logger = chrono.logger

FORMAT  = "chrono-dataset"
VERSION = 1
SPLITS  = ("train", "val", "test")

SAMPLE_FILES = ("optical.mdar", "radar.mdar", "target.mdar",
                "cloudmask.mdar", "landcover.mdar", "meta.json")


@dataclass
class Manifest:
    seed: int
    y0: int
    sar_stats: "chrono.synthscene.SarStats"
    height: int
    width: int
    splits: Dict[str, List[str]] = field(default_factory=lambda: {s: [] for s in SPLITS})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format"   : FORMAT,
            "version"  : VERSION,
            "seed"     : self.seed,
            "y0"       : self.y0,
            "height"   : self.height,
            "width"    : self.width,
            "sar_stats": self.sar_stats.to_dict(),
            "splits"   : self.splits,
        }


@dataclass
class SamplePool:
    """All acquisitions of one scene around a held-out target date."""
    name: str
    split: str
    scene: "chrono.synthscene.SceneSpec"
    target_date: "chrono.synthscene.CalendarDate"
    optical_dates: List["chrono.synthscene.CalendarDate"]
    radar_dates: List["chrono.synthscene.CalendarDate"]
    optical: npt.NDArray[np.float32] = field(repr=False)
    cloud_mask: npt.NDArray[np.bool_] = field(repr=False)
    radar: npt.NDArray[np.float32] = field(repr=False)
    target: npt.NDArray[np.float32] = field(repr=False)
    landcover: npt.NDArray[np.int64] = field(repr=False)


def sample_name(split: str, index: int) -> str:
    return os.path.join(split, f"{index:06d}")


def write_sample(dirname: str, split: str, sample: Any,
                 stats: "chrono.synthscene.SarStats", seed: int) -> None:
    import chrono.synthscene

    os.makedirs(dirname, mode=0o755, exist_ok=True)

    chrono.mdar.write(os.path.join(dirname, "optical.mdar"), sample.optical)
    chrono.mdar.write(os.path.join(dirname, "radar.mdar"),
                      chrono.synthscene.standardize(sample.radar_db, stats))
    chrono.mdar.write(os.path.join(dirname, "target.mdar"), sample.target)
    chrono.mdar.write(os.path.join(dirname, "cloudmask.mdar"), sample.cloud_mask.astype(np.float32))
    chrono.mdar.write(os.path.join(dirname, "landcover.mdar"), sample.scene.landcover.astype(np.float32))

    chrono.write_json(os.path.join(dirname, "meta.json"), {
        "index"        : sample.index,
        "split"        : split,
        "seed"         : seed,
        "scene_seed"   : sample.scene.seed,
        "spec_hash"    : sample.scene.digest(),
        "scene"        : sample.scene.to_dict(),
        "target_date"  : sample.target_date.iso(),
        "optical_dates": [d.iso() for d in sample.optical_dates],
        "radar_dates"  : [d.iso() for d in sample.radar_dates],
    })


def write_manifest(root: str, manifest: Manifest) -> None:
    chrono.write_json(os.path.join(root, "manifest.json"), manifest.to_dict())


def read_manifest(root: str) -> Manifest | chrono.Error:
    import chrono.synthscene

    data = chrono.read_json(os.path.join(root, "manifest.json"))

    if isinstance(data, chrono.Error):
        return data

    if data.get("format") != FORMAT or data.get("version") != VERSION:
        return chrono.Error(f"{root}: not a dataset of version {VERSION}", "bad-dataset")

    try:
        return Manifest(seed=int(data["seed"]), y0=int(data["y0"]),
                        sar_stats=chrono.synthscene.SarStats.from_dict(data["sar_stats"]),
                        height=int(data["height"]), width=int(data["width"]),
                        splits={s: list(data["splits"].get(s, [])) for s in SPLITS})
    except (KeyError, TypeError, ValueError) as e:
        return chrono.Error(f"{root}: malformed manifest: {e}", "bad-dataset")


def read_sample(root: str, name: str) -> SamplePool | chrono.Error:
    import chrono.synthscene

    dirname = os.path.join(root, name)
    meta = chrono.read_json(os.path.join(dirname, "meta.json"))

    if isinstance(meta, chrono.Error):
        return meta

    arrays: Dict[str, npt.NDArray[np.float32]] = {}

    for fname in SAMPLE_FILES[:-1]:
        value = chrono.mdar.read(os.path.join(dirname, fname))
        if isinstance(value, chrono.Error):
            return value
        arrays[fname[:-len(".mdar")]] = value

    try:
        scene = chrono.synthscene.SceneSpec.from_dict(meta["scene"])
        optical_dates = [chrono.synthscene.CalendarDate.from_iso(d) for d in meta["optical_dates"]]
        radar_dates = [chrono.synthscene.CalendarDate.from_iso(d) for d in meta["radar_dates"]]
        target_date = chrono.synthscene.CalendarDate.from_iso(meta["target_date"])
    except (KeyError, TypeError, ValueError) as e:
        return chrono.Error(f"{dirname}: malformed meta.json: {e}", "bad-dataset")

    h, w = scene.height, scene.width

    if arrays["optical"].shape != (len(optical_dates), 4, h, w) or \
       arrays["radar"].reshape(-1, 2, h, w).shape[0] != len(radar_dates):
        return chrono.Error(f"{dirname}: arrays do not match meta.json", "bad-dataset")

    return SamplePool(name=name, split=str(meta["split"]), scene=scene,
                      target_date=target_date, optical_dates=optical_dates, radar_dates=radar_dates,
                      optical=arrays["optical"],
                      cloud_mask=arrays["cloudmask"].reshape(len(optical_dates), h, w) > 0.5,
                      radar=arrays["radar"].reshape(len(radar_dates), 2, h, w),
                      target=arrays["target"],
                      landcover=arrays["landcover"].astype(np.int64))


class Split:
    """Lazy, ordered access to the samples of one split."""

    def __init__(self, root: str, manifest: Manifest, split: str):
        self.root     = root
        self.manifest = manifest
        self.split    = split
        self.names    = list(manifest.splits.get(split, []))

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, i: int) -> SamplePool:
        sample = read_sample(self.root, self.names[i])
        if isinstance(sample, chrono.Error):
            raise OSError(sample.message)
        return sample

    def __iter__(self) -> Iterator[SamplePool]:
        for i in range(len(self)):
            yield self[i]


def open_split(root: str, split: str) -> Split | chrono.Error:
    if split not in SPLITS:
        return chrono.Error(f"unknown split: {split}", "bad-argument")

    manifest = read_manifest(root)

    if isinstance(manifest, chrono.Error):
        return manifest

    return Split(root, manifest, split)
