# SPDX-License-Identifier: GPL-2.0-or-later

import os
import sys

from typing import Callable, List, Optional

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "src"))

import chrono
import chrono.dataset
import chrono.model
import chrono.synthscene
import chrono.training

from chrono.synthscene import CalendarDate, MultimodalSample, SceneDistribution


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the desk-scale acceptance tests.")


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: desk-scale run, only with --runslow")


def pytest_collection_modifyitems(config: pytest.Config, items: List[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return

    skip = pytest.mark.skip(reason="needs --runslow")

    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


TINY_MODEL = chrono.model.ModelConfig(d_feat=8, d_time=6, encoder_hidden=8, spp_scales=(1, 2),
                                      n_layers=2, n_heads=2, ff_expansion=1, decoder_hidden=8)


@pytest.fixture
def tiny_dist() -> SceneDistribution:
    return SceneDistribution(height=8, width=8)


@pytest.fixture
def tiny_scene(tiny_dist: SceneDistribution) -> chrono.synthscene.SceneSpec:
    return chrono.synthscene.sample_scene(tiny_dist, 1234)


@pytest.fixture
def tiny_model_cfg() -> chrono.model.ModelConfig:
    return TINY_MODEL


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory: pytest.TempPathFactory) -> str:
    root = str(tmp_path_factory.mktemp("dataset"))
    manifest = chrono.synthscene.make_dataset(SceneDistribution(height=8, width=8), 10, root,
                                              seed=3, n_val=2, n_test=3)
    assert not isinstance(manifest, chrono.Error)
    return root


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_dataset: str) -> chrono.training.Checkpoint:
    train = chrono.dataset.open_split(tiny_dataset, "train")
    val = chrono.dataset.open_split(tiny_dataset, "val")
    assert not isinstance(train, chrono.Error) and not isinstance(val, chrono.Error)

    cfg = chrono.training.TrainConfig(epochs=1, batch_size=4, seed=5, val_min_gap_days=0)

    return chrono.training.train(train, val, cfg, TINY_MODEL, train.manifest.y0, train.manifest.sar_stats)


@pytest.fixture
def make_sample() -> Callable[..., MultimodalSample]:
    """Builds a random sample with optical and radar acquisitions at given day offsets."""

    def build(optical_days: List[int], radar_days: List[int], target_day: int = 150,
              size: int = 8, seed: int = 0, target: Optional[bool] = True,
              year: int = 2024) -> MultimodalSample:
        rng = np.random.default_rng(seed)
        n_opt, n_sar = len(optical_days), len(radar_days)

        return MultimodalSample(
                optical       = rng.uniform(0, 1, size=(n_opt, 4, size, size)).astype(np.float32),
                radar         = rng.normal(0, 1, size=(n_sar, 2, size, size)).astype(np.float32),
                optical_dates = [CalendarDate(year, d) for d in optical_days],
                radar_dates   = [CalendarDate(year, d) for d in radar_days],
                target_date   = CalendarDate(year, target_day),
                target        = rng.uniform(0, 1, size=(4, size, size)).astype(np.float32) if target else None,
                cloud_mask    = np.zeros((n_opt, size, size), dtype=np.bool_),
                landcover     = (rng.random((size, size)) < 0.5).astype(np.int64))

    return build
