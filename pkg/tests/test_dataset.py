# SPDX-License-Identifier: GPL-2.0-or-later

import os

import numpy as np
import pytest

import chrono
import chrono.dataset
import chrono.synthscene
import chrono.training

from chrono.synthscene import SceneDistribution


def tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for fname in files:
            path = os.path.join(dirpath, fname)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_empty_dataset(tmp_path):
    manifest = chrono.synthscene.make_dataset(SceneDistribution(height=8, width=8), 0, str(tmp_path))

    assert not isinstance(manifest, chrono.Error)
    assert all(not names for names in manifest.splits.values())

    split = chrono.dataset.open_split(str(tmp_path), "test")
    assert not isinstance(split, chrono.Error) and len(split) == 0


def test_bad_split_sizes(tmp_path):
    ret = chrono.synthscene.make_dataset(SceneDistribution(height=8, width=8), 2, str(tmp_path), n_val=2, n_test=1)
    assert isinstance(ret, chrono.Error) and ret.kind == "bad-config"


def test_generation_is_deterministic(tmp_path):
    dist = SceneDistribution(height=8, width=8)

    for name in ("a", "b"):
        ret = chrono.synthscene.make_dataset(dist, 3, str(tmp_path / name), seed=17, n_test=1)
        assert not isinstance(ret, chrono.Error)

    assert tree(str(tmp_path / "a")) == tree(str(tmp_path / "b"))


def test_parallel_generation_matches_serial(tmp_path):
    dist = SceneDistribution(height=8, width=8)

    chrono.synthscene.make_dataset(dist, 3, str(tmp_path / "serial"), seed=4, workers=1)
    chrono.synthscene.make_dataset(dist, 3, str(tmp_path / "parallel"), seed=4, workers=2)

    assert tree(str(tmp_path / "serial")) == tree(str(tmp_path / "parallel"))


def test_sample_files_and_dates(tiny_dataset):
    manifest = chrono.dataset.read_manifest(tiny_dataset)
    assert not isinstance(manifest, chrono.Error)

    name = manifest.splits["train"][0]
    for fname in chrono.dataset.SAMPLE_FILES:
        assert os.path.exists(os.path.join(tiny_dataset, name, fname))

    pool = chrono.dataset.read_sample(tiny_dataset, name)
    assert not isinstance(pool, chrono.Error)

    index = int(os.path.basename(name))
    generated = chrono.synthscene.generate_sample(SceneDistribution(height=8, width=8), manifest.seed, index)

    assert pool.optical_dates == generated.optical_dates
    assert pool.radar_dates == generated.radar_dates
    assert pool.target_date == generated.target_date
    assert np.array_equal(pool.optical, generated.optical)
    assert np.array_equal(pool.target, generated.target)


def test_splits_are_disjoint(tiny_dataset):
    manifest = chrono.dataset.read_manifest(tiny_dataset)
    assert not isinstance(manifest, chrono.Error)

    names = [n for split in chrono.dataset.SPLITS for n in manifest.splits[split]]

    assert len(names) == len(set(names)) == 10
    assert (len(manifest.splits["val"]), len(manifest.splits["test"])) == (2, 3)


def test_radar_is_standardized(tiny_dataset):
    manifest = chrono.dataset.read_manifest(tiny_dataset)
    assert not isinstance(manifest, chrono.Error)

    radar = np.concatenate([chrono.dataset.read_sample(tiny_dataset, n).radar
                            for split in chrono.dataset.SPLITS for n in manifest.splits[split]])
    flat = radar.transpose(1, 0, 2, 3).reshape(2, -1).astype(np.float64)

    assert flat.mean(axis=1) == pytest.approx([0.0, 0.0], abs=1e-3)
    assert flat.std(axis=1) == pytest.approx([1.0, 1.0], abs=1e-2)


def test_corrupt_sample(tiny_dataset, tmp_path):
    manifest = chrono.dataset.read_manifest(tiny_dataset)
    assert not isinstance(manifest, chrono.Error)

    name = manifest.splits["test"][0]
    os.makedirs(tmp_path / name)

    for fname in chrono.dataset.SAMPLE_FILES:
        with open(os.path.join(tiny_dataset, name, fname), "rb") as src:
            data = src.read()
        if fname == "optical.mdar":
            data = data[:-3]
        with open(tmp_path / name / fname, "wb") as dst:
            dst.write(data)

    ret = chrono.dataset.read_sample(str(tmp_path), name)
    assert isinstance(ret, chrono.Error)


def test_unknown_split(tiny_dataset):
    ret = chrono.dataset.open_split(tiny_dataset, "holdout")
    assert isinstance(ret, chrono.Error) and ret.kind == "bad-argument"


def test_windows_from_pools_respect_sequence_limit(tiny_dataset):
    pools = list(chrono.dataset.open_split(tiny_dataset, "train"))

    assert any(len(p.optical_dates) + len(p.radar_dates) > chrono.synthscene.MAX_SEQ_LEN for p in pools)

    for pool in pools:
        for mode in (chrono.training.INTERPOLATION, chrono.training.EXTRAPOLATION):
            sample = chrono.training.window_inputs(pool, mode, 0)
            assert sample is not None
            assert sample.steps <= chrono.synthscene.MAX_SEQ_LEN
