# SPDX-License-Identifier: GPL-2.0-or-later
#
# Presentation only. Every function is a no-op returning None when
# matplotlib is not installed.
#

from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

import chrono
import chrono.evaluation

if chrono.HAVE_MATPLOTLIB:
    import matplotlib.pyplot as plt

logger = chrono.logger


def unavailable() -> bool:
    if chrono.HAVE_MATPLOTLIB:
        return False
    logger.warning("matplotlib is not installed, plots are skipped")
    return True


def calibration_curve(curve: chrono.evaluation.CalibrationCurve, filename: str) -> Optional[str]:
    if unavailable():
        return None

    bands = ("red", "green", "blue", "nir")
    band_coverage = np.asarray(curve.band_coverage)

    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot([0, 1], [0, 1], color="grey", linestyle="--", linewidth=1)
    for i, name in enumerate(bands[:band_coverage.shape[1]]):
        ax.plot(curve.levels, band_coverage[:, i], marker=".", linewidth=1, label=name)
    ax.plot(curve.levels, curve.coverage, color="black", marker="o", label="all")
    ax.set_xlabel("nominal level")
    ax.set_ylabel("empirical coverage")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(filename, dpi=120)
    plt.close(fig)

    return filename


def ndvi_series(result: chrono.evaluation.DensifyResult, filename: str,
                pixel: Optional[Sequence[int]] = None) -> Optional[str]:
    """Patch-mean NDVI (or one pixel) with its band and the ground truth."""
    if unavailable():
        return None

    series = result.ndvi
    days = [d.day_of_year for d in result.dates]

    def reduce(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        if pixel is not None:
            return values[:, pixel[0], pixel[1]]
        return values.mean(axis=(1, 2))

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.fill_between(days, reduce(series.lower), reduce(series.upper), alpha=0.3,
                    label=f"{series.level:.0%} band")
    ax.plot(days, reduce(series.predicted), label="predicted")
    if series.truth is not None:
        ax.plot(days, reduce(series.truth), color="black", linestyle="--", label="truth")
    ax.plot(days, reduce(result.baseline_ndvi), color="grey", linewidth=1, label="linear baseline")
    ax.set_xlabel("day of year")
    ax.set_ylabel("NDVI")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(filename, dpi=120)
    plt.close(fig)

    return filename


def attention_summary(summary: npt.NDArray[np.float64], labels: Sequence[str],
                      filename: str) -> Optional[str]:
    """Heat map of mean attention, one row per layer and head."""
    if unavailable():
        return None

    layers, heads, _ = summary.shape
    rows = summary.reshape(layers * heads, -1)

    fig, ax = plt.subplots(figsize=(1 + 0.6 * len(labels), 1 + 0.3 * len(rows)))
    image = ax.imshow(rows, aspect="auto", cmap="viridis", vmin=0.0)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([f"L{l}H{h}" for l in range(layers) for h in range(heads)], fontsize=7)
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    fig.savefig(filename, dpi=120)
    plt.close(fig)

    return filename
