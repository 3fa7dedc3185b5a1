"""Shared fixtures: synthetic multi-label data and optional real-dataset discovery."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from fmlfs import MultiLabelDataset


def make_synthetic(n: int, d: int, num_labels: int, seed: int = 0,
                   informative: int | None = None) -> MultiLabelDataset:
    """Random dataset where the first `informative` features carry label signal.

    Labels are thresholded noisy combinations of the informative features, so
    feature selection has real structure to find; the remaining features are
    pure noise.
    """
    rng = np.random.default_rng(seed)
    informative = informative if informative is not None else max(d // 5, 1)
    features = rng.normal(size=(n, d))
    labels = np.zeros((n, num_labels), dtype=np.int8)
    for l in range(num_labels):
        weights = rng.normal(size=informative)
        signal = features[:, :informative] @ weights + 0.5 * rng.normal(size=n)
        labels[:, l] = (signal > np.quantile(signal, 0.7)).astype(np.int8)
    # guarantee every instance that would be all-zero still appears sometimes;
    # leave them in place: empty label vectors are part of the contract
    return MultiLabelDataset(
        features=features,
        labels=labels,
        feature_names=[f"f{i}" for i in range(d)],
        label_names=[f"l{i}" for i in range(num_labels)],
    )


def find_dataset(stem: str) -> Path | None:
    """Locate a real ARFF (e.g. yeast/scene) under FMLFS_DATA_DIR or ./data."""
    candidates = []
    env = os.environ.get("FMLFS_DATA_DIR")
    if env:
        candidates.append(Path(env))
    candidates += [Path(__file__).resolve().parent.parent / "data", Path("data")]
    for base in candidates:
        path = base / f"{stem}.arff"
        if path.is_file():
            return path
    return None


def require_dataset(stem: str) -> Path:
    path = find_dataset(stem)
    if path is None:
        pytest.skip(
            f"{stem}.arff not available: place it under ./data or set FMLFS_DATA_DIR "
            "(Mulan repository download; not bundled)"
        )
    return path


@pytest.fixture
def tiny_dataset() -> MultiLabelDataset:
    return make_synthetic(40, 6, 3, seed=7, informative=3)
