from __future__ import annotations

import numpy as np
import pytest

from rvoskit.dataset import load_dataset
from rvoskit.synth import SynthSpec, generate_dataset


@pytest.fixture
def make_dataset(tmp_path):
    """Factory generating a synthetic dataset tree and loading its index."""

    def _make(name="data", **spec_kwargs):
        spec = SynthSpec(**spec_kwargs)
        root = generate_dataset(tmp_path / name, spec)
        return load_dataset(root, "valid")

    return _make


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A shared read-only dataset: 4 videos x 2 expressions, one marker each."""
    root = generate_dataset(
        tmp_path_factory.mktemp("small"),
        SynthSpec(videos=4, expressions_per_video=2, absent_per_video=1,
                  frames=6, height=48, width=64, seed=11),
    )
    return load_dataset(root, "valid")


def random_grid(rng: np.random.Generator, max_side: int = 24) -> np.ndarray:
    """Random mask grid mixing noise, rectangles, and degenerate cases."""
    height = int(rng.integers(1, max_side + 1))
    width = int(rng.integers(1, max_side + 1))
    kind = rng.integers(0, 4)
    if kind == 0:
        return np.zeros((height, width), dtype=bool)
    if kind == 1:
        return np.ones((height, width), dtype=bool)
    if kind == 2:
        grid = np.zeros((height, width), dtype=bool)
        y0 = int(rng.integers(0, height))
        x0 = int(rng.integers(0, width))
        y1 = int(rng.integers(y0, height)) + 1
        x1 = int(rng.integers(x0, width)) + 1
        grid[y0:y1, x0:x1] = True
        return grid
    density = float(rng.uniform(0.05, 0.95))
    return rng.random((height, width)) < density
