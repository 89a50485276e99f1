import numpy as np
import pytest

from sard import dataset
from sard.grid import ImageGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid(rng):
    return ImageGrid(rng.random((1, 24, 32), dtype=np.float32))


@pytest.fixture
def tiny_archive(tmp_path):
    """21-sample synthetic archive; splits land on 16/4/1."""
    return dataset.build_synthetic_archive(
        tmp_path / "arch", count=21, size=32, looks=4, seed=7, clip_p=90.0
    )
