import numpy as np
import pytest

from scenemix.core import PointCloud, RngStream, derive_stream


@pytest.fixture
def stream():
    """Fresh deterministic stream factory: stream(tag) or stream(tag, scene, epoch)."""
    def make(tag="test", scene_id=0, epoch=0, seed=1234):
        return derive_stream(seed, scene_id, epoch, tag)
    return make


def make_cloud(positions, **kwargs) -> PointCloud:
    return PointCloud(positions=np.asarray(positions, dtype=np.float64), **kwargs)


def uniform_cloud(rng: RngStream, n: int, extent=(4.0, 4.0, 2.5), **kwargs) -> PointCloud:
    from scenemix.core import random_cloud
    return random_cloud(rng, n, extent=extent, **kwargs)
