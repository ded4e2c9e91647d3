import numpy as np
import pytest

from corp import FeatureGroup, MapGroup


def random_feature_group(rng, n=2, d=6, h=5, w=5, dtype=np.float32) -> FeatureGroup:
    """Random unit-norm feature group."""
    raw = rng.standard_normal((n, d, h, w)).astype(dtype)
    return FeatureGroup.from_tensors(list(raw), normalize=True)


def random_map_group(rng, n=2, h=5, w=5) -> MapGroup:
    return MapGroup(rng.random((n, h, w)).astype(np.float32))


def random_binary_group(rng, n=2, h=8, w=8, fg_prob=0.4) -> MapGroup:
    """Random binary maps, re-rolled until every image has both classes."""
    maps = np.empty((n, h, w), dtype=np.float32)
    for i in range(n):
        while True:
            m = (rng.random((h, w)) < fg_prob).astype(np.float32)
            if 0 < m.sum() < h * w:
                maps[i] = m
                break
    return MapGroup(maps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
