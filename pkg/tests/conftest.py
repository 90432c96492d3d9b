import logging

import numpy as np
import pytest
from hypothesis import settings

# fixed example sequence so every run checks the same cases
settings.register_profile("default", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="clusterdrift")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(rng, centers, sizes, std=1.0):
    """Isotropic Gaussian blobs, rows interleaved."""
    X = np.vstack([rng.normal(c, std, size=(m, len(c))) for c, m in zip(centers, sizes)])
    y = np.concatenate([np.full(m, i) for i, m in enumerate(sizes)])
    order = rng.permutation(len(X))
    return X[order], y[order]
