import math

import numpy as np
import pytest

from uavstate.georef import FrameMapping, GroundControlPoint

FULL_HD = (1920.0, 1080.0)
ALPHA = 0.0334


def rot(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def forward_gcps(alpha, theta, xi, pixels, ids=None):
    """Ground coordinates of ``pixels`` under a known mapping, written out longhand."""
    ids = ids or [f"g{i}" for i in range(len(pixels))]
    out = []
    for gid, p in zip(ids, pixels):
        p = np.asarray(p, dtype=float)
        ltp = rot(theta).T @ (p * alpha) - np.asarray(xi)
        out.append(GroundControlPoint(gid, tuple(ltp), tuple(p)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def identity_mapping():
    return FrameMapping(1.0, 0.0, (0.0, 0.0))
