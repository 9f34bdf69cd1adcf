import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from behaviometry.io import write_track  # noqa: E402
from behaviometry.signal import ExpressionTrack, LandmarkTrack, PoseTrack  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240718)


@pytest.fixture
def fixture_tracks(tmp_path):
    """Pose, expression and 3-D landmark tracks written as canonical CSV."""
    rng = np.random.default_rng(7)
    n, fps = 300, 30.0
    t = np.arange(n) / fps
    rot = np.c_[0.1 * np.sin(t), 0.2 * np.sin(0.7 * t), 0.05 * np.cos(t)]
    tr = np.c_[np.sin(t), np.cos(t), 0.5 * t]
    expr = np.cumsum(rng.standard_normal((n, 6)), axis=0) * 0.1
    pts = rng.standard_normal((n, 51, 3))
    paths = {
        "pose": tmp_path / "pose.csv",
        "expr": tmp_path / "expr.csv",
        "expr_b": tmp_path / "partner.csv",
        "landmarks": tmp_path / "lm.csv",
    }
    write_track(PoseTrack.from_arrays(rot, tr, fps).signal, paths["pose"])
    write_track(ExpressionTrack.from_array(expr, fps).signal, paths["expr"])
    write_track(ExpressionTrack.from_array(np.roll(expr, 4, axis=0), fps).signal,
                paths["expr_b"])
    write_track(LandmarkTrack.from_points(pts, fps, "ibug51").signal, paths["landmarks"])
    return paths
