import math

import numpy as np
import pytest

import oracles
from behaviometry.errors import ValidationError
from behaviometry.kinematics import (
    Trajectory,
    TrajectorySource,
    motion_kinematics,
    relative_motion,
    report_columns,
    report_row,
    trajectories_from_landmarks,
    trajectory_from_pose,
    trajectory_from_rects,
)
from behaviometry.signal import LandmarkTrack, PoseTrack, RectTrack

SRC = TrajectorySource.LANDMARK_POINT


def traj(x, fps=30.0):
    return Trajectory(np.asarray(x, float), fps, SRC)


def test_rect_center():
    r = RectTrack.from_arrays([10], [20], [4], [6], 30)
    np.testing.assert_array_equal(trajectory_from_rects(r).positions, [[12, 23]])


def test_rect_translation_constant_step():
    n = 10
    r = RectTrack.from_arrays(np.arange(n), np.zeros(n), np.full(n, 4), np.full(n, 4), 30)
    steps = np.diff(trajectory_from_rects(r).positions, axis=0)
    np.testing.assert_array_equal(steps, np.tile([1.0, 0.0], (n - 1, 1)))


def test_pose_static_and_channel_order():
    rot = np.tile([0.1, 0.2, 0.3], (6, 1))
    p = PoseTrack.from_arrays(rot, np.tile([1.0, 2.0, 3.0], (6, 1)), 30)
    assert np.all(trajectory_from_pose(p).positions == [1, 2, 3])
    ang = trajectory_from_pose(p, angular=True)
    assert ang.labels == ("pitch", "yaw", "roll")
    np.testing.assert_array_equal(ang.positions[0], [0.1, 0.2, 0.3])


def test_angular_speed():
    n = 30
    rot = np.c_[np.zeros(n), 0.1 * np.arange(n), np.zeros(n)]
    p = PoseTrack.from_arrays(rot, np.zeros((n, 3)), 30)
    r = motion_kinematics(trajectory_from_pose(p, angular=True))
    assert r.avg_speed == pytest.approx(3.0, abs=1e-9)


def test_landmark_trajectories(rng):
    frozen = np.repeat(rng.standard_normal((1, 51, 3)), 8, axis=0)
    trajs = trajectories_from_landmarks(LandmarkTrack.from_points(frozen, 30, "ibug51"))
    assert len(trajs) == 51
    assert all(np.ptp(t.positions, axis=0).max() == 0 for t in trajs)


def test_landmark_2d_caution(rng):
    l = LandmarkTrack.from_points(rng.standard_normal((8, 51, 2)), 30, "ibug51")
    trajs = trajectories_from_landmarks(l)
    assert all(t.caution_2d for t in trajs)
    assert motion_kinematics(trajs[0]).caution_2d


def test_stationary():
    r = motion_kinematics(traj(np.full((20, 3), 4.2)))
    assert r.range_of_motion == (0.0, 0.0, 0.0)
    assert (r.total_path_length, r.avg_speed, r.avg_acceleration, r.avg_jerk) == (0, 0, 0, 0)
    assert math.isnan(r.ldlj) and not r.ldlj_defined


def test_constant_velocity():
    r = motion_kinematics(traj(2.0 * np.arange(31)))
    assert r.range_of_motion[0] == pytest.approx(60, abs=1e-12)
    assert r.total_path_length == pytest.approx(60, abs=1e-12)
    assert r.avg_speed == pytest.approx(60, abs=1e-9)
    assert r.avg_acceleration == pytest.approx(0, abs=1e-9)
    assert r.duration_s == pytest.approx(1.0)


def test_min_jerk_ldlj_oracle():
    t = np.arange(101) / 100
    r = motion_kinematics(traj(10 * t ** 3 - 15 * t ** 4 + 6 * t ** 5, fps=100))
    assert abs(r.ldlj - oracles.min_jerk_ldlj()) <= 1e-3


def test_oracle_matches_closed_form():
    assert oracles.min_jerk_ldlj() == pytest.approx(oracles.min_jerk_ldlj_exact(), abs=1e-9)


def test_path_at_least_range_1d(rng):
    x = rng.standard_normal(50).cumsum()
    r = motion_kinematics(traj(x))
    assert r.total_path_length >= r.range_of_motion[0]
    mono = motion_kinematics(traj(np.cumsum(np.abs(x))))
    assert mono.total_path_length == pytest.approx(mono.range_of_motion[0], rel=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 2.0, 8.0])
def test_invariances(rng, alpha):
    x = rng.standard_normal((80, 2)).cumsum(axis=0)
    base = motion_kinematics(traj(x))
    shifted = motion_kinematics(traj(x + [100.0, -50.0]))
    scaled = motion_kinematics(traj(alpha * x))
    assert abs(shifted.ldlj - base.ldlj) <= 1e-9
    assert abs(shifted.avg_speed - base.avg_speed) <= 1e-9
    assert abs(scaled.ldlj - base.ldlj) <= 1e-9


def test_too_short():
    with pytest.raises(ValidationError):
        motion_kinematics(traj(np.arange(4.0)))


def test_relative_motion():
    a = traj(np.c_[np.arange(6.0), np.arange(6.0)])
    assert np.all(relative_motion(a, a).positions == 0)
    off = traj(a.positions + [3, 4])
    np.testing.assert_array_equal(relative_motion(off, a).positions, np.tile([3, 4], (6, 1)))
    ff = relative_motion(traj(np.arange(5.0)), first_frame=True)
    assert ff.positions[:, 0].tolist() == [0, 1, 2, 3, 4]


def test_relative_motion_mismatch():
    with pytest.raises(ValidationError):
        relative_motion(traj(np.zeros(5)), traj(np.zeros(6)))
    with pytest.raises(ValidationError):
        relative_motion(traj(np.zeros(5)))


def test_report_row_layout():
    r = motion_kinematics(traj(np.c_[np.arange(10.0), np.zeros(10)]))
    assert len(report_row(r)) == len(report_columns(2))
    assert report_columns(3)[:3] == ["range_x", "range_y", "range_z"]
