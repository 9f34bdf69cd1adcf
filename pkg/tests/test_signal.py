import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from behaviometry.errors import ValidationError
from behaviometry.signal import (
    ExpressionTrack,
    LandmarkTrack,
    Modality,
    PoseTrack,
    RectTrack,
    Signal,
    align_pair,
    finite_difference,
    fornberg_weights,
    seconds_to_frames,
)


def sig(x, fps=30.0, **kw):
    x = np.asarray(x, float)
    if x.ndim == 1:
        x = x[:, None]
    return Signal(x, fps, [f"c{k}" for k in range(x.shape[1])], **kw)


class TestSignal:
    def test_data_is_read_only(self):
        s = sig([1, 2, 3])
        with pytest.raises(ValueError):
            s.data[0, 0] = 9

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            Signal(np.zeros((3, 2)), 30, ["a", "a"])

    @pytest.mark.parametrize("fps", [0, -1, math.inf, math.nan])
    def test_bad_fps(self, fps):
        with pytest.raises(ValidationError):
            Signal(np.zeros((3, 1)), fps, ["a"])

    def test_label_count(self):
        with pytest.raises(ValidationError):
            Signal(np.zeros((3, 2)), 30, ["a"])

    def test_select_and_equals(self):
        s = Signal(np.arange(6.0).reshape(3, 2), 10, ["a", "b"])
        assert s.select(["b"]).data[:, 0].tolist() == [1, 3, 5]
        nan = sig([np.nan, 1.0])
        assert nan.equals(sig([np.nan, 1.0]))
        assert not nan.equals(sig([0.0, 1.0]))

    def test_duration(self):
        assert sig(np.zeros(31)).duration_s == pytest.approx(1.0)


class TestViews:
    def test_rect_negative_size_rejected(self):
        with pytest.raises(ValidationError):
            RectTrack.from_arrays([0], [0], [-1], [2], 30)

    def test_rect_confidence_bounds(self):
        with pytest.raises(ValidationError):
            RectTrack.from_arrays([0], [0], [1], [2], 30, confidence=[1.5])

    def test_landmark_point_count_checked(self):
        with pytest.raises(ValidationError):
            LandmarkTrack.from_points(np.zeros((2, 50, 3)), 30, "ibug51")

    def test_landmark_2d_cannot_be_canonical(self):
        with pytest.raises(ValidationError):
            LandmarkTrack.from_points(np.zeros((2, 51, 2)), 30, "ibug51", canonicalized=True)

    def test_landmark_points_roundtrip(self, rng):
        p = rng.standard_normal((4, 51, 3))
        l = LandmarkTrack.from_points(p, 30, "ibug51")
        assert l.signal.n_channels == 153
        np.testing.assert_array_equal(l.points, p)

    def test_pose_requires_six_channels(self):
        with pytest.raises(ValidationError):
            PoseTrack(Signal(np.zeros((3, 5)), 30, list("abcde"), Modality.POSE))

    def test_expression_view(self):
        e = ExpressionTrack.from_array(np.ones((4, 3)), 30)
        assert e.n_coefficients == 3


class TestFiniteDifference:
    def test_constant_is_zero(self):
        d = finite_difference(sig([5, 5, 5, 5, 5], fps=13), 1)
        assert np.all(d.data == 0)

    def test_ramp(self):
        d = finite_difference(sig(np.arange(20.0), fps=30), 1)
        np.testing.assert_allclose(d.data, 30.0, atol=1e-9)

    def test_sine(self):
        n = np.arange(300)
        d = finite_difference(sig(np.sin(2 * np.pi * n / 100), fps=100), 1)
        exact = 2 * np.pi * np.cos(2 * np.pi * n / 100)
        assert np.max(np.abs(d.data[:, 0] - exact)) <= 4e-3

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_polynomials_exact(self, order):
        t = np.arange(40) / 10.0
        x = t ** 3 - 2 * t ** 2 + t
        exact = {1: 3 * t ** 2 - 4 * t + 1, 2: 6 * t - 4, 3: 6 + 0 * t}[order]
        d = finite_difference(sig(x, fps=10), order)
        np.testing.assert_allclose(d.data[:, 0], exact, atol=1e-8)

    def test_too_short(self):
        with pytest.raises(ValidationError):
            finite_difference(sig([1, 2, 3]), 2)

    def test_fornberg_central(self):
        w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
        np.testing.assert_allclose(w[1], [-0.5, 0, 0.5])
        np.testing.assert_allclose(w[2], [1, -2, 1])


class TestAlign:
    def test_equal_unchanged(self):
        a, b = sig(np.zeros(300)), sig(np.ones(300))
        a2, b2 = align_pair(a, b)
        assert a2.n_frames == 300 and not a2.warnings and not b2.warnings

    def test_truncates_with_warning(self):
        a2, b2 = align_pair(sig(np.zeros(310)), sig(np.ones(300)))
        assert a2.n_frames == b2.n_frames == 300
        assert a2.warnings and b2.warnings

    def test_idempotent(self):
        a2, b2 = align_pair(sig(np.zeros(310)), sig(np.ones(300)))
        a3, b3 = align_pair(a2, b2)
        assert a3.warnings == a2.warnings and b3.warnings == b2.warnings

    def test_fps_mismatch(self):
        with pytest.raises(ValidationError):
            align_pair(sig(np.zeros(5), fps=30), sig(np.zeros(5), fps=25))


@given(st.floats(0, 100, allow_nan=False), st.sampled_from([10.0, 25.0, 30.0, 60.0]))
@settings(max_examples=100, deadline=None)
def test_seconds_to_frames_is_nearest(seconds, fps):
    f = seconds_to_frames(seconds, fps)
    assert abs(f - seconds * fps) <= 0.5 + 1e-9


def test_seconds_to_frames_half_up():
    assert seconds_to_frames(0.55, 30) == 17
    assert seconds_to_frames(1.1, 30) == 33
