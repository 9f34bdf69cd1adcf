"""Biomechanics of face rectangles, head pose and landmark trajectories."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .signal import (
    LandmarkTrack,
    Modality,
    PoseTrack,
    RectTrack,
    Signal,
    finite_difference,
)

__all__ = [
    "TrajectorySource",
    "Trajectory",
    "KinematicsReport",
    "LDLJ_FORMULA",
    "trajectory_from_rects",
    "trajectory_from_pose",
    "trajectories_from_landmarks",
    "motion_kinematics",
    "relative_motion",
    "report_columns",
    "report_row",
]

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

LDLJ_FORMULA = "speed-normalized: -ln(T^3 / v_peak^2 * trapz(|jerk|^2 dt))"


class TrajectorySource(str, enum.Enum):
    RECT_CENTER = "rect_center"
    POSE_TRANSLATION = "pose_translation"
    POSE_ROTATION = "pose_rotation"
    LANDMARK_POINT = "landmark_point"
    RELATIVE = "relative"


@dataclass(frozen=True, eq=False)
class Trajectory:
    positions: np.ndarray
    fps: float
    source: TrajectorySource
    point_index: int | None = None
    labels: tuple = ()
    caution_2d: bool = False

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2:
            raise ValidationError("trajectory positions must be frames x dims")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise ValidationError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "source", TrajectorySource(self.source))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"d{k}" for k in range(pos.shape[1])))

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def as_signal(self) -> Signal:
        return Signal(self.positions, self.fps, self.labels, Modality.GENERIC)


@dataclass(frozen=True)
class KinematicsReport:
    range_of_motion: tuple
    total_path_length: float
    avg_speed: float
    avg_acceleration: float
    avg_jerk: float
    ldlj: float  # NaN when the trajectory never moves
    duration_s: float
    caution_2d: bool = False

    @property
    def ldlj_defined(self) -> bool:
        return not math.isnan(self.ldlj)

    def compat(self) -> tuple:
        """The four headline values: range, path, speed, acceleration."""
        return self.range_of_motion, self.total_path_length, self.avg_speed, self.avg_acceleration


def trajectory_from_rects(r: RectTrack) -> Trajectory:
    """Track the rectangle center ``(x + w/2, y + h/2)``."""
    b = r.boxes
    if len(b) == 0:
        raise ValidationError("rect track is empty")
    center = np.column_stack([b[:, 0] + b[:, 2] / 2, b[:, 1] + b[:, 3] / 2])
    return Trajectory(center, r.fps, TrajectorySource.RECT_CENTER, labels=("cx", "cy"))


def trajectory_from_pose(p: PoseTrack, angular: bool = False) -> Trajectory:
    if angular:
        return Trajectory(p.rotation, p.fps, TrajectorySource.POSE_ROTATION,
                          labels=("pitch", "yaw", "roll"))
    return Trajectory(p.translation, p.fps, TrajectorySource.POSE_TRANSLATION,
                      labels=("tx", "ty", "tz"))


def trajectories_from_landmarks(l: LandmarkTrack) -> list:
    """One trajectory per landmark point, in template order.

    2-D input is accepted, but each trajectory is flagged ``caution_2d``:
    image-plane landmarks mix head rotation into apparent motion.
    """
    pts = l.points
    caution = l.dim == 2
    axes = "xyz"[:l.dim]
    return [
        Trajectory(pts[:, k, :], l.fps, TrajectorySource.LANDMARK_POINT, point_index=k,
                   labels=tuple(f"p{k}_{a}" for a in axes), caution_2d=caution)
        for k in range(l.n_points)
    ]


def _norms(deriv: Signal) -> np.ndarray:
    return np.linalg.norm(deriv.data, axis=1)


def motion_kinematics(t: Trajectory) -> KinematicsReport:
    """Range, path length, mean speed/acceleration/jerk and LDLJ.

    Derivatives come from :func:`finite_difference`; speed, acceleration
    and jerk magnitudes are Euclidean norms across dimensions, averaged over
    frames. LDLJ integrates squared jerk magnitude with the trapezoidal rule
    and normalizes by duration cubed over squared peak speed.
    """
    n = t.n_frames
    if n < 5:
        raise ValidationError(f"motion kinematics needs at least 5 frames, got {n}")
    pos = t.positions
    sig = t.as_signal()

    rom = tuple(float(v) for v in pos.max(axis=0) - pos.min(axis=0))
    path = float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum())
    speed = _norms(finite_difference(sig, 1))
    acc = _norms(finite_difference(sig, 2))
    jerk = _norms(finite_difference(sig, 3))
    duration = (n - 1) / t.fps

    peak = float(speed.max())
    if peak > 0:
        integral = float(_trapezoid(jerk ** 2, dx=1.0 / t.fps))
        dlj = duration ** 3 / peak ** 2 * integral
        ldlj = -math.log(dlj) if dlj > 0 else math.inf
    else:
        ldlj = math.nan

    return KinematicsReport(
        range_of_motion=rom,
        total_path_length=path,
        avg_speed=float(speed.mean()),
        avg_acceleration=float(acc.mean()),
        avg_jerk=float(jerk.mean()),
        ldlj=ldlj,
        duration_s=duration,
        caution_2d=t.caution_2d,
    )


def relative_motion(t: Trajectory, reference: Trajectory | None = None,
                    first_frame: bool = False) -> Trajectory:
    """Displacement of ``t`` relative to ``reference`` (or to its own first frame)."""
    if first_frame:
        ref = np.broadcast_to(t.positions[:1], t.positions.shape)
    else:
        if reference is None:
            raise ValidationError("relative_motion needs a reference or first_frame=True")
        if reference.fps != t.fps:
            raise ValidationError(f"fps mismatch: {t.fps} vs {reference.fps}")
        if reference.positions.shape != t.positions.shape:
            raise ValidationError(
                f"shape mismatch: {t.positions.shape} vs {reference.positions.shape}"
            )
        ref = reference.positions
    return replace(t, positions=t.positions - ref, source=TrajectorySource.RELATIVE,
                   caution_2d=t.caution_2d or (reference is not None and reference.caution_2d))


def report_columns(dim: int) -> list:
    axes = ["x", "y", "z"][:dim] if dim <= 3 else [str(k) for k in range(dim)]
    return [f"range_{a}" for a in axes] + [
        "path_length", "avg_speed", "avg_acc", "avg_jerk", "ldlj", "duration_s", "caution_2d",
    ]


def report_row(r: KinematicsReport) -> list:
    return list(r.range_of_motion) + [
        r.total_path_length, r.avg_speed, r.avg_acceleration, r.avg_jerk, r.ldlj,
        r.duration_s, float(r.caution_2d),
    ]
