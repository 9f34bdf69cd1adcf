"""Behavioral measurements from standardized facial time series."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BackendError,
    BehaviometryError,
    ConfigurationError,
    ParseError,
    SidecarError,
    ValidationError,
)
from .signal import (  # noqa: E402
    ExpressionTrack,
    LandmarkTrack,
    Modality,
    PoseTrack,
    RectTrack,
    Signal,
    align_pair,
    finite_difference,
)
from .io import convert, read_track, write_track  # noqa: E402
from .kinematics import (  # noqa: E402
    KinematicsReport,
    Trajectory,
    motion_kinematics,
    relative_motion,
    trajectories_from_landmarks,
    trajectory_from_pose,
    trajectory_from_rects,
)
from .expressions import (  # noqa: E402
    MirrorTemplate,
    ScaleSet,
    asymmetry,
    diversity,
    expressivity,
    multiscale_decompose,
)
from .social import XcorrConfig, coordination, imitation, windowed_lagged_xcorr  # noqa: E402
from . import kernels  # noqa: E402

__all__ = [
    "__version__", "BackendError", "BehaviometryError", "ConfigurationError", "ParseError",
    "SidecarError", "ValidationError", "ExpressionTrack", "LandmarkTrack", "Modality",
    "PoseTrack", "RectTrack", "Signal", "align_pair", "finite_difference", "convert",
    "read_track", "write_track", "KinematicsReport", "Trajectory", "motion_kinematics",
    "relative_motion", "trajectories_from_landmarks", "trajectory_from_pose",
    "trajectory_from_rects", "MirrorTemplate", "ScaleSet", "asymmetry", "diversity",
    "expressivity", "multiscale_decompose", "XcorrConfig", "coordination", "imitation",
    "windowed_lagged_xcorr", "kernels",
]
