"""Canonical in-memory time series and the differentiation primitive.

Every measurement routine consumes a :class:`Signal` (frames x channels at a
fixed sampling rate) or one of the modality views built on top of it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "Modality",
    "Signal",
    "RectTrack",
    "LandmarkTrack",
    "PoseTrack",
    "ExpressionTrack",
    "TEMPLATE_POINTS",
    "POSE_LABELS",
    "RECT_LABELS",
    "finite_difference",
    "fornberg_weights",
    "align_pair",
    "seconds_to_frames",
]


class Modality(str, enum.Enum):
    RECTS = "rects"
    LANDMARKS2D = "landmarks2d"
    LANDMARKS3D = "landmarks3d"
    POSE = "pose"
    EXPRESSIONS = "expressions"
    GENERIC = "generic"


# point counts of the landmark templates we know about
TEMPLATE_POINTS = {"ibug51": 51, "ibug68": 68}

POSE_LABELS = ("pitch", "yaw", "roll", "tx", "ty", "tz")
RECT_LABELS = ("x", "y", "w", "h")


@dataclass(frozen=True, eq=False)
class Signal:
    """Multichannel frame-indexed time series.

    ``data`` is stored as a read-only float64 array of shape
    ``(frames, channels)``. Construction validates the invariants; instances
    are never mutated afterwards.
    """

    data: np.ndarray
    fps: float
    channel_labels: tuple
    modality: Modality = Modality.GENERIC
    units: Mapping[str, str] = field(default_factory=dict)
    template_id: str | None = None
    basis_id: str | None = None
    source_backend: str | None = None
    warnings: tuple = ()

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValidationError(f"signal data must be 2-D (frames x channels), got {data.ndim}-D")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

        fps = float(self.fps)
        if not math.isfinite(fps) or fps <= 0:
            raise ValidationError(f"fps must be positive and finite, got {self.fps!r}")
        object.__setattr__(self, "fps", fps)

        labels = tuple(str(c) for c in self.channel_labels)
        if len(labels) != data.shape[1]:
            raise ValidationError(
                f"{len(labels)} channel labels for {data.shape[1]} data columns"
            )
        if len(set(labels)) != len(labels):
            dupes = sorted({c for c in labels if labels.count(c) > 1})
            raise ValidationError(f"duplicate channel labels: {dupes}")
        object.__setattr__(self, "channel_labels", labels)
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "units", dict(self.units))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return max(self.n_frames - 1, 0) / self.fps

    def with_data(self, data, **changes) -> "Signal":
        """Copy of this signal with new data (same shape unless labels change)."""
        return replace(self, data=data, **changes)

    def select(self, labels: Sequence[str]) -> "Signal":
        idx = [self.channel_labels.index(c) for c in labels]
        return replace(self, data=self.data[:, idx], channel_labels=tuple(labels))

    def equals(self, other: "Signal") -> bool:
        """Bit-exact equality of values and header fields (NaN equals NaN)."""
        return (
            isinstance(other, Signal)
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data, equal_nan=True)
            and self.fps == other.fps
            and self.channel_labels == other.channel_labels
            and self.modality == other.modality
            and dict(self.units) == dict(other.units)
            and self.template_id == other.template_id
            and self.basis_id == other.basis_id
            and self.source_backend == other.source_backend
        )


def _require_modality(signal: Signal, *allowed: Modality) -> None:
    if signal.modality not in allowed:
        names = ", ".join(m.value for m in allowed)
        raise ValidationError(f"expected modality {names}, got {signal.modality.value}")


@dataclass(frozen=True, eq=False)
class RectTrack:
    """Face rectangles: top-left ``x, y`` and size ``w, h`` in pixels."""

    signal: Signal

    def __post_init__(self):
        s = self.signal
        _require_modality(s, Modality.RECTS)
        if s.channel_labels[:4] != RECT_LABELS or s.n_channels not in (4, 5):
            raise ValidationError(
                f"rect track needs channels {RECT_LABELS} (+ optional confidence), "
                f"got {s.channel_labels}"
            )
        if s.n_channels == 5 and s.channel_labels[4] != "confidence":
            raise ValidationError("fifth rect channel must be 'confidence'")
        wh = s.data[:, 2:4]
        if np.any(wh < 0):
            frame = int(np.argwhere(wh < 0)[0, 0])
            raise ValidationError(f"negative rectangle size at frame {frame}")
        if s.n_channels == 5:
            conf = s.data[:, 4]
            if np.any((conf < 0) | (conf > 1)):
                raise ValidationError("rect confidence must lie in [0, 1]")

    @classmethod
    def from_arrays(cls, x, y, w, h, fps, confidence=None) -> "RectTrack":
        cols = [x, y, w, h]
        labels = list(RECT_LABELS)
        if confidence is not None:
            cols.append(confidence)
            labels.append("confidence")
        data = np.column_stack([np.asarray(c, dtype=float) for c in cols])
        return cls(Signal(data, fps, labels, Modality.RECTS, units={"xywh": "px"}))

    @property
    def fps(self) -> float:
        return self.signal.fps

    @property
    def boxes(self) -> np.ndarray:
        return self.signal.data[:, :4]


@dataclass(frozen=True, eq=False)
class LandmarkTrack:
    """K landmark points in D = 2 or 3 coordinates per frame.

    Channels are laid out point-major: ``p0_x, p0_y[, p0_z], p1_x, ...``.
    """

    signal: Signal
    canonicalized: bool = False

    def __post_init__(self):
        s = self.signal
        _require_modality(s, Modality.LANDMARKS2D, Modality.LANDMARKS3D)
        dim = self.dim
        if s.n_channels == 0 or s.n_channels % dim:
            raise ValidationError(
                f"{s.n_channels} channels is not a whole number of {dim}-D points"
            )
        if dim == 2 and self.canonicalized:
            raise ValidationError("2-D landmarks cannot be canonicalized")
        expected = TEMPLATE_POINTS.get(s.template_id or "")
        if expected is not None and expected != self.n_points:
            raise ValidationError(
                f"template {s.template_id} has {expected} points, track has {self.n_points}"
            )

    @staticmethod
    def labels_for(n_points: int, dim: int) -> list:
        axes = "xyz"[:dim]
        return [f"p{k}_{a}" for k in range(n_points) for a in axes]

    @classmethod
    def from_points(cls, points, fps, template_id=None, canonicalized=False, units="model"):
        """Build from an array of shape ``(frames, K, D)``."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 3 or pts.shape[2] not in (2, 3):
            raise ValidationError(f"points must have shape (frames, K, 2|3), got {pts.shape}")
        n, k, d = pts.shape
        modality = Modality.LANDMARKS3D if d == 3 else Modality.LANDMARKS2D
        sig = Signal(
            pts.reshape(n, k * d), fps, cls.labels_for(k, d), modality,
            units={"points": units}, template_id=template_id,
        )
        return cls(sig, canonicalized=canonicalized)

    @property
    def dim(self) -> int:
        return 3 if self.signal.modality is Modality.LANDMARKS3D else 2

    @property
    def n_points(self) -> int:
        return self.signal.n_channels // self.dim

    @property
    def template_id(self):
        return self.signal.template_id

    @property
    def fps(self) -> float:
        return self.signal.fps

    @property
    def points(self) -> np.ndarray:
        """View of shape ``(frames, K, D)``."""
        return self.signal.data.reshape(self.signal.n_frames, self.n_points, self.dim)


@dataclass(frozen=True, eq=False)
class PoseTrack:
    """Head pose: pitch, yaw, roll in radians, then translation tx, ty, tz."""

    signal: Signal

    def __post_init__(self):
        s = self.signal
        _require_modality(s, Modality.POSE)
        if s.n_channels != 6:
            raise ValidationError(f"pose track needs exactly 6 channels, got {s.n_channels}")
        if s.channel_labels != POSE_LABELS:
            raise ValidationError(f"pose channels must be {POSE_LABELS}, got {s.channel_labels}")

    @classmethod
    def from_arrays(cls, rotation, translation, fps) -> "PoseTrack":
        data = np.column_stack([np.asarray(rotation, float), np.asarray(translation, float)])
        units = {"rotation": "rad", "translation": "model"}
        return cls(Signal(data, fps, POSE_LABELS, Modality.POSE, units=units))

    @property
    def fps(self) -> float:
        return self.signal.fps

    @property
    def rotation(self) -> np.ndarray:
        return self.signal.data[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.signal.data[:, 3:]


@dataclass(frozen=True, eq=False)
class ExpressionTrack:
    """Per-frame expression coefficients (dimensionless)."""

    signal: Signal
    is_local: bool = False

    def __post_init__(self):
        _require_modality(self.signal, Modality.EXPRESSIONS, Modality.GENERIC)
        if self.signal.n_channels < 1:
            raise ValidationError("expression track needs at least one coefficient")

    @classmethod
    def from_array(cls, coefficients, fps, basis_id=None, is_local=False) -> "ExpressionTrack":
        c = np.asarray(coefficients, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        labels = [f"e{k}" for k in range(c.shape[1])]
        return cls(Signal(c, fps, labels, Modality.EXPRESSIONS, basis_id=basis_id), is_local)

    @property
    def fps(self) -> float:
        return self.signal.fps

    @property
    def coefficients(self) -> np.ndarray:
        return self.signal.data

    @property
    def n_coefficients(self) -> int:
        return self.signal.n_channels


def fornberg_weights(z: float, nodes, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``z`` on ``nodes``.

    Returns an array of shape ``(m + 1, len(nodes))``; row ``k`` holds the
    weights of the k-th derivative (Fornberg 1988).
    """
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c.T


def _stencil_half_width(order: int) -> int:
    # 4th-order accurate central stencils: 5 points for d1/d2, 7 for d3/d4, ...
    return (order + 1) // 2 + 1


def finite_difference(s: Signal, order: int = 1) -> Signal:
    """Order-th time derivative of every channel, in units per second**order.

    Interior frames use a centered stencil; frames too close to either end
    use a one-sided stencil of the same width shifted inward. Stencils are
    fourth-order accurate where the signal is long enough, so polynomials of
    low degree are differentiated exactly up to rounding.
    """
    order = int(order)
    if order < 1:
        raise ValidationError(f"derivative order must be a positive integer, got {order}")
    n = s.n_frames
    if n < order + 2:
        raise ValidationError(
            f"order-{order} derivative needs at least {order + 2} frames, got {n}"
        )
    half = _stencil_half_width(order)
    size = min(2 * half + 1, n)
    scale = s.fps ** order
    # differencing relative to the first frame leaves constants exactly zero
    x = s.data - s.data[:1]
    out = np.empty_like(x)

    if size == 2 * half + 1 and n > 2 * half:
        w = fornberg_weights(0.0, np.arange(-half, half + 1), order)[order] * scale
        interior = np.zeros((n - 2 * half, x.shape[1]))
        for j, wj in enumerate(w):
            interior += wj * x[j:n - 2 * half + j]
        out[half:n - half] = interior
        edge = list(range(half)) + list(range(n - half, n))
    else:
        edge = list(range(n))

    for i in edge:
        start = min(max(i - half, 0), n - size)
        nodes = np.arange(start, start + size) - i
        w = fornberg_weights(0.0, nodes, order)[order] * scale
        out[i] = w @ x[start:start + size]

    return s.with_data(out)


def align_pair(a: Signal, b: Signal) -> tuple:
    """Truncate two equal-rate signals to their common frame count.

    When truncation happens both returned signals carry a ``"truncated"``
    entry in ``warnings``. Resampling is not attempted.
    """
    if a.fps != b.fps:
        raise ValidationError(f"fps mismatch: {a.fps} vs {b.fps} (resampling is not supported)")
    n = min(a.n_frames, b.n_frames)
    if a.n_frames == b.n_frames:
        return a, b

    def cut(s):
        flags = s.warnings if "truncated" in s.warnings else s.warnings + ("truncated",)
        return replace(s, data=s.data[:n], warnings=flags)

    return cut(a), cut(b)


def seconds_to_frames(seconds: float, fps: float) -> int:
    """``round(seconds * fps)`` with halves rounded up."""
    return int(math.floor(seconds * fps + 0.5))
