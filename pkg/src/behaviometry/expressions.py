"""Affective expression measures: asymmetry, multiscale decomposition,
expressivity and diversity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .signal import ExpressionTrack, LandmarkTrack, Modality, Signal, seconds_to_frames

__all__ = [
    "MirrorTemplate",
    "IBUG51",
    "IBUG68",
    "TEMPLATES",
    "asymmetry",
    "ScaleSet",
    "Peak",
    "MultiscaleDecomposition",
    "multiscale_decompose",
    "ExpressivityStats",
    "expressivity",
    "DiversityScores",
    "diversity",
    "DIVERSITY_ESTIMATOR",
    "DYADIC_BASE_S",
]

DIVERSITY_ESTIMATOR = "dominant-coefficient Shannon entropy / ln(E)"
DYADIC_BASE_S = 0.1


@dataclass(frozen=True)
class MirrorTemplate:
    """Left/right correspondence of a landmark template.

    ``pairs`` hold ``(left, right)`` indices; ``midline`` lists the points on
    the facial symmetry plane; ``interocular`` is the eye pair used to
    normalize distances.
    """

    template_id: str
    n_points: int
    midline: tuple
    pairs: tuple
    interocular: tuple

    def __post_init__(self):
        mid = set(self.midline)
        paired = [i for p in self.pairs for i in p]
        if mid & set(paired):
            raise ValidationError("mirror pairs overlap the midline")
        if len(paired) != len(set(paired)):
            raise ValidationError("a landmark appears in more than one mirror pair")
        if mid | set(paired) != set(range(self.n_points)):
            missing = sorted(set(range(self.n_points)) - mid - set(paired))
            raise ValidationError(f"landmarks neither paired nor on the midline: {missing}")
        if len(self.interocular) != 2:
            raise ValidationError("interocular must be a pair of indices")

    def swapped(self) -> "MirrorTemplate":
        """Same template with left and right exchanged."""
        return MirrorTemplate(self.template_id, self.n_points, self.midline,
                              tuple((r, l) for l, r in self.pairs),
                              tuple(reversed(self.interocular)))


def _ibug51() -> MirrorTemplate:
    # iBUG-68 without the 17 jaw points, renumbered from 0
    pairs = (
        (0, 9), (1, 8), (2, 7), (3, 6), (4, 5),            # brows
        (14, 18), (15, 17),                                # nostrils
        (19, 28), (20, 27), (21, 26), (22, 25), (23, 30), (24, 29),  # eyes
        (31, 37), (32, 36), (33, 35), (38, 42), (39, 41),  # outer lip
        (43, 47), (44, 46), (48, 50),                      # inner lip
    )
    midline = (10, 11, 12, 13, 16, 34, 40, 45, 49)
    return MirrorTemplate("ibug51", 51, midline, pairs, (19, 28))


def _ibug68() -> MirrorTemplate:
    base = _ibug51()
    jaw = tuple((k, 16 - k) for k in range(8))
    pairs = jaw + tuple((l + 17, r + 17) for l, r in base.pairs)
    midline = (8,) + tuple(i + 17 for i in base.midline)
    return MirrorTemplate("ibug68", 68, midline, pairs, (36, 45))


IBUG51 = _ibug51()
IBUG68 = _ibug68()
TEMPLATES = {t.template_id: t for t in (IBUG51, IBUG68)}


def _symmetry_planes(pts: np.ndarray, m: MirrorTemplate):
    """Per-frame plane (center, unit normal) fit through the midline points
    and the pair midpoints. Degenerate frames get NaN."""
    left = pts[:, [l for l, _ in m.pairs]]
    right = pts[:, [r for _, r in m.pairs]]
    anchors = np.concatenate([pts[:, list(m.midline)], (left + right) / 2], axis=1)
    center = anchors.mean(axis=1)
    _, sv, vt = np.linalg.svd(anchors - center[:, None], full_matrices=False)
    normal = vt[:, -1, :]
    scale = np.maximum(sv[:, 0], np.finfo(float).tiny)
    degenerate = sv[:, 1] <= 1e-12 * scale
    normal[degenerate] = np.nan
    return center, normal


def _bisector_lines(pts: np.ndarray, m: MirrorTemplate):
    a = pts[:, m.interocular[0]]
    b = pts[:, m.interocular[1]]
    d = b - a
    norm = np.linalg.norm(d, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = np.where(norm > 0, d / norm, np.nan)
    return (a + b) / 2, normal


def asymmetry(l: LandmarkTrack, template: MirrorTemplate | None = None) -> Signal:
    """Per-frame left/right disparity, normalized by interocular distance.

    3-D tracks: each frame's symmetry plane is the total-least-squares plane
    through the midline landmarks and the midpoints of every mirror pair.
    2-D tracks: the perpendicular bisector of the interocular segment.
    Left points are reflected across it and the score is the mean distance
    to their right counterparts. Frames where the plane is undefined score
    NaN; 2-D output carries a ``caution_2d`` warning.
    """
    if template is None:
        template = TEMPLATES.get(l.template_id or "")
        if template is None:
            raise ValidationError(f"unknown landmark template {l.template_id!r}; "
                                  f"known: {', '.join(TEMPLATES)}")
    elif l.template_id is not None and l.template_id != template.template_id:
        raise ValidationError(
            f"track uses template {l.template_id!r}, mirror template is {template.template_id!r}"
        )
    if l.n_points != template.n_points:
        raise ValidationError(
            f"template {template.template_id} has {template.n_points} points, "
            f"track has {l.n_points}"
        )

    pts = l.points
    if l.dim == 3:
        center, normal = _symmetry_planes(pts, template)
    else:
        center, normal = _bisector_lines(pts, template)

    left = pts[:, [a for a, _ in template.pairs]]
    right = pts[:, [b for _, b in template.pairs]]
    dist = np.einsum("fkd,fd->fk", left - center[:, None], normal)
    mirrored = left - 2 * dist[..., None] * normal[:, None]
    err = np.linalg.norm(mirrored - right, axis=2).mean(axis=1)

    iod = np.linalg.norm(pts[:, template.interocular[0]] - pts[:, template.interocular[1]],
                         axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(iod > 0, err / iod, np.nan)

    warnings = ("caution_2d",) if l.dim == 2 else ()
    return Signal(score, l.fps, ["asymmetry"], Modality.GENERIC,
                  template_id=template.template_id, warnings=warnings)


@dataclass(frozen=True)
class ScaleSet:
    """Temporal scales: ``count`` dyadic scales or explicit ``windows_s``.

    ``ScaleSet(count=k)`` means windows of ``0.1 * 2**i`` seconds for
    ``i = 1..k``. With neither field set the whole signal is one scale.
    """

    count: int | None = None
    windows_s: tuple | None = None

    def __post_init__(self):
        if self.count is not None and self.windows_s is not None:
            raise ValidationError("give either a scale count or explicit windows, not both")
        if self.count is not None and (isinstance(self.count, bool) or int(self.count) < 1):
            raise ValidationError(f"scale count must be >= 1, got {self.count}")
        if self.windows_s is not None:
            w = tuple(float(v) for v in self.windows_s)
            if not w:
                raise ValidationError("explicit scale list is empty")
            if any(not (v > 0 and math.isfinite(v)) for v in w):
                raise ValidationError(f"scales must be positive seconds, got {list(w)}")
            if any(b <= a for a, b in zip(w, w[1:])):
                raise ValidationError(f"scales must be strictly increasing, got {list(w)}")
            object.__setattr__(self, "windows_s", w)

    @classmethod
    def coerce(cls, scales) -> "ScaleSet":
        """Accept ``None``, an int, a sequence of seconds or a ScaleSet."""
        if isinstance(scales, ScaleSet):
            return scales
        if scales is None:
            return cls()
        if isinstance(scales, (int, np.integer)) and not isinstance(scales, bool):
            return cls(count=int(scales))
        if isinstance(scales, (list, tuple, np.ndarray)):
            return cls(windows_s=tuple(scales))
        raise ValidationError(f"cannot interpret scales={scales!r}")

    @property
    def whole(self) -> bool:
        return self.count is None and self.windows_s is None

    def seconds(self) -> tuple:
        if self.count is not None:
            return tuple(DYADIC_BASE_S * 2 ** i for i in range(1, self.count + 1))
        return self.windows_s or ()

    def frames(self, fps: float) -> list:
        out = [seconds_to_frames(s, fps) for s in self.seconds()]
        if any(w < 1 for w in out):
            raise ValidationError(f"scale windows {list(self.seconds())} s give <1 frame at {fps} Hz")
        return out


class Peak(NamedTuple):
    frame: int
    amplitude: float


@dataclass(frozen=True, eq=False)
class MultiscaleDecomposition:
    components: list
    residual: Signal
    peaks: list  # [scale][channel] -> list of Peak
    scales_s: tuple
    windows: tuple
    z: float = 1.0

    def reconstruct(self) -> np.ndarray:
        total = self.residual.data.copy()
        for c in self.components:
            total = total + c.data
        return total


def multiscale_decompose(s: Signal, scales, z: float = 1.0) -> MultiscaleDecomposition:
    """Split ``s`` into band components with a moving-average pyramid.

    ``M_0 = s``, ``M_i`` = centered moving average of ``s`` over ``w_i``
    frames, component ``i`` = ``M_{i-1} - M_i`` and the residual is
    ``M_n``, so components plus residual telescope back to ``s``. Peaks of
    each component are strict local maxima at least ``mean + z * std``
    high (and non-negative), separated by at least ``w_i`` frames.
    """
    scales = ScaleSet.coerce(scales)
    x = s.data
    n = s.n_frames
    if scales.whole:
        if n < 3:
            raise ValidationError(f"signal too short: need at least 3 frames, got {n}")
        smooth = [np.broadcast_to(x.mean(axis=0), x.shape)]
        windows = (n,)
        scales_s = (n / s.fps,)
        seps = [1]
    else:
        windows = tuple(scales.frames(s.fps))
        scales_s = scales.seconds()
        need = 2 * max(windows)
        if n < need:
            raise ValidationError(
                f"signal too short: scales up to {max(scales_s)} s need at least {need} frames, "
                f"got {n}"
            )
        smooth = [kernels.moving_average(x, w) for w in windows]
        seps = list(windows)

    components = []
    peaks = []
    prev = x
    for m, sep in zip(smooth, seps):
        comp = prev - m
        prev = m
        components.append(s.with_data(comp))
        per_channel = []
        for c in range(comp.shape[1]):
            col = np.ascontiguousarray(comp[:, c])
            thr = max(col.mean() + z * col.std(), 0.0)
            idx = kernels.find_peaks(col, thr, sep)
            per_channel.append([Peak(int(i), float(col[i])) for i in idx])
        peaks.append(per_channel)
    residual = s.with_data(np.array(prev))
    return MultiscaleDecomposition(components, residual, peaks, tuple(scales_s), windows, z)


@dataclass(frozen=True, eq=False)
class ExpressivityStats:
    """Per-scale, per-coefficient intensity, variability and peak rate.

    Arrays have shape ``(n_scales, n_coefficients)``; ``pooled_*`` average
    across coefficients.
    """

    scales_s: tuple
    labels: tuple
    intensity: np.ndarray
    variability: np.ndarray
    peak_rate: np.ndarray
    z: float = 1.0

    @property
    def pooled_intensity(self) -> np.ndarray:
        return self.intensity.mean(axis=1)

    @property
    def pooled_variability(self) -> np.ndarray:
        return self.variability.mean(axis=1)

    @property
    def pooled_peak_rate(self) -> np.ndarray:
        return self.peak_rate.mean(axis=1)

    def rows(self):
        for i, sc in enumerate(self.scales_s):
            for c in range(len(self.labels)):
                yield (sc, c, self.intensity[i, c], self.variability[i, c], self.peak_rate[i, c])


def expressivity(e: ExpressionTrack, scales=None, z: float = 1.0) -> ExpressivityStats:
    """Intensity (mean peak amplitude), variability (component std) and peak
    rate (peaks per second of recording) at each temporal scale."""
    if isinstance(e, Signal):
        e = ExpressionTrack(e)
    dec = multiscale_decompose(e.signal, scales, z=z)
    n_scales = len(dec.components)
    n_coef = e.n_coefficients
    recording_s = e.signal.n_frames / e.fps
    intensity = np.zeros((n_scales, n_coef))
    variability = np.zeros((n_scales, n_coef))
    rate = np.zeros((n_scales, n_coef))
    for i, comp in enumerate(dec.components):
        variability[i] = comp.data.std(axis=0)
        for c in range(n_coef):
            pk = dec.peaks[i][c]
            if pk:
                intensity[i, c] = float(np.mean([p.amplitude for p in pk]))
            rate[i, c] = len(pk) / recording_s
    return ExpressivityStats(dec.scales_s, e.signal.channel_labels, intensity, variability,
                             rate, z)


@dataclass(frozen=True)
class DiversityScores:
    scales_s: tuple
    entropy: tuple
    distinct_dominant_count: tuple
    windows_used: tuple
    estimator: str = DIVERSITY_ESTIMATOR


def normalized_entropy(counts: Sequence[int], n_labels: int) -> float:
    counts = np.asarray([c for c in counts if c > 0], dtype=float)
    if counts.size <= 1 or n_labels < 2:
        return 0.0
    p = counts / counts.sum()
    h = float(-(p * np.log(p)).sum()) / math.log(n_labels)
    return min(max(h, 0.0), 1.0)


def diversity(e: ExpressionTrack, scales=None) -> DiversityScores:
    """Entropy of which coefficient dominates each window, normalized to [0, 1].

    Time is cut into consecutive windows of ``round(scale * fps)`` frames (a
    trailing partial window is dropped). The dominant coefficient of a
    window has the largest mean absolute activation, ties going to the lower
    index; windows with no activation at all are left out. With
    ``scales=None`` every frame is its own window.
    """
    if isinstance(e, Signal):
        e = ExpressionTrack(e)
    n_coef = e.n_coefficients
    if n_coef < 2:
        raise ValidationError(f"diversity needs at least 2 coefficients, got {n_coef}")
    scales = ScaleSet.coerce(scales)
    act = np.abs(e.coefficients)
    n = act.shape[0]
    if scales.whole:
        windows = [1]
        scales_s = (1.0 / e.fps,)
    else:
        windows = scales.frames(e.fps)
        scales_s = scales.seconds()

    entropy, distinct, used = [], [], []
    for w in windows:
        n_win = n // w
        if n_win < 1:
            raise ValidationError(f"signal of {n} frames is shorter than one {w}-frame window")
        means = act[:n_win * w].reshape(n_win, w, n_coef).mean(axis=1)
        active = means.max(axis=1) > 0
        dominant = means[active].argmax(axis=1)
        counts = np.bincount(dominant, minlength=n_coef)
        entropy.append(normalized_entropy(counts, n_coef))
        distinct.append(int(np.count_nonzero(counts)))
        used.append(int(active.sum()))
    return DiversityScores(tuple(scales_s), tuple(entropy), tuple(distinct), tuple(used))
