"""Interpersonal coupling from windowed, lagged cross-correlation.

Lag convention: a positive lag means the first signal trails the second.
Window ``t`` of ``a`` (frames ``t .. t+w``) is correlated with
``b[t - lag .. t - lag + w]``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .signal import Signal, align_pair, seconds_to_frames

__all__ = [
    "LagMode",
    "Pairing",
    "LagObjective",
    "XcorrConfig",
    "WindowedCorrelation",
    "window_starts",
    "windowed_lagged_xcorr",
    "imitation",
    "coordination",
]


class LagMode(str, enum.Enum):
    DIRECTIONAL = "directional"
    BIDIRECTIONAL = "bidirectional"


class Pairing(str, enum.Enum):
    MATCHED = "matched"
    ALL_PAIRS = "all_pairs"


class LagObjective(str, enum.Enum):
    MAX_SIGNED = "max_signed"
    MAX_ABS = "max_abs"


@dataclass(frozen=True)
class XcorrConfig:
    width_s: float
    step_s: float
    fps: float
    max_lag_s: float | None = None  # default: width_s / 2
    mode: LagMode = LagMode.BIDIRECTIONAL
    pairing: Pairing | None = None  # None: matched when labels agree, else all_pairs
    lag_objective: LagObjective = LagObjective.MAX_SIGNED
    lag_aggregate: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "mode", LagMode(self.mode))
        object.__setattr__(self, "lag_objective", LagObjective(self.lag_objective))
        if self.pairing is not None:
            object.__setattr__(self, "pairing", Pairing(self.pairing))
        if self.max_lag_s is None:
            object.__setattr__(self, "max_lag_s", self.width_s / 2)
        if not self.fps > 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        if not self.width_s > 0:
            raise ValidationError(f"window width must be positive, got {self.width_s}")
        if not self.step_s > 0:
            raise ValidationError(f"step must be positive, got {self.step_s}")
        if not self.max_lag_s >= 0:
            raise ValidationError(f"max lag must be non-negative, got {self.max_lag_s}")
        if self.width_frames < 3:
            raise ValidationError(
                f"window of {self.width_s} s is {self.width_frames} frames at {self.fps} Hz; "
                "need at least 3"
            )
        if self.step_frames < 1:
            raise ValidationError(f"step of {self.step_s} s is under one frame")
        if self.lag_aggregate not in ("mean", "median"):
            raise ValidationError("lag_aggregate must be 'mean' or 'median'")

    @property
    def width_frames(self) -> int:
        return seconds_to_frames(self.width_s, self.fps)

    @property
    def step_frames(self) -> int:
        return seconds_to_frames(self.step_s, self.fps)

    @property
    def max_lag_frames(self) -> int:
        return seconds_to_frames(self.max_lag_s, self.fps)

    def lags(self) -> np.ndarray:
        L = self.max_lag_frames
        if self.mode is LagMode.DIRECTIONAL:
            return np.arange(0, L + 1, dtype=np.int64)
        return np.arange(-L, L + 1, dtype=np.int64)

    def as_metadata(self) -> dict:
        return {
            "width_s": self.width_s, "step_s": self.step_s, "fps": self.fps,
            "max_lag_s": self.max_lag_s, "mode": self.mode.value,
            "pairing": self.pairing.value if self.pairing else "auto",
            "lag_objective": self.lag_objective.value, "lag_aggregate": self.lag_aggregate,
            "lag_sign": "positive lag = first signal trails the second",
        }


@dataclass(frozen=True, eq=False)
class WindowedCorrelation:
    """Best correlation and lag per (channel pair, window).

    ``best_corr`` and ``best_lag_s`` have shape ``(n_pairs, n_windows)``;
    skipped windows hold NaN.
    """

    pairs: tuple  # ((a_index, b_index), ...)
    pair_labels: tuple
    window_starts: np.ndarray  # frames
    best_corr: np.ndarray
    best_lag_s: np.ndarray
    lags_s: np.ndarray
    config: XcorrConfig

    @property
    def retained(self) -> np.ndarray:
        return ~np.isnan(self.best_corr)

    @property
    def n_windows(self) -> int:
        return self.best_corr.size

    @property
    def n_retained(self) -> int:
        return int(self.retained.sum())

    @property
    def n_skipped(self) -> int:
        return self.n_windows - self.n_retained

    @property
    def window_starts_s(self) -> np.ndarray:
        return self.window_starts / self.config.fps

    @property
    def corr_mean(self) -> float:
        return float(self.best_corr[self.retained].mean())

    @property
    def corr_std(self) -> float:
        return float(self.best_corr[self.retained].std())

    @property
    def corr_lag(self) -> float:
        lags = self.best_lag_s[self.retained]
        if self.config.lag_aggregate == "median":
            return float(np.median(lags))
        return float(lags.mean())

    @property
    def summary(self) -> tuple:
        return self.corr_mean, self.corr_std, self.corr_lag

    def pair_summary(self, p: int) -> tuple:
        keep = self.retained[p]
        c = self.best_corr[p, keep]
        l = self.best_lag_s[p, keep]
        if c.size == 0:
            return math.nan, math.nan, math.nan, 0
        lag = float(np.median(l)) if self.config.lag_aggregate == "median" else float(l.mean())
        return float(c.mean()), float(c.std()), lag, int(c.size)


def window_starts(n_frames: int, cfg: XcorrConfig) -> np.ndarray:
    """Start frames of windows whose every allowed lag stays inside the signal.

    For lags in ``[lo, hi]`` a start ``t`` is usable when ``t - hi >= 0`` and
    ``t - lo + w <= n``.
    """
    lags = cfg.lags()
    lo, hi = int(lags.min()), int(lags.max())
    w = cfg.width_frames
    first = max(hi, 0)
    last = n_frames - w + min(lo, 0)
    if last < first:
        return np.empty(0, dtype=np.int64)
    return np.arange(first, last + 1, cfg.step_frames, dtype=np.int64)


def _lag_preference(lags: np.ndarray) -> np.ndarray:
    # smallest |lag| first; between +l and -l the negative one wins
    return np.array(sorted(range(len(lags)), key=lambda i: (abs(lags[i]), lags[i] >= 0)))


def _resolve_pairs(a: Signal, b: Signal, pairing):
    if pairing is None:
        same = a.n_channels == b.n_channels and a.channel_labels == b.channel_labels
        pairing = Pairing.MATCHED if same else Pairing.ALL_PAIRS
    if pairing is Pairing.MATCHED:
        if a.n_channels != b.n_channels:
            raise ValidationError(
                f"matched pairing needs equal channel counts, got {a.n_channels} and "
                f"{b.n_channels}"
            )
        return [(i, i) for i in range(a.n_channels)]
    return list(itertools.product(range(a.n_channels), range(b.n_channels)))


def _as_signal(x, fps, name) -> Signal:
    if isinstance(x, Signal):
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return Signal(arr, fps, [f"{name}{k}" for k in range(arr.shape[1])])


def windowed_lagged_xcorr(a, b, cfg: XcorrConfig) -> WindowedCorrelation:
    """Per-window Pearson correlation at the best lag.

    For every usable window and channel pair, the correlation is evaluated
    at every allowed lag (``[0, L]`` directional, ``[-L, L]``
    bidirectional) and the lag maximizing the objective is kept; ties go to
    the smallest ``|lag|``, then to the negative lag. Windows where no lag
    gives a defined correlation (constant segments) are skipped and counted.
    """
    a = _as_signal(a, cfg.fps, "a")
    b = _as_signal(b, cfg.fps, "b")
    if a.fps != b.fps:
        raise ValidationError(f"fps mismatch: {a.fps} vs {b.fps}")
    if a.fps != cfg.fps:
        raise ValidationError(f"signals are sampled at {a.fps} Hz but config says {cfg.fps} Hz")
    a, b = align_pair(a, b)
    pairs = _resolve_pairs(a, b, cfg.pairing)

    starts = window_starts(a.n_frames, cfg)
    if len(starts) == 0:
        raise ValidationError(
            f"no valid windows: {a.n_frames} frames cannot hold a {cfg.width_frames}-frame "
            f"window with lags up to {cfg.max_lag_frames} frames"
        )
    lags = cfg.lags()
    pref = _lag_preference(lags)
    lags_pref = lags[pref]
    w = cfg.width_frames

    best_corr = np.full((len(pairs), len(starts)), np.nan)
    best_lag = np.full((len(pairs), len(starts)), np.nan)
    for p, (i, j) in enumerate(pairs):
        corr = kernels.window_lag_corr(
            np.ascontiguousarray(a.data[:, i]), np.ascontiguousarray(b.data[:, j]),
            starts, w, lags,
        )[:, pref]
        score = np.abs(corr) if cfg.lag_objective is LagObjective.MAX_ABS else corr
        ok = ~np.all(np.isnan(score), axis=1)
        if not ok.any():
            continue
        k = np.nanargmax(score[ok], axis=1)
        best_corr[p, ok] = corr[ok][np.arange(k.size), k]
        best_lag[p, ok] = lags_pref[k] / cfg.fps

    result = WindowedCorrelation(
        pairs=tuple(pairs),
        pair_labels=tuple((a.channel_labels[i], b.channel_labels[j]) for i, j in pairs),
        window_starts=starts,
        best_corr=best_corr,
        best_lag_s=best_lag,
        lags_s=lags / cfg.fps,
        config=cfg,
    )
    if result.n_retained == 0:
        raise ValidationError("no valid windows: every window has zero variance")
    return result


def imitation(participant, reference, width=1.1, step=0.5, fps=30.0, max_lag=None,
              causality=True, pairing=None, lag_objective="max_signed",
              lag_aggregate="mean") -> WindowedCorrelation:
    """How closely ``participant`` follows ``reference``.

    With ``causality=True`` only non-negative lags are searched (the
    participant may trail the reference, never lead it). ``causality=False``
    opens the search to ``[-L, L]`` with the same sign convention.
    """
    cfg = XcorrConfig(width, step, fps, max_lag,
                      LagMode.DIRECTIONAL if causality else LagMode.BIDIRECTIONAL,
                      pairing, lag_objective, lag_aggregate)
    return windowed_lagged_xcorr(participant, reference, cfg)


def coordination(a, b, width=1.1, step=0.5, fps=30.0, max_lag=None, pairing=None,
                 lag_objective="max_signed", lag_aggregate="mean") -> WindowedCorrelation:
    """Mutual coupling: either signal may lead."""
    cfg = XcorrConfig(width, step, fps, max_lag, LagMode.BIDIRECTIONAL, pairing,
                      lag_objective, lag_aggregate)
    return windowed_lagged_xcorr(a, b, cfg)
