"""Comparison detectors: moving average, moving variance, maximum
likelihood classification, and the chi-square parametric bound.

Moving-average and moving-variance thresholds are calibrated per stream on
training silence to a target per-window false-alarm rate (1% by default,
matching the main detector's significance).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import brentq
from scipy.special import gammainc

from .trace import SILENCE, LabelTrack, RssTrace, StreamId

DEFAULT_TARGET_FA = 0.01


def calibrate_threshold(stats, target_fa: float = DEFAULT_TARGET_FA) -> float:
    """Threshold exceeded by a ``target_fa`` fraction of silence statistics."""
    stats = np.asarray(stats, dtype=float)
    if stats.size == 0:
        raise ValueError("no calibration statistics")
    return float(np.quantile(stats, 1.0 - target_fa))


# ---------------------------------------------------------------------------
# Moving average

@dataclass(frozen=True)
class MovingAverageCfg:
    short_len: int = 5
    long_len: int = 60
    threshold: float = 3.0

    def __post_init__(self):
        if not 2 <= self.short_len < self.long_len:
            raise ValueError("need 2 <= short_len < long_len")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")


def moving_average_step(cfg: MovingAverageCfg, history: Sequence[float]) -> bool:
    h = np.asarray(history, dtype=float)
    if h.size < cfg.long_len:
        raise ValueError(f"need {cfg.long_len} samples of history, got {h.size}")
    diff = h[-cfg.short_len:].mean() - h[-cfg.long_len:].mean()
    return bool(abs(diff) > cfg.threshold)


def moving_average_stat(values, short_len: int, long_len: int) -> np.ndarray:
    """``|short mean - long mean|`` for every tick with a full long window."""
    v = np.asarray(values, dtype=float)
    if v.size < long_len:
        return np.zeros(0)
    c = np.concatenate([[0.0], np.cumsum(v)])
    end = np.arange(long_len, v.size + 1)
    long_mean = (c[end] - c[end - long_len]) / long_len
    short_mean = (c[end] - c[end - short_len]) / short_len
    return np.abs(short_mean - long_mean)


def fit_moving_average(train_values, short_len: int = 5, long_len: int = 60,
                       target_fa: float = DEFAULT_TARGET_FA) -> MovingAverageCfg:
    stat = moving_average_stat(train_values, short_len, long_len)
    thr = max(calibrate_threshold(stat, target_fa), 1e-9)
    return MovingAverageCfg(short_len, long_len, thr)


# ---------------------------------------------------------------------------
# Moving variance

@dataclass(frozen=True)
class MovingVarianceCfg:
    window_len: int = 5
    silence_variance: float = 1.0
    threshold: float = 3.0

    def __post_init__(self):
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")


def moving_variance_step(cfg: MovingVarianceCfg, window: Sequence[float]) -> bool:
    w = np.asarray(window, dtype=float)
    if w.size < cfg.window_len:
        raise ValueError(f"need a full window of {cfg.window_len} samples")
    var = w[-cfg.window_len:].var(ddof=1)
    return bool(var - cfg.silence_variance > cfg.threshold)


def moving_variance_stat(values, cfg_or_len, silence_variance: float = 0.0) -> np.ndarray:
    if isinstance(cfg_or_len, MovingVarianceCfg):
        n, silence_variance = cfg_or_len.window_len, cfg_or_len.silence_variance
    else:
        n = int(cfg_or_len)
    v = np.asarray(values, dtype=float)
    if v.size < n:
        return np.zeros(0)
    return sliding_window_view(v, n).var(axis=1, ddof=1) - silence_variance


def fit_moving_variance(train_values, window_len: int = 5,
                        target_fa: float = DEFAULT_TARGET_FA) -> MovingVarianceCfg:
    v = np.asarray(train_values, dtype=float)
    sil = float(v.var(ddof=1))
    stat = moving_variance_stat(v, window_len, sil)
    return MovingVarianceCfg(window_len, sil, calibrate_threshold(stat, target_fa))


# ---------------------------------------------------------------------------
# Maximum likelihood classification

SILENCE_PROFILE = "silence"


@dataclass(frozen=True, eq=False)
class MleModel:
    """Per-profile, per-stream integer-dBm histograms (add-one smoothed).

    ``logp[p, j, b]`` is the log probability of bin ``b`` on stream ``j``
    under profile ``profile_ids[p]``; bin ``b`` covers ``lo + b`` dBm.
    Profile 0 is always silence.
    """

    streams: tuple[StreamId, ...]
    profile_ids: tuple[str, ...]
    lo: int
    logp: np.ndarray

    def is_motion(self, profile_id: str) -> bool:
        return profile_id != SILENCE_PROFILE

    def bins(self, rss) -> np.ndarray:
        b = np.rint(np.asarray(rss, dtype=float)).astype(int) - self.lo
        return np.clip(b, 0, self.logp.shape[2] - 1)


def fit_mle(trace: RssTrace, labels: LabelTrack, margin_db: int = 15) -> MleModel:
    """Build silence and per-location motion profiles from a labelled trace.

    Motion intervals are grouped by their ``loc`` tag (untagged ones share a
    single ``motion`` profile).
    """
    streams = trace.streams
    allv = np.concatenate([trace[s].rss for s in streams])
    lo = int(np.floor(allv.min())) - margin_db
    hi = int(np.ceil(allv.max())) + margin_db
    nbins = hi - lo + 1

    groups: dict[str, list] = {SILENCE_PROFILE: []}
    for iv in labels.intervals:
        pid = SILENCE_PROFILE if iv.label == SILENCE else f"motion@{iv.loc}" if iv.loc else "motion"
        groups.setdefault(pid, []).append(iv)
    if not any(iv.label == SILENCE for iv in labels.intervals):
        raise ValueError("MLE training needs at least one silence interval")

    ids = tuple(groups)
    logp = np.zeros((len(ids), len(streams), nbins))
    for p, pid in enumerate(ids):
        for j, s in enumerate(streams):
            ser = trace[s]
            m = np.zeros(len(ser), dtype=bool)
            for iv in groups[pid]:
                m |= (ser.t >= iv.start) & (ser.t < iv.end)
            b = np.clip(np.rint(ser.rss[m]).astype(int) - lo, 0, nbins - 1)
            counts = np.bincount(b, minlength=nbins) + 1.0
            logp[p, j] = np.log(counts / counts.sum())
    return MleModel(streams, ids, lo, logp)


def mle_loglik(model: MleModel, rss_matrix) -> np.ndarray:
    """Log-likelihood of each column of a ``(k, T)`` matrix under each profile."""
    b = model.bins(rss_matrix)
    k = len(model.streams)
    j = np.arange(k)[:, None]
    return model.logp[:, j, b].sum(axis=1)  # (P, T)


def mle_classify(model: MleModel, rss_vector: Mapping[StreamId, float] | Sequence[float]):
    """Most likely profile for one reading per stream; ties go to silence."""
    if isinstance(rss_vector, Mapping):
        vec = [rss_vector[s] for s in model.streams]
    else:
        vec = list(rss_vector)
        if len(vec) != len(model.streams):
            raise ValueError("vector length differs from the model's stream count")
    ll = mle_loglik(model, np.asarray(vec, dtype=float)[:, None])[:, 0]
    best = model.profile_ids[int(np.argmax(ll))]  # first max wins; silence is index 0
    return best, model.is_motion(best)


def mle_alarms(model: MleModel, rss_matrix) -> np.ndarray:
    ll = mle_loglik(model, rss_matrix)
    return np.argmax(ll, axis=0) != 0


# ---------------------------------------------------------------------------
# Parametric chi-square bound

@dataclass(frozen=True)
class ParametricModel:
    sigma2: float
    l: int = 5
    alpha: float = 0.01

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("population variance must be positive")
        if self.l < 2:
            raise ValueError("l must be >= 2")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


def chi2_cdf(x: float, dof: float) -> float:
    if x <= 0:
        return 0.0
    return float(gammainc(dof / 2.0, x / 2.0))


def chi2_quantile(p: float, dof: float, xtol: float = 1e-10) -> float:
    """Invert the regularized lower incomplete gamma by bracketed root finding."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    hi = max(1.0, 2.0 * dof)
    while chi2_cdf(hi, dof) < p:
        hi *= 2.0
    return brentq(lambda x: chi2_cdf(x, dof) - p, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def chi_square_bound(model: ParametricModel) -> float:
    """Critical sample variance ``sigma^2 chi2_{l-1, 1-alpha} / (l - 1)``."""
    dof = model.l - 1
    return model.sigma2 * chi2_quantile(1.0 - model.alpha, dof) / dof


def fit_parametric(train_values, l: int = 5, alpha: float = 0.01) -> ParametricModel:
    """Population variance estimated as the sample variance of training RSS."""
    return ParametricModel(float(np.var(np.asarray(train_values, dtype=float), ddof=1)), l, alpha)

