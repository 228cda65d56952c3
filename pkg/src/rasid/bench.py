"""Experiment harness: train, run every detector on the same ticks, score.

All detectors are scored on the synchronized ticks at or after the end of
the training prefix. Baseline alarms are OR'd across streams.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import baselines as bl
from .detector import DetectorConfig, RunResult, run
from .evaluation import EvalReport, score_alarms
from .profiling import (DEFAULT_ALPHA, DEFAULT_L, FeatureKind, NormalProfile,
                        build_profile, window_features, with_alpha)
from .synth import (MotionSegment, SynthConfig, generate_synthetic, office_config,
                    office_geometry)
from .trace import DataError, LabelTrack, RssTrace, StreamId, TickGrid, synchronize

TRAIN_S = 120.0


def check_training_silence(labels: LabelTrack | None, t0: float, t1: float) -> None:
    if labels is not None and labels.has_motion(t0, t1):
        raise DataError(f"training slice [{t0:g}, {t1:g}) overlaps a motion interval")


def train_profiles(trace: RssTrace, train_end: float = TRAIN_S, l: int = DEFAULT_L,
                   alpha: float = DEFAULT_ALPHA,
                   kind: FeatureKind = FeatureKind.VARIANCE) -> dict[StreamId, NormalProfile]:
    train = trace.slice(-np.inf, train_end)
    return {s: build_profile(train, s, l, alpha, kind) for s in trace.streams}


def _test_mask(times, train_end: float) -> np.ndarray:
    return np.asarray(times) >= train_end


def score_run(result: RunResult, truth: LabelTrack, kind: str = "refined",
              train_end: float = TRAIN_S) -> EvalReport:
    m = _test_mask(result.times, train_end)
    return score_alarms(result.times[m], result.alarms(kind)[m], truth)


def score_grid_alarms(grid: TickGrid, alarms, truth: LabelTrack,
                      train_end: float = TRAIN_S) -> EvalReport:
    m = _test_mask(grid.times, train_end)
    return score_alarms(grid.times[m], np.asarray(alarms)[m], truth)


# ---------------------------------------------------------------------------
# RASID variants

def rasid_reports(trace: RssTrace, truth: LabelTrack, profiles=None,
                  cfg: DetectorConfig = DetectorConfig(),
                  train_end: float = TRAIN_S) -> dict[str, EvalReport]:
    """Basic (frozen profiles), updated-only and refined reports."""
    if profiles is None:
        profiles = train_profiles(trace, train_end, cfg.l)
    frozen = run(trace, profiles, replace(cfg, update=False))
    updated = run(trace, profiles, replace(cfg, update=True))
    return {"basic": score_run(frozen, truth, "basic", train_end),
            "updated": score_run(updated, truth, "basic", train_end),
            "refined": score_run(updated, truth, "refined", train_end)}


def static_basic_alarms(grid: TickGrid, bounds: Sequence[float], l: int) -> np.ndarray:
    """Per-tick OR of ``variance(window) > bound`` with fixed per-stream bounds.

    Ticks before the first full window never alarm.
    """
    k, T = grid.rss.shape
    out = np.zeros(T, dtype=bool)
    for j in range(k):
        v = window_features(np.nan_to_num(grid.rss[j]), l, FeatureKind.VARIANCE)
        out[l - 1:] |= v > bounds[j]
    return out


# ---------------------------------------------------------------------------
# Baselines

@dataclass(frozen=True)
class BaselineParams:
    ma_short: int = 5
    ma_long: int = 60
    mv_window: int = 5
    target_fa: float = bl.DEFAULT_TARGET_FA

    @classmethod
    def from_dict(cls, doc: Mapping) -> "BaselineParams":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


def moving_average_alarms(grid: TickGrid, train_end: float = TRAIN_S,
                          p: BaselineParams = BaselineParams()):
    train = grid.times < train_end
    out = np.zeros(grid.times.size, dtype=bool)
    cfgs = []
    for j in range(grid.rss.shape[0]):
        cfg = bl.fit_moving_average(grid.rss[j, train], p.ma_short, p.ma_long, p.target_fa)
        cfgs.append(cfg)
        stat = bl.moving_average_stat(np.nan_to_num(grid.rss[j]), cfg.short_len, cfg.long_len)
        out[cfg.long_len - 1:] |= stat > cfg.threshold
    return out, cfgs


def moving_variance_alarms(grid: TickGrid, train_end: float = TRAIN_S,
                           p: BaselineParams = BaselineParams()):
    train = grid.times < train_end
    out = np.zeros(grid.times.size, dtype=bool)
    cfgs = []
    for j in range(grid.rss.shape[0]):
        cfg = bl.fit_moving_variance(grid.rss[j, train], p.mv_window, p.target_fa)
        cfgs.append(cfg)
        stat = bl.moving_variance_stat(np.nan_to_num(grid.rss[j]), cfg)
        out[cfg.window_len - 1:] |= stat > cfg.threshold
    return out, cfgs


def parametric_alarms(grid: TickGrid, train_end: float = TRAIN_S, l: int = DEFAULT_L,
                      alpha: float = DEFAULT_ALPHA):
    """Basic detection with chi-square bounds; population variance from training."""
    train = grid.times < train_end
    models = [bl.fit_parametric(grid.rss[j, train], l, alpha) for j in range(grid.rss.shape[0])]
    bounds = [bl.chi_square_bound(m) for m in models]
    return static_basic_alarms(grid, bounds, l), models


def baseline_reports(trace: RssTrace, truth: LabelTrack, train_end: float = TRAIN_S,
                     p: BaselineParams = BaselineParams(),
                     mle: bl.MleModel | None = None) -> dict[str, EvalReport]:
    grid = synchronize(trace)
    out = {"moving_average": score_grid_alarms(grid, moving_average_alarms(grid, train_end, p)[0],
                                               truth, train_end),
           "moving_variance": score_grid_alarms(grid, moving_variance_alarms(grid, train_end, p)[0],
                                                truth, train_end)}
    if mle is not None:
        out["mle"] = score_grid_alarms(grid, bl.mle_alarms(mle, np.nan_to_num(grid.rss)),
                                       truth, train_end)
    return out


# ---------------------------------------------------------------------------
# Sweeps

def sweep_l_alpha(trace: RssTrace, truth: LabelTrack, ls: Sequence[int],
                  alphas: Sequence[float], train_end: float = TRAIN_S) -> list[dict]:
    """Basic detection (frozen profiles) over an ``(l, alpha)`` grid."""
    grid = synchronize(trace)
    rows = []
    for l in ls:
        base = train_profiles(trace, train_end, l)
        for a in alphas:
            bounds = [with_alpha(base[s], a).u for s in grid.streams]
            rep = score_grid_alarms(grid, static_basic_alarms(grid, bounds, l), truth, train_end)
            rows.append({"l": int(l), "alpha": float(a), **rep.to_dict()})
    return rows


def sweep_l_update(trace: RssTrace, truth: LabelTrack, values: Sequence[int],
                   cfg: DetectorConfig = DetectorConfig(), kind: str = "basic",
                   train_end: float = TRAIN_S) -> list[dict]:
    """Detection with profile updates over a range of update group sizes."""
    profiles = train_profiles(trace, train_end, cfg.l)
    rows = []
    for n in values:
        res = run(trace, profiles, replace(cfg, l_update=int(n), update=True))
        rows.append({"l_update": int(n), **score_run(res, truth, kind, train_end).to_dict()})
    return rows


# ---------------------------------------------------------------------------
# Reference experiments on the synthetic office testbed

OFFICE_ZONES = {
    "south-west": ((3.0, 3.0), (7.0, 3.0), (7.0, 6.0), (3.0, 6.0), (3.0, 3.0)),
    "south-east": ((13.0, 3.0), (17.0, 3.0), (17.0, 6.0), (13.0, 6.0), (13.0, 3.0)),
    "north-east": ((13.0, 8.0), (17.0, 8.0), (17.0, 11.0), (13.0, 11.0), (13.0, 8.0)),
    "north-west": ((3.0, 8.0), (7.0, 8.0), (7.0, 11.0), (3.0, 11.0), (3.0, 8.0)),
}


def office_mle_config(seed: int = 2012, silence_s: float = 600.0,
                      zone_s: float = 300.0) -> SynthConfig:
    """Separate labelled training recording for the MLE baseline.

    Shares the office's per-stream levels but uses independent noise; a
    silence period is followed by walking inside each zone in turn, each
    motion interval tagged with its zone name.
    """
    sched, t = [], silence_s
    for name, loop in OFFICE_ZONES.items():
        laps = max(1, round(zone_s / 14.0))
        sched.append(MotionSegment(t, t + zone_s, loop + loop[1:] * (laps - 1), loc=name))
        t += zone_s
    base = office_config(seed, duration_s=t, motion=())
    return replace(base, seed=seed + 1000, schedule=tuple(sched))


def train_office_mle(seed: int = 2012) -> bl.MleModel:
    tr, lab = generate_synthetic(office_mle_config(seed), office_geometry())
    return bl.fit_mle(tr, lab)


def office_trace(seed: int = 2012, **overrides):
    return generate_synthetic(office_config(seed, **overrides), office_geometry())
