"""Online detection: per-stream scoring, score-sum refinement, region heat
and event independence."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import networkx as nx
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import point_segment_distance, segment_distance
from .profiling import (DEFAULT_L, DEFAULT_L_UPDATE, NormalProfile,
                        UpdatePolicy, feature, maybe_update, window_features)
from .trace import DataError, RssTrace, SiteGeometry, StreamId, Window, synchronize

DEFAULT_BETA = 0.04
DEFAULT_REL_THRESHOLD = 0.225
DEFAULT_WARMUP = 60
DEFAULT_NORMAL_RATE = 0.005
DEFAULT_QUIET_TICKS = 15
DEFAULT_DECAY_M = 2.0


@dataclass(frozen=True)
class StreamVerdict:
    stream: StreamId
    t: float
    x: float
    score: float
    anomalous: bool


def basic_step(profile: NormalProfile, window: Window) -> StreamVerdict:
    if window.stream != profile.stream:
        raise ValueError(f"window is for {window.stream}, profile for {profile.stream}")
    x = feature(window, profile.feature)
    score = profile.score(x)
    return StreamVerdict(window.stream, window.end_t, x, score, score > 1.0)


@dataclass(frozen=True)
class GlobalDecision:
    t: float
    raw_sum: float
    smoothed: float
    basic_alarm: bool
    refined_alarm: bool

    def to_dict(self) -> dict:
        return {"t": self.t, "raw_sum": self.raw_sum, "smoothed": self.smoothed,
                "basic_alarm": self.basic_alarm, "refined_alarm": self.refined_alarm}


@dataclass(frozen=True)
class RefinementState:
    """Exponentially smoothed score sum plus the alarm latch.

    ``normal_level`` is unset during the first ``warmup`` ticks, then starts
    at the mean raw sum over those ticks. Afterwards it follows the smoothed
    sum as a slow running mean while no alarm is active and the smoothed sum
    stays within a factor ``1 + rel_threshold`` of it in either direction.

    An episode opens when the smoothed sum exceeds
    ``(1 + rel_threshold) * normal_level`` while some stream is anomalous.
    It closes when the smoothed sum drops under
    ``(1 + rel_threshold / 2) * normal_level`` or after ``quiet_ticks``
    consecutive ticks with no anomalous stream. After a quiet close a new
    episode needs the smoothed sum to fall back under the onset level first.
    """

    streams: tuple[StreamId, ...]
    beta: float = DEFAULT_BETA
    rel_threshold: float = DEFAULT_REL_THRESHOLD
    warmup: int = DEFAULT_WARMUP
    normal_rate: float = DEFAULT_NORMAL_RATE
    quiet_ticks: int = DEFAULT_QUIET_TICKS
    smoothed: float | None = None
    normal_level: float | None = None
    ticks: int = 0
    warm_sum: float = 0.0
    latched: bool = False
    armed: bool = True
    quiet: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if not self.rel_threshold > 0:
            raise ValueError("rel_threshold must be positive")

    @property
    def onset_level(self) -> float | None:
        return None if self.normal_level is None else (1 + self.rel_threshold) * self.normal_level

    @property
    def release_level(self) -> float | None:
        if self.normal_level is None:
            return None
        return (1 + self.rel_threshold / 2) * self.normal_level


def refine_step(state: RefinementState, t: float,
                verdicts: Sequence[StreamVerdict]) -> tuple[RefinementState, GlobalDecision]:
    seen = [v.stream for v in verdicts]
    if len(seen) != len(state.streams) or set(seen) != set(state.streams):
        missing = sorted(set(state.streams) - set(seen))
        raise ValueError(f"need exactly one verdict per stream at t={t}; missing "
                         f"{[str(s) for s in missing]}")
    raw = float(sum(v.score for v in verdicts))
    any_anom = any(v.anomalous for v in verdicts)
    return _refine(state, t, raw, any_anom)


def _refine(state: RefinementState, t: float, raw: float,
            any_anom: bool) -> tuple[RefinementState, GlobalDecision]:
    b = state.beta
    smoothed = raw if state.smoothed is None else b * raw + (1 - b) * state.smoothed
    ticks = state.ticks + 1
    normal = state.normal_level
    warm_sum = state.warm_sum
    latched, armed, quiet = state.latched, state.armed, state.quiet

    if normal is None:
        warm_sum += raw
        if ticks >= state.warmup:
            normal = warm_sum / ticks
    else:
        on = (1 + state.rel_threshold) * normal
        off = (1 + state.rel_threshold / 2) * normal
        if latched:
            quiet = 0 if any_anom else quiet + 1
            if smoothed < off:
                latched = False
            elif quiet >= state.quiet_ticks:
                latched, armed = False, False
        elif not armed:
            armed = smoothed <= on
        elif smoothed > on and any_anom:
            latched, quiet = True, 0
        if not latched and normal / (1 + state.rel_threshold) <= smoothed <= on:
            normal += state.normal_rate * (smoothed - normal)

    new = replace(state, smoothed=smoothed, normal_level=normal, ticks=ticks,
                  warm_sum=warm_sum, latched=latched, armed=armed, quiet=quiet)
    return new, GlobalDecision(float(t), raw, smoothed, any_anom, latched)


# ---------------------------------------------------------------------------
# Engine

@dataclass(frozen=True)
class DetectorConfig:
    l: int = DEFAULT_L
    l_update: int = DEFAULT_L_UPDATE
    update: bool = True
    beta: float = DEFAULT_BETA
    rel_threshold: float = DEFAULT_REL_THRESHOLD
    warmup: int = DEFAULT_WARMUP
    normal_rate: float = DEFAULT_NORMAL_RATE
    quiet_ticks: int = DEFAULT_QUIET_TICKS
    rate_hz: float = 1.0


@dataclass
class RunResult:
    streams: tuple[StreamId, ...]
    times: np.ndarray            # decision ticks
    x: np.ndarray                # (k, T) features
    score: np.ndarray            # (k, T) anomaly scores
    decisions: list[GlobalDecision]
    profiles: dict[StreamId, NormalProfile]
    updates: dict[StreamId, int] = field(default_factory=dict)

    @property
    def anomalous(self) -> np.ndarray:
        return self.score > 1.0

    def alarms(self, kind: str = "refined") -> np.ndarray:
        attr = {"refined": "refined_alarm", "basic": "basic_alarm"}[kind]
        return np.array([getattr(d, attr) for d in self.decisions], dtype=bool)

    def verdicts_at(self, t: float) -> list[StreamVerdict]:
        idx = np.flatnonzero(np.isclose(self.times, t))
        if idx.size == 0:
            raise KeyError(f"no decision at t={t}")
        i = int(idx[0])
        return [StreamVerdict(s, float(self.times[i]), float(self.x[j, i]),
                              float(self.score[j, i]), bool(self.score[j, i] > 1.0))
                for j, s in enumerate(self.streams)]


def run(trace: RssTrace, profiles: Mapping[StreamId, NormalProfile],
        cfg: DetectorConfig = DetectorConfig()) -> RunResult:
    """Monitor ``trace`` tick by tick.

    Each tick: features of the latest window per stream, scores against the
    current profiles, refinement, then a profile update for every stream whose
    group of ``l_update`` ticks just filled (when enabled). Ticks where some
    stream lacks a valid full window produce no decision.
    """
    missing = [s for s in trace.streams if s not in profiles]
    if missing:
        raise DataError(f"no profile for stream(s) {', '.join(map(str, missing))}")
    streams = trace.streams
    grid = synchronize(trace, cfg.rate_hz)
    l = cfg.l
    k, T = grid.rss.shape
    profs = [profiles[s] for s in streams]
    feats = np.vstack([window_features(np.nan_to_num(grid.rss[j]), l, profs[j].feature)
                       for j in range(k)]) if T >= l else np.zeros((k, 0))
    if T >= l:
        ok = sliding_window_view(grid.valid, l, axis=1).all(axis=2).all(axis=0)
    else:
        ok = np.zeros(0, dtype=bool)

    policy = UpdatePolicy(cfg.l_update)
    state = RefinementState(streams, cfg.beta, cfg.rel_threshold, cfg.warmup,
                            cfg.normal_rate, cfg.quiet_ticks)
    groups: list[list[tuple[float, float]]] = [[] for _ in range(k)]
    updates = {s: 0 for s in streams}
    us = np.array([p.u for p in profs])
    dispersion = all(p.lower is None for p in profs)

    times, xs, scores, decisions = [], [], [], []
    for i in np.flatnonzero(ok):
        x = feats[:, i]
        if dispersion:
            sc = x / us
        else:
            sc = np.array([profs[j].score(x[j]) for j in range(k)])
        t = float(grid.times[i + l - 1])
        state, dec = _refine(state, t, float(sc.sum()), bool((sc > 1.0).any()))
        times.append(t)
        xs.append(x)
        scores.append(sc)
        decisions.append(dec)
        if cfg.update:
            for j in range(k):
                g = groups[j]
                g.append((float(x[j]), float(sc[j])))
                if len(g) == policy.l_update:
                    new = maybe_update(profs[j], g, policy)
                    if new is not profs[j]:
                        profs[j] = new
                        us[j] = new.u
                        updates[streams[j]] += 1
                    g.clear()

    x_arr = np.array(xs).T if xs else np.zeros((k, 0))
    s_arr = np.array(scores).T if scores else np.zeros((k, 0))
    return RunResult(streams, np.array(times), x_arr, s_arr, decisions,
                     dict(zip(streams, profs)), updates)


def write_decisions(decisions: Sequence[GlobalDecision], path) -> None:
    with open(path, "w") as fh:
        for d in decisions:
            fh.write(json.dumps(d.to_dict()) + "\n")


def load_decisions(path) -> list[GlobalDecision]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(GlobalDecision(float(rec["t"]), float(rec["raw_sum"]),
                                          float(rec["smoothed"]), bool(rec["basic_alarm"]),
                                          bool(rec["refined_alarm"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad decision record: {exc}") from None
    return out


def write_verdicts(result: RunResult, path) -> None:
    names = [str(s) for s in result.streams]
    with open(path, "w") as fh:
        for i, t in enumerate(result.times):
            for j, name in enumerate(names):
                sc = float(result.score[j, i])
                fh.write(json.dumps({"t": float(t), "stream": name, "x": float(result.x[j, i]),
                                     "score": sc, "anomalous": sc > 1.0}) + "\n")


def load_verdicts(path, t: float | None = None) -> list[StreamVerdict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if t is not None and float(rec["t"]) != float(t):
                    continue
                out.append(StreamVerdict(StreamId.parse(rec["stream"]), float(rec["t"]),
                                         float(rec["x"]), float(rec["score"]),
                                         bool(rec["anomalous"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad verdict record: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# Region heat

@dataclass(frozen=True)
class Heatmap:
    xs: np.ndarray
    ys: np.ndarray
    heat: np.ndarray  # (len(ys), len(xs))
    bounds: tuple[float, float, float, float]
    resolution: float

    def write_csv(self, path) -> None:
        x0, y0, x1, y1 = self.bounds
        with open(path, "w") as fh:
            fh.write("x0,y0,x1,y1,resolution,nx,ny\n")
            fh.write(f"{x0},{y0},{x1},{y1},{self.resolution},{len(self.xs)},{len(self.ys)}\n")
            for row in self.heat:
                fh.write(",".join(f"{v:.6g}" for v in row) + "\n")


def region_heatmap(verdicts: Sequence[StreamVerdict], geo: SiteGeometry,
                   grid_res_m: float = 0.5, decay_m: float = DEFAULT_DECAY_M) -> Heatmap:
    """Heat at each grid node: sum over streams of ``max(0, score - 1)``
    decayed exponentially with distance from the stream's line of sight."""
    if not grid_res_m > 0:
        raise ValueError("grid resolution must be positive")
    x0, y0, x1, y1 = geo.bounds
    xs = x0 + grid_res_m * np.arange(int(np.floor((x1 - x0) / grid_res_m + 1e-9)) + 1)
    ys = y0 + grid_res_m * np.arange(int(np.floor((y1 - y0) / grid_res_m + 1e-9)) + 1)
    if xs.size == 0 or ys.size == 0:
        raise ValueError("empty grid")
    known = set(geo.streams)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx, gy], axis=-1)
    heat = np.zeros(gx.shape)
    for v in verdicts:
        if v.stream not in known:
            raise ValueError(f"geometry has no stream {v.stream}")
        excess = max(0.0, v.score - 1.0)
        if excess == 0.0:
            continue
        a, b = geo.segment(v.stream)
        heat += excess * np.exp(-point_segment_distance(pts, a, b) / decay_m)
    return Heatmap(xs, ys, heat, geo.bounds, grid_res_m)


# ---------------------------------------------------------------------------
# Event independence

@dataclass(frozen=True)
class DetectedEvent:
    stream: StreamId
    peak_t: float
    peak_score: float


@dataclass(frozen=True)
class IndependenceMatrix:
    streams: tuple[StreamId, ...]
    d_min: np.ndarray
    t_min: np.ndarray

    def index(self, stream: StreamId) -> int:
        return self.streams.index(stream)


def independence_matrix(geo: SiteGeometry) -> IndependenceMatrix:
    """Minimum walking time between every pair of lines of sight."""
    streams = tuple(geo.streams)
    k = len(streams)
    d = np.zeros((k, k))
    for i, j in itertools.combinations(range(k), 2):
        d[i, j] = d[j, i] = segment_distance(*geo.segment(streams[i]), *geo.segment(streams[j]))
    return IndependenceMatrix(streams, d, d / geo.v_max)


def extract_events(result: RunResult) -> list[DetectedEvent]:
    """One event per maximal run of anomalous ticks on a stream, at its peak."""
    events = []
    for j, s in enumerate(result.streams):
        flags = result.score[j] > 1.0
        i, n = 0, flags.size
        while i < n:
            if not flags[i]:
                i += 1
                continue
            e = i
            while e < n and flags[e]:
                e += 1
            seg = result.score[j, i:e]
            p = i + int(np.argmax(seg))
            events.append(DetectedEvent(s, float(result.times[p]), float(result.score[j, p])))
            i = e
    return events


@dataclass(frozen=True)
class IndependenceReport:
    pairs: tuple[tuple[int, int, bool], ...]
    all_independent: bool
    max_independent: int


def events_independent(e1: DetectedEvent, e2: DetectedEvent, m: IndependenceMatrix) -> bool:
    if e1.stream == e2.stream:
        return False
    return abs(e1.peak_t - e2.peak_t) < m.t_min[m.index(e1.stream), m.index(e2.stream)]


def independent_events(events: Sequence[DetectedEvent],
                       m: IndependenceMatrix) -> IndependenceReport:
    """Pairwise independence plus the largest mutually independent subset.

    That subset holds events on distinct streams, so its size is at most k.
    """
    g = nx.Graph()
    g.add_nodes_from(range(len(events)))
    pairs = []
    for i, j in itertools.combinations(range(len(events)), 2):
        ind = events_independent(events[i], events[j], m)
        pairs.append((i, j, ind))
        if ind:
            g.add_edge(i, j)
    best = max((len(c) for c in nx.find_cliques(g)), default=0)
    return IndependenceReport(tuple(pairs), all(p[2] for p in pairs), best)
