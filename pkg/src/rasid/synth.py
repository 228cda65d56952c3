"""Seeded synthetic RSS traces with a walking person.

Each stream is Gaussian (or Student-t) noise around a slowly drifting mean.
While the walker is within ``influence_radius_m`` of a stream's line of
sight, that stream's standard deviation is multiplied by
``motion_std_factor``. All randomness comes from one ``numpy`` PCG64
generator seeded with ``cfg.seed``; noise is drawn up front in sorted
stream order, so two configs that differ only in drift or schedule share
the exact same noise realisation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Mapping

import numpy as np

from .geometry import point_segment_distance
from .trace import (MOTION, SILENCE, Interval, LabelTrack, RssTrace, SiteGeometry,
                    StreamId)


@dataclass(frozen=True)
class MotionSegment:
    start: float
    end: float
    path: tuple[tuple[float, float], ...]
    loc: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "path", tuple((float(x), float(y)) for x, y in self.path))
        if not self.start < self.end:
            raise ValueError(f"motion segment start {self.start} not before end {self.end}")
        if not self.path:
            raise ValueError("motion segment needs at least one waypoint")

    def position(self, t: np.ndarray) -> np.ndarray:
        """Walker position at times ``t``, constant speed along the path."""
        pts = np.array(self.path)
        if len(pts) == 1:
            return np.broadcast_to(pts[0], (len(t), 2)).copy()
        legs = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(legs)])
        frac = np.clip((np.asarray(t) - self.start) / (self.end - self.start), 0.0, 1.0)
        s = frac * cum[-1]
        return np.column_stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])])


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    duration_s: float = 600.0
    rate_hz: float = 1.0
    silence_mean: float | Mapping[str, float] = -60.0
    silence_std: float | Mapping[str, float] = 1.0
    motion_std_factor: float = 3.0
    drift_per_hour: float = 0.0
    std_drift_per_hour: float = 0.0
    noise: str = "gaussian"
    noise_dof: float = 3.0
    influence_radius_m: float = 1.5
    schedule: tuple[MotionSegment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(
            s if isinstance(s, MotionSegment) else MotionSegment(**s) for s in self.schedule))
        if not self.motion_std_factor > 1:
            raise ValueError("motion_std_factor must exceed 1")
        if not self.rate_hz > 0:
            raise ValueError("rate_hz must be positive")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.noise not in ("gaussian", "student_t"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.noise == "student_t" and not self.noise_dof > 2:
            raise ValueError("student_t noise needs dof > 2 for finite variance")
        prev_end = 0.0
        for seg in sorted(self.schedule, key=lambda s: s.start):
            if seg.start < prev_end or seg.end > self.duration_s:
                raise ValueError(f"motion segment [{seg.start}, {seg.end}) overlaps "
                                 "another or leaves [0, duration_s]")
            prev_end = seg.end

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["schedule"] = [
            {"start": s.start, "end": s.end, "path": [list(p) for p in s.path], "loc": s.loc}
            for s in self.schedule]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SynthConfig":
        doc = dict(doc)
        doc["schedule"] = tuple(MotionSegment(
            start=float(s["start"]), end=float(s["end"]),
            path=tuple(tuple(p) for p in s["path"]), loc=s.get("loc"))
            for s in doc.get("schedule", ()))
        return cls(**doc)


def _per_stream(value, streams, what: str) -> np.ndarray:
    if isinstance(value, Mapping):
        try:
            return np.array([float(value[str(s)]) for s in streams])
        except KeyError as exc:
            raise ValueError(f"{what} has no entry for stream {exc.args[0]}") from None
    return np.full(len(streams), float(value))


def generate_synthetic(cfg: SynthConfig, geo: SiteGeometry) -> tuple[RssTrace, LabelTrack]:
    """Generate a trace over ``geo.streams`` and its ground-truth labels."""
    for seg in cfg.schedule:
        for p in seg.path:
            if not geo.contains(p):
                raise ValueError(f"waypoint {p} lies outside site bounds {geo.bounds}")

    streams = tuple(sorted(geo.streams))
    n = int(math.floor(cfg.duration_s * cfg.rate_hz + 1e-9))
    t = np.arange(n) / cfg.rate_hz
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    if cfg.noise == "gaussian":
        z = rng.standard_normal((len(streams), n))
    else:
        z = rng.standard_t(cfg.noise_dof, (len(streams), n))
        z *= math.sqrt((cfg.noise_dof - 2) / cfg.noise_dof)

    mu = _per_stream(cfg.silence_mean, streams, "silence_mean")
    sigma = _per_stream(cfg.silence_std, streams, "silence_std")
    hours = t / 3600.0
    mean = mu[:, None] + cfg.drift_per_hour * hours[None, :]
    std = np.maximum(sigma[:, None] + cfg.std_drift_per_hour * hours[None, :], 1e-6)

    gain = np.ones((len(streams), n))
    for seg in cfg.schedule:
        m = (t >= seg.start) & (t < seg.end)
        if not m.any():
            continue
        pos = seg.position(t[m])
        for j, s in enumerate(streams):
            a, b = geo.segment(s)
            near = point_segment_distance(pos, a, b) <= cfg.influence_radius_m
            gain[j, np.flatnonzero(m)[near]] = cfg.motion_std_factor

    rss = mean + std * gain * z
    trace = RssTrace.from_arrays(t, {s: rss[j] for j, s in enumerate(streams)})
    return trace, schedule_labels(cfg.schedule, cfg.duration_s)


def schedule_labels(schedule, duration_s: float) -> LabelTrack:
    """Motion intervals exactly as scheduled, silence filling the gaps."""
    ivs = []
    cursor = 0.0
    for seg in sorted(schedule, key=lambda s: s.start):
        if seg.start > cursor:
            ivs.append(Interval(cursor, seg.start, SILENCE))
        ivs.append(Interval(seg.start, seg.end, MOTION, seg.loc))
        cursor = seg.end
    if cursor < duration_s:
        ivs.append(Interval(cursor, duration_s, SILENCE))
    return LabelTrack(tuple(ivs))


# ---------------------------------------------------------------------------
# Reference office testbed: 4 APs x 3 MPs in a 20 m x 14 m floor.

OFFICE_NODES = {
    "AP1": (1.0, 1.0), "AP2": (19.0, 1.0), "AP3": (19.0, 13.0), "AP4": (1.0, 13.0),
    "MP1": (10.0, 7.0), "MP2": (5.0, 10.0), "MP3": (15.0, 4.0),
}

# one loop visits every quadrant; walking speed ~1 m/s
OFFICE_LOOP = ((3.0, 3.0), (10.0, 3.5), (17.0, 3.0), (17.0, 7.0), (12.0, 10.5),
               (17.0, 11.0), (10.0, 11.5), (3.0, 11.0), (3.0, 7.0), (8.0, 6.0), (3.0, 3.0))


def office_geometry() -> SiteGeometry:
    streams = tuple(StreamId(f"AP{i}", f"MP{j}") for i in range(1, 5) for j in range(1, 4))
    return SiteGeometry(OFFICE_NODES, streams, v_max=1.5, bounds=(0.0, 0.0, 20.0, 14.0))


def office_config(seed: int = 2012, duration_s: float = 4500.0,
                  motion: tuple[tuple[float, float], ...] = ((600, 1200), (1800, 2400),
                                                              (3300, 3900)),
                  **overrides) -> SynthConfig:
    """Synthetic counterpart of a 75-minute office recording.

    Per-stream silence levels follow a log-distance path loss, per-stream
    noise levels are drawn from the seed, and the walker repeats
    ``OFFICE_LOOP`` during each motion interval.
    """
    geo = office_geometry()
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    means, stds = {}, {}
    for s in sorted(geo.streams):
        a, b = geo.segment(s)
        d = float(np.linalg.norm(a - b))
        means[str(s)] = round(-35.0 - 25.0 * math.log10(d), 2)
        stds[str(s)] = round(float(rng.uniform(1.0, 2.0)), 3)
    loop_len = sum(math.dist(p, q) for p, q in zip(OFFICE_LOOP, OFFICE_LOOP[1:]))
    schedule = []
    for i, (start, end) in enumerate(motion):
        laps = max(1, round((end - start) / loop_len))
        path = OFFICE_LOOP + OFFICE_LOOP[1:] * (laps - 1)
        schedule.append(MotionSegment(float(start), float(end), path, loc=None))
    cfg = SynthConfig(seed=seed, duration_s=duration_s, silence_mean=means,
                      silence_std=stds, motion_std_factor=8.0,
                      std_drift_per_hour=0.2, influence_radius_m=2.5,
                      schedule=tuple(schedule))
    return replace(cfg, **overrides) if overrides else cfg
