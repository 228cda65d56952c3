"""RSS trace data model, file ingestion and windowing.

Traces are JSON Lines (``{"t": .., "stream": "AP1-MP1", "rss": ..}`` per
line) or CSV with a ``t,stream,rss`` header. Labels are JSON Lines
``{"start": .., "end": .., "label": "motion"|"silence"}`` with an optional
``loc`` tag, and geometry is a single JSON document.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

#: consecutive missing ticks tolerated before a stream is marked invalid
MAX_CARRY_FORWARD = 5


class DataError(ValueError):
    """Input data is malformed or violates a precondition."""


class TraceFormatError(DataError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True, order=True)
class StreamId:
    ap: str
    mp: str

    def __post_init__(self):
        if not self.ap or not self.mp:
            raise ValueError("stream endpoints must be non-empty names")

    @classmethod
    def parse(cls, text: str) -> "StreamId":
        ap, sep, mp = text.strip().partition("-")
        if not sep or not ap or not mp:
            raise ValueError(f"bad stream id {text!r}, expected '<AP>-<MP>'")
        return cls(ap, mp)

    def __str__(self) -> str:
        return f"{self.ap}-{self.mp}"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StreamSeries:
    t: np.ndarray
    rss: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "rss", _frozen(self.rss))
        if self.t.shape != self.rss.shape:
            raise ValueError("time and rss arrays differ in length")

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class RssTrace:
    """Time-ordered RSS samples grouped per stream."""

    series: Mapping[StreamId, StreamSeries] = field(default_factory=dict)

    def __post_init__(self):
        ordered = {s: self.series[s] for s in sorted(self.series)}
        object.__setattr__(self, "series", ordered)

    @property
    def streams(self) -> tuple[StreamId, ...]:
        return tuple(self.series)

    @property
    def k(self) -> int:
        return len(self.series)

    def __getitem__(self, stream: StreamId) -> StreamSeries:
        return self.series[stream]

    def __len__(self) -> int:
        return sum(len(s) for s in self.series.values())

    @classmethod
    def from_arrays(cls, times, data: Mapping[StreamId, Sequence[float]]) -> "RssTrace":
        return cls({s: StreamSeries(times, v) for s, v in data.items()})

    def slice(self, t0: float = -math.inf, t1: float = math.inf) -> "RssTrace":
        """Samples with ``t0 <= t < t1``."""
        out = {}
        for s, ser in self.series.items():
            m = (ser.t >= t0) & (ser.t < t1)
            out[s] = StreamSeries(ser.t[m], ser.rss[m])
        return RssTrace(out)

    def shifted(self, offset_db: float, t0: float = -math.inf) -> "RssTrace":
        """Add a constant ``offset_db`` to every sample at ``t >= t0``."""
        out = {}
        for s, ser in self.series.items():
            rss = np.where(ser.t >= t0, ser.rss + offset_db, ser.rss)
            out[s] = StreamSeries(ser.t, rss)
        return RssTrace(out)

    def t_range(self) -> tuple[float, float]:
        if not self.series:
            return (0.0, 0.0)
        lo = min(float(s.t[0]) for s in self.series.values() if len(s))
        hi = max(float(s.t[-1]) for s in self.series.values() if len(s))
        return lo, hi


@dataclass(frozen=True)
class Window:
    stream: StreamId
    end_t: float
    samples: tuple[float, ...]

    def __post_init__(self):
        if len(self.samples) < 2:
            raise ValueError("window needs at least 2 samples")

    def __len__(self) -> int:
        return len(self.samples)


def windows(trace: RssTrace, stream: StreamId, l: int) -> list[Window]:
    """Sliding windows of ``l`` samples, one per sample from the ``l``-th on."""
    if l < 2:
        raise ValueError("window length must be >= 2")
    ser = trace[stream]
    if len(ser) < l:
        return []
    view = sliding_window_view(ser.rss, l)
    return [Window(stream, float(ser.t[i + l - 1]), tuple(float(v) for v in row))
            for i, row in enumerate(view)]


# ---------------------------------------------------------------------------
# Synchronized tick grid

@dataclass(frozen=True)
class TickGrid:
    """All streams resampled onto a shared tick axis.

    ``filled`` flags ticks whose value was carried forward from an earlier
    sample; ``valid`` is false before a stream's first sample and once more
    than ``MAX_CARRY_FORWARD`` consecutive ticks have been carried.
    """

    times: np.ndarray
    streams: tuple[StreamId, ...]
    rss: np.ndarray  # (k, T)
    filled: np.ndarray
    valid: np.ndarray


def synchronize(trace: RssTrace, rate_hz: float = 1.0,
                max_carry: int = MAX_CARRY_FORWARD) -> TickGrid:
    streams = trace.streams
    lo, hi = trace.t_range()
    if not streams or len(trace) == 0:
        empty = np.zeros((len(streams), 0))
        return TickGrid(np.zeros(0), streams, empty, empty.astype(bool), empty.astype(bool))
    step = 1.0 / rate_hz
    n = int(round((hi - lo) * rate_hz)) + 1
    times = lo + step * np.arange(n)
    rss = np.full((len(streams), n), np.nan)
    for j, s in enumerate(streams):
        ser = trace[s]
        idx = np.rint((ser.t - lo) * rate_hz).astype(int)
        rss[j, idx] = ser.rss
    observed = ~np.isnan(rss)
    filled = np.zeros_like(observed)
    valid = observed.copy()
    for j in range(len(streams)):
        last = np.nan
        misses = 0
        row = rss[j]
        for i in range(n):
            if observed[j, i]:
                last = row[i]
                misses = 0
            elif not math.isnan(last):
                row[i] = last
                misses += 1
                filled[j, i] = True
                valid[j, i] = misses <= max_carry
    return TickGrid(times, streams, rss, filled, valid)


# ---------------------------------------------------------------------------
# Trace files

def _parse_record(rec: dict, path, lineno: int) -> tuple[float, StreamId, float]:
    try:
        t = float(rec["t"])
        stream = StreamId.parse(str(rec["stream"]))
        rss = float(rec["rss"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(path, lineno, f"bad record: {exc}") from None
    if not (math.isfinite(t) and math.isfinite(rss)):
        raise TraceFormatError(path, lineno, "non-finite t or rss")
    return t, stream, rss


def _iter_records(path: Path):
    with open(path, newline="") as fh:
        first = fh.readline()
        fh.seek(0)
        if first.strip().replace(" ", "").lower().startswith("t,stream,rss"):
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                yield lineno, row
            return
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise TraceFormatError(path, lineno, "record is not an object")
            yield lineno, rec


def load_trace(path) -> RssTrace:
    """Read a JSON Lines (or ``t,stream,rss`` CSV) trace.

    Per-stream timestamps must strictly increase in file order; a repeated or
    backwards timestamp raises ``DataError`` naming the stream and time.
    """
    path = Path(path)
    times: dict[StreamId, list[float]] = {}
    values: dict[StreamId, list[float]] = {}
    for lineno, rec in _iter_records(path):
        t, stream, rss = _parse_record(rec, path, lineno)
        ts = times.setdefault(stream, [])
        if ts and t <= ts[-1]:
            raise TraceFormatError(
                path, lineno, f"non-monotone timestamp on stream {stream} at t={t:g}")
        ts.append(t)
        values.setdefault(stream, []).append(rss)
    return RssTrace({s: StreamSeries(times[s], values[s]) for s in times})


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def write_trace(trace: RssTrace, path) -> int:
    """Write ``trace`` as JSON Lines ordered by (t, stream); returns line count."""
    rows = []
    for s, ser in trace.series.items():
        name = str(s)
        rows.extend((float(t), name, float(v)) for t, v in zip(ser.t, ser.rss))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w") as fh:
        for t, name, v in rows:
            fh.write(json.dumps({"t": _num(t), "stream": name, "rss": v}) + "\n")
    return len(rows)


# ---------------------------------------------------------------------------
# Labels

MOTION = "motion"
SILENCE = "silence"


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    label: str
    loc: str | None = None

    def __post_init__(self):
        if self.label not in (MOTION, SILENCE):
            raise ValueError(f"unknown label {self.label!r}")
        if not self.start < self.end:
            raise ValueError(f"interval start {self.start} not before end {self.end}")

    def contains(self, t) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class LabelTrack:
    """Ground-truth intervals, half-open ``[start, end)``, sorted and disjoint."""

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        ivs = tuple(self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for a, b in zip(ivs, ivs[1:]):
            if b.start < a.end:
                raise ValueError(f"label intervals overlap or unsorted at t={b.start}")

    def motion_intervals(self) -> list[Interval]:
        return [iv for iv in self.intervals if iv.label == MOTION]

    def labels_at(self, times) -> np.ndarray:
        """Per-time label codes: 1 motion, 0 silence, -1 uncovered."""
        times = np.asarray(times, dtype=float)
        out = np.full(times.shape, -1, dtype=int)
        for iv in self.intervals:
            m = (times >= iv.start) & (times < iv.end)
            out[m] = 1 if iv.label == MOTION else 0
        return out

    def has_motion(self, t0: float, t1: float) -> bool:
        return any(iv.start < t1 and iv.end > t0 for iv in self.motion_intervals())


def load_labels(path) -> LabelTrack:
    path = Path(path)
    ivs = []
    for lineno, rec in _iter_records(path):
        try:
            ivs.append(Interval(float(rec["start"]), float(rec["end"]),
                                str(rec["label"]), rec.get("loc")))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(path, lineno, f"bad label: {exc}") from None
    try:
        return LabelTrack(tuple(sorted(ivs, key=lambda iv: iv.start)))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_labels(labels: LabelTrack, path) -> None:
    with open(path, "w") as fh:
        for iv in labels.intervals:
            rec = {"start": _num(iv.start), "end": _num(iv.end), "label": iv.label}
            if iv.loc is not None:
                rec["loc"] = iv.loc
            fh.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# Site geometry

@dataclass(frozen=True)
class SiteGeometry:
    nodes: Mapping[str, tuple[float, float]]
    streams: tuple[StreamId, ...]
    v_max: float
    bounds: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "nodes", {k: (float(x), float(y))
                                           for k, (x, y) in self.nodes.items()})
        object.__setattr__(self, "streams", tuple(self.streams))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        for s in self.streams:
            for name in (s.ap, s.mp):
                if name not in self.nodes:
                    raise ValueError(f"stream {s} references unknown node {name!r}")
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        x0, y0, x1, y1 = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise ValueError("bounds must be [x0, y0, x1, y1] with x0<x1, y0<y1")

    def segment(self, stream: StreamId) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.nodes[stream.ap]), np.array(self.nodes[stream.mp])

    def contains(self, p) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def to_dict(self) -> dict:
        return {
            "nodes": {k: list(v) for k, v in self.nodes.items()},
            "streams": [str(s) for s in self.streams],
            "v_max": self.v_max,
            "bounds": list(self.bounds),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SiteGeometry":
        return cls(
            nodes={k: tuple(v) for k, v in doc["nodes"].items()},
            streams=tuple(StreamId.parse(s) for s in doc["streams"]),
            v_max=float(doc["v_max"]),
            bounds=tuple(doc["bounds"]),
        )


def load_geometry(path) -> SiteGeometry:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        return SiteGeometry.from_dict(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid geometry: {exc}") from None


def write_geometry(geo: SiteGeometry, path) -> None:
    Path(path).write_text(json.dumps(geo.to_dict(), indent=2) + "\n")


def stream_names(streams: Iterable[StreamId]) -> list[str]:
    return [str(s) for s in streams]
