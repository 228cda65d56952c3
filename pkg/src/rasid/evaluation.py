"""Per-tick scoring of alarm series against ground truth."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .trace import DataError, LabelTrack


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    fp_rate: float
    fn_rate: float
    precision: float
    recall: float
    f_measure: float
    latency_p90: float | None
    latencies: tuple[float, ...] = ()
    detected_intervals: int = 0
    missed_intervals: int = 0

    @classmethod
    def from_counts(cls, c: ConfusionCounts, latencies=(), missed: int = 0) -> "EvalReport":
        precision = _ratio(c.tp, c.tp + c.fp)
        recall = _ratio(c.tp, c.tp + c.fn)
        f = _ratio(2 * precision * recall, precision + recall)
        lat = tuple(float(v) for v in latencies)
        p90 = float(np.percentile(lat, 90)) if lat else None
        return cls(c.tp, c.fp, c.tn, c.fn, _ratio(c.fp, c.fp + c.tn), _ratio(c.fn, c.fn + c.tp),
                   precision, recall, f, p90, lat, len(lat), missed)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["latencies"] = list(self.latencies)
        return doc


def confusion(alarms, truth_codes) -> ConfusionCounts:
    alarms = np.asarray(alarms, dtype=bool)
    motion = np.asarray(truth_codes) == 1
    return ConfusionCounts(int(np.sum(alarms & motion)), int(np.sum(alarms & ~motion)),
                           int(np.sum(~alarms & ~motion)), int(np.sum(~alarms & motion)))


def latency(times, alarms, truth: LabelTrack) -> tuple[list[float], int]:
    """Seconds from each motion interval's start to its first alarmed tick.

    Intervals with no alarmed tick are left out of the list and counted as
    missed. Intervals with no evaluated tick at all are ignored.
    """
    times = np.asarray(times, dtype=float)
    alarms = np.asarray(alarms, dtype=bool)
    out, missed = [], 0
    for iv in truth.motion_intervals():
        m = (times >= iv.start) & (times < iv.end)
        if not m.any():
            continue
        hit = np.flatnonzero(m & alarms)
        if hit.size:
            out.append(float(times[hit[0]] - iv.start))
        else:
            missed += 1
    return out, missed


def score_alarms(times, alarms, truth: LabelTrack) -> EvalReport:
    times = np.asarray(times, dtype=float)
    alarms = np.asarray(alarms, dtype=bool)
    if times.shape != alarms.shape:
        raise ValueError("times and alarms differ in length")
    codes = truth.labels_at(times)
    if np.any(codes < 0):
        bad = times[codes < 0]
        raise DataError(f"{bad.size} evaluated tick(s) not covered by labels, first t={bad[0]:g}")
    lat, missed = latency(times, alarms, truth)
    return EvalReport.from_counts(confusion(alarms, codes), lat, missed)


def score(decisions: Sequence, truth: LabelTrack, field: str = "refined_alarm") -> EvalReport:
    """Score a decision series; ``field`` picks the refined or basic alarm."""
    times = [d.t for d in decisions]
    alarms = [getattr(d, field) for d in decisions]
    return score_alarms(times, alarms, truth)


# ---------------------------------------------------------------------------
# Comparison tables

COLUMNS = ("detector", "fn_rate", "fp_rate", "precision", "recall", "f_measure",
           "latency_p90", "missed_intervals")


def compare(reports: Mapping[str, EvalReport],
            params: Mapping[str, Mapping] | None = None) -> dict:
    if len(reports) < 2:
        raise ValueError("a comparison needs at least two reports")
    rows = []
    for name, rep in reports.items():
        if not isinstance(name, str) or not name.strip():
            raise ValueError("detector names must be non-empty")
        d = rep.to_dict()
        rows.append({c: (name if c == "detector" else d[c]) for c in COLUMNS})
    params = params or {}
    return {"columns": list(COLUMNS), "rows": rows,
            "params": {name: dict(params.get(name, {})) for name in reports}}


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4f}"
    return str(v)


def format_table(doc: dict) -> str:
    """Plain-text aligned table, numbers at 4 decimals."""
    cols = doc["columns"]
    cells = [cols] + [[_fmt(r[c]) for c in cols] for r in doc["rows"]]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w)
                               for i, (v, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_table(report: EvalReport, name: str = "detector") -> str:
    d = report.to_dict()
    return format_table({"columns": list(COLUMNS),
                         "rows": [{c: (name if c == "detector" else d[c]) for c in COLUMNS}]})


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
