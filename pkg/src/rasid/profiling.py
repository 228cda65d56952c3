"""Window features, silence profiles and the online profile update."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import density
from .density import KdeModel
from .trace import DataError, RssTrace, StreamId, Window

DEFAULT_L = 5
DEFAULT_ALPHA = 0.01
DEFAULT_L_UPDATE = 15
DEFAULT_BINS = 20


class FeatureKind(str, enum.Enum):
    MEAN = "mean"
    STD_DEV = "std_dev"
    VARIANCE = "variance"

    @property
    def is_dispersion(self) -> bool:
        return self is not FeatureKind.MEAN


def feature(window: Window | Sequence[float], kind: FeatureKind = FeatureKind.VARIANCE) -> float:
    """Map a window to one value; variance uses the ``l - 1`` denominator."""
    s = np.asarray(window.samples if isinstance(window, Window) else window, dtype=float)
    kind = FeatureKind(kind)
    if kind is FeatureKind.MEAN:
        if s.size < 1:
            raise ValueError("empty window")
        return float(s.mean())
    if s.size < 2:
        raise ValueError("dispersion features need at least 2 samples")
    var = float(s.var(ddof=1))
    return var if kind is FeatureKind.VARIANCE else var ** 0.5


def window_features(values, l: int, kind: FeatureKind = FeatureKind.VARIANCE) -> np.ndarray:
    """Feature of every length-``l`` sliding window over ``values``."""
    values = np.asarray(values, dtype=float)
    if l < 2:
        raise ValueError("window length must be >= 2")
    if values.size < l:
        return np.zeros(0)
    view = sliding_window_view(values, l)
    kind = FeatureKind(kind)
    if kind is FeatureKind.MEAN:
        return view.mean(axis=1)
    var = view.var(axis=1, ddof=1)
    return var if kind is FeatureKind.VARIANCE else np.sqrt(var)


def histogram_distance(a, b, bins: int = DEFAULT_BINS) -> float:
    """Euclidean distance between frequency-normalised histograms of ``a`` and
    ``b`` on shared bin edges spanning both samples."""
    if bins < 1:
        raise ValueError("bins must be positive")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    pa = np.histogram(a, edges)[0] / a.size
    pb = np.histogram(b, edges)[0] / b.size
    return float(np.sqrt(np.sum((pa - pb) ** 2)))


def linear_weights(n: int) -> np.ndarray:
    """Recency weights ``i / (n (n + 1) / 2)`` for ``i = 1..n`` (oldest first)."""
    i = np.arange(1, n + 1, dtype=float)
    return i / (n * (n + 1) / 2.0)


@dataclass(frozen=True, eq=False)
class NormalProfile:
    """Silence model for one stream.

    For dispersion features only the upper bound ``u`` exists. For the mean
    feature ``lower`` is also set and ``u`` is the upper bound.
    """

    stream: StreamId
    feature: FeatureKind
    model: KdeModel
    alpha: float
    u: float
    lower: float | None
    n: int

    @classmethod
    def from_model(cls, stream: StreamId, kind: FeatureKind, model: KdeModel,
                   alpha: float) -> "NormalProfile":
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        kind = FeatureKind(kind)
        if kind.is_dispersion:
            return cls(stream, kind, model, alpha, model.quantile(1.0 - alpha), None, model.n)
        lower = model.quantile(alpha / 2.0)
        upper = model.quantile(1.0 - alpha / 2.0)
        return cls(stream, kind, model, alpha, upper, lower, model.n)

    def score(self, x):
        """Anomaly score, above 1 exactly when ``x`` falls outside the bounds."""
        x = np.asarray(x, dtype=float)
        if self.lower is None:
            out = x / self.u
        else:
            mid = 0.5 * (self.lower + self.u)
            out = np.where(x >= mid, (x - mid) / (self.u - mid), (mid - x) / (mid - self.lower))
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        doc = {"stream": str(self.stream), "feature": self.feature.value,
               "alpha": self.alpha, "u": self.u, "kde": self.model.to_dict(), "n": self.n}
        if self.lower is not None:
            doc["lower"] = self.lower
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "NormalProfile":
        return cls(StreamId.parse(doc["stream"]), FeatureKind(doc["feature"]),
                   KdeModel.from_dict(doc["kde"]), float(doc["alpha"]), float(doc["u"]),
                   doc.get("lower"), int(doc["n"]))


def build_profile(trace: RssTrace, stream: StreamId, l: int = DEFAULT_L,
                  alpha: float = DEFAULT_ALPHA,
                  kind: FeatureKind = FeatureKind.VARIANCE) -> NormalProfile:
    """Offline phase: fit a uniform-weight KDE to every training window."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    values = trace[stream].rss
    if values.size < l + 1:
        raise DataError(f"stream {stream}: {values.size} training samples, need >= {l + 1}")
    points = window_features(values, l, kind)
    return NormalProfile.from_model(stream, kind, density.fit(points), alpha)


@dataclass(frozen=True)
class UpdatePolicy:
    l_update: int = DEFAULT_L_UPDATE
    weighting: str = "linear"

    def __post_init__(self):
        if self.l_update < 1:
            raise ValueError("l_update must be >= 1")
        if self.weighting != "linear":
            raise ValueError("only linear weighting is supported")


def maybe_update(profile: NormalProfile, group: Sequence[tuple[float, float]],
                 policy: UpdatePolicy = UpdatePolicy()) -> NormalProfile:
    """Admit a group of ``(feature, score)`` pairs if its mean score is below 1.

    Admitted values go to the back of the point buffer and the same number of
    oldest points are dropped, so the buffer length never changes. Weights are
    then reassigned linearly by recency and the bandwidth and bounds refit.
    """
    if len(group) != policy.l_update:
        raise ValueError(f"group has {len(group)} entries, expected {policy.l_update}")
    xs = np.array([g[0] for g in group], dtype=float)
    scores = np.array([g[1] for g in group], dtype=float)
    if scores.mean() >= 1.0:
        return profile
    n = profile.n
    points = np.concatenate([profile.model.points, xs])[-n:]
    model = density.fit(points, linear_weights(n))
    return NormalProfile.from_model(profile.stream, profile.feature, model, profile.alpha)


# ---------------------------------------------------------------------------
# Bundles

def save_bundle(profiles: Mapping[StreamId, NormalProfile], path, meta: dict | None = None):
    doc = {"meta": meta or {},
           "profiles": [profiles[s].to_dict() for s in sorted(profiles)]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_bundle(path) -> dict[StreamId, NormalProfile]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        profiles = [NormalProfile.from_dict(p) for p in doc["profiles"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid profile bundle: {exc}") from None
    return {p.stream: p for p in profiles}


def with_alpha(profile: NormalProfile, alpha: float) -> NormalProfile:
    """Same density, bounds recomputed at a different significance."""
    return NormalProfile.from_model(profile.stream, profile.feature, profile.model, alpha)

