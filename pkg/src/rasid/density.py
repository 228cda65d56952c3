"""Weighted Epanechnikov kernel density estimation.

A :class:`KdeModel` is a finite mixture of Epanechnikov kernels sharing one
bandwidth. Because the kernel is a polynomial on its support the CDF has a
closed form, so quantiles are found by bisecting an exact CDF rather than a
numerical integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SCOTT_CONSTANT = 2.345
#: asymptotic two-sample KS critical coefficient at the 0.05 level
KS_C_005 = 1.358


def epanechnikov(q):
    """Epanechnikov kernel, ``0.75 (1 - q^2)`` on ``|q| <= 1`` and zero outside."""
    q = np.asarray(q, dtype=float)
    out = np.where(np.abs(q) <= 1.0, 0.75 * (1.0 - q * q), 0.0)
    return float(out) if out.ndim == 0 else out


def _kernel_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.25 * (2.0 + 3.0 * u - u ** 3)


def scott_bandwidth(sigma_hat: float, n: int) -> float:
    """Scott's rule for the Epanechnikov kernel: ``2.345 sigma n^-0.2``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sigma_hat > 0:
        raise ValueError("sigma_hat must be positive (constant data: degenerate_bandwidth)")
    return SCOTT_CONSTANT * sigma_hat * n ** -0.2


def degenerate_bandwidth(center: float) -> float:
    """Bandwidth used when every point coincides."""
    return max(0.01, 1e-3 * abs(center))


@dataclass(frozen=True, eq=False)
class KdeModel:
    points: np.ndarray
    weights: np.ndarray
    bandwidth: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("KdeModel needs a non-empty 1-d point set")
        if w.shape != pts.shape:
            raise ValueError("points and weights differ in length")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def support(self) -> tuple[float, float]:
        return (float(self.points.min() - self.bandwidth),
                float(self.points.max() + self.bandwidth))

    def pdf(self, x):
        return pdf(self, x)

    def cdf(self, x):
        return cdf(self, x)

    def quantile(self, p: float) -> float:
        return quantile(self, p)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist(),
                "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, doc: dict) -> "KdeModel":
        return cls(np.asarray(doc["points"]), np.asarray(doc["weights"]),
                   float(doc["bandwidth"]))


def weighted_std(points, weights) -> float:
    mean = float(np.dot(weights, points))
    return math.sqrt(max(float(np.dot(weights, (points - mean) ** 2)), 0.0))


def fit(points: Sequence[float], weights: Sequence[float] | None = None) -> KdeModel:
    """Fit a KDE; omitted weights mean uniform ``1/n``.

    The bandwidth comes from Scott's rule on the weighted standard deviation.
    If that is zero (all points equal) the bandwidth falls back to
    ``max(0.01, 1e-3 |mean|)`` so the model is still a proper density.
    """
    pts = np.asarray(points, dtype=float).ravel()
    if pts.size == 0:
        raise ValueError("cannot fit a density to an empty point set")
    if weights is None:
        w = np.full(pts.size, 1.0 / pts.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != pts.shape:
            raise ValueError("points and weights differ in length")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        w = w / w.sum()
    # equal points can leave rounding residue in the weighted std
    sd = weighted_std(pts, w) if np.ptp(pts) > 0 else 0.0
    if sd > 0:
        h = scott_bandwidth(sd, pts.size)
    else:
        h = degenerate_bandwidth(float(np.dot(w, pts)))
    return KdeModel(pts, w, h)


def pdf(model: KdeModel, x):
    x = np.asarray(x, dtype=float)
    q = (x[..., None] - model.points) / model.bandwidth
    out = (epanechnikov(q) @ model.weights) / model.bandwidth
    return float(out) if out.ndim == 0 else out


def cdf(model: KdeModel, x):
    x = np.asarray(x, dtype=float)
    u = (x[..., None] - model.points) / model.bandwidth
    out = np.clip(_kernel_cdf(u) @ model.weights, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def quantile(model: KdeModel, p: float, max_iter: int = 200) -> float:
    """Leftmost ``x`` with ``cdf(x) >= p``, by bisection on the support.

    Iterates until the bracket collapses to adjacent floats (or ``max_iter``),
    which puts ``cdf(x)`` within 1e-9 of ``p`` for any sane bandwidth.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    pts, w, h = model.points, model.weights, model.bandwidth
    lo, hi = model.support
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(_kernel_cdf((mid - pts) / h) @ w) < p:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class KsResult:
    statistic: float
    accept_at_0_05: bool
    critical: float


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test at the 0.05 level.

    The statistic is the largest gap between the two empirical CDFs; the
    null (same distribution) is accepted when it does not exceed
    ``1.358 sqrt((m + n) / (m n))``.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    m, n = a.size, b.size
    if m == 0 or n == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / m
    fb = np.searchsorted(b, grid, side="right") / n
    d = float(np.max(np.abs(fa - fb)))
    crit = KS_C_005 * math.sqrt((m + n) / (m * n))
    return KsResult(d, d <= crit, crit)
