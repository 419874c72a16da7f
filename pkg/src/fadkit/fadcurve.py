"""Feature-dropping curves and their normalized area.

A curve tracks a per-class metric (default: the fraction of the class's
instances still predicted as that class) while each instance's most
important features are cumulatively replaced by baseline values. The area
under the early part of the curve ([0, beta] percent dropped, trapezoidal
rule) normalized by beta times the best metric across compared methods
gives the N-AUC; lower means the attribution method found the features
that actually carry the prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nncore
from .attribution import BaselineVector, ImportanceRanking
from .errors import (ConfigError, DegenerateInputError, ExcludedCaseError,
                     ShapeError)

DEFAULT_BETA = 20.0
FULL_CURVE_PERCENT_STEP = 5.0


@dataclass
class FADCurve:
    """Ordered (percent_dropped, metric) points for one class and method."""

    points: list
    label: str = ""
    method: str = ""
    fold: object = None
    metric_name: str = "accuracy"

    def __post_init__(self):
        self.points = [(float(p), float(m)) for p, m in self.points]
        if not self.points:
            raise ConfigError("a curve needs at least one point")
        percents = np.array([p for p, _ in self.points])
        metrics = np.array([m for _, m in self.points])
        if percents[0] != 0.0:
            raise ConfigError("the first point must be at exactly 0 percent")
        if np.any(np.diff(percents) <= 0):
            raise ConfigError("percents must be strictly increasing")
        if np.any(percents > 100.0):
            raise ConfigError("percents cannot exceed 100")
        if not np.all(np.isfinite(metrics)) or np.any(metrics < 0):
            raise ValueError("metric values must be finite and nonnegative")

    @property
    def percents(self) -> np.ndarray:
        return np.array([p for p, _ in self.points])

    @property
    def metrics(self) -> np.ndarray:
        return np.array([m for _, m in self.points])

    def value_at(self, percent: float) -> float:
        """Linear interpolation between grid points."""
        p = self.percents
        if percent < p[0] or percent > p[-1]:
            raise ConfigError(f"percent {percent} outside the curve range")
        return float(np.interp(percent, p, self.metrics))

    def max_within(self, beta: float) -> float:
        """Largest metric value on [0, beta], including the interpolated
        value at beta itself."""
        p = self.percents
        m = self.metrics
        inside = m[p <= beta]
        return float(max(inside.max(), self.value_at(min(beta, p[-1]))))


def drop_features(x, dropped, baseline: BaselineVector):
    """Copy of x with the indexed features replaced by baseline values."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("drop_features operates on a single instance")
    if x.shape[0] != baseline.dim:
        raise ShapeError("instance and baseline dims must agree")
    idx = np.asarray(sorted(dropped), dtype=int)
    out = x.copy()
    if idx.size:
        if idx.min() < 0 or idx.max() >= x.shape[0]:
            raise IndexError("dropped feature index out of range")
        out[idx] = baseline.values[idx]
    return out


def drop_count_schedule(n_features: int, beta: float = DEFAULT_BETA) -> list:
    """Drop counts: every integer up to ceil(beta * d / 100) for the
    integrated region, then roughly every 5 percent out to all features."""
    if n_features < 1:
        raise ConfigError("need at least one feature")
    if not 0 < beta <= 100:
        raise ConfigError("beta must lie in (0, 100]")
    k_beta = min(n_features, math.ceil(beta * n_features / 100.0))
    counts = set(range(0, k_beta + 1))
    percent = FULL_CURVE_PERCENT_STEP
    while percent <= 100.0:
        counts.add(min(n_features, int(round(percent * n_features / 100.0))))
        percent += FULL_CURVE_PERCENT_STEP
    counts.add(n_features)
    return sorted(counts)


def _orders_matrix(rankings, n, d):
    orders = np.empty((n, d), dtype=int)
    for row, r in enumerate(rankings):
        order = r.order if isinstance(r, ImportanceRanking) else np.asarray(r, int)
        if order.shape != (d,):
            raise ShapeError(f"ranking {row} does not cover all {d} features")
        orders[row] = order
    return orders


def dropped_prediction_matrix(net, instances, rankings,
                              baseline: BaselineVector, drop_counts):
    """Predicted class for every (instance, drop count) pair.

    At drop count k, instance i has the first k entries of its own ranking
    replaced by baseline values. Returns an (n, len(drop_counts)) int array.
    """
    X = np.asarray(instances, dtype=float)
    if X.ndim != 2:
        raise ShapeError("instances must form an (n, d) matrix")
    n, d = X.shape
    if n == 0:
        raise DegenerateInputError("no instances to evaluate")
    if d != baseline.dim or d != net.input_dim:
        raise ShapeError("instances, baseline, and network dims must agree")
    orders = _orders_matrix(rankings, n, d)

    preds = np.empty((n, len(drop_counts)), dtype=int)
    rows = np.arange(n)
    for j, k in enumerate(drop_counts):
        if not 0 <= k <= d:
            raise ConfigError(f"drop count {k} out of range")
        Xk = X.copy()
        if k:
            r = np.repeat(rows, k)
            c = orders[:, :k].ravel()
            Xk[r, c] = baseline.values[c]
        preds[:, j] = nncore.predict(net, Xk)
    return preds


def fad_curve(net, instances, rankings, baseline: BaselineVector,
              class_index: int, drop_counts=None, beta: float = DEFAULT_BETA,
              label: str = "", method: str = "", fold=None) -> FADCurve:
    """Curve of subset recall against percent of features dropped.

    ``instances`` are the evaluation instances of one class; each is dropped
    by its own ranking (pass identical rankings for a class-global order).
    The metric at drop count k is the fraction of instances the model still
    assigns to ``class_index``; k=0 reproduces the undropped accuracy.
    """
    X = np.asarray(instances, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateInputError("fad_curve needs a nonempty class subset")
    d = X.shape[1]
    if drop_counts is None:
        drop_counts = drop_count_schedule(d, beta)
    preds = dropped_prediction_matrix(net, X, rankings, baseline, drop_counts)
    points = [
        (100.0 * k / d, float(np.mean(preds[:, j] == class_index)))
        for j, k in enumerate(drop_counts)
    ]
    return FADCurve(points=points, label=label, method=method, fold=fold)


def trapezoid_auc(curve: FADCurve, beta: float = DEFAULT_BETA) -> float:
    """Trapezoidal area of the metric over percent-dropped on [0, beta].

    When beta falls between grid points the curve is linearly interpolated
    at beta first. Summation uses math.fsum, so the rule is exact on
    piecewise-linear curves sampled at their breakpoints.
    """
    if beta <= 0:
        raise ConfigError("beta must be positive")
    if beta > 100:
        raise ConfigError("beta cannot exceed 100 percent")
    p = curve.percents
    m = curve.metrics
    if beta > p[-1]:
        raise ConfigError(f"curve ends at {p[-1]} percent, before beta={beta}")
    keep = p <= beta
    xs = list(p[keep])
    ys = list(m[keep])
    if xs[-1] < beta:
        ys.append(curve.value_at(beta))
        xs.append(beta)
    return math.fsum(
        (ys[k - 1] + ys[k]) / 2.0 * (xs[k] - xs[k - 1]) for k in range(1, len(xs))
    )


def n_auc(auc: float, beta: float, max_metric: float) -> float:
    """auc / (beta * max_metric), the normalized area in (0, 1].

    ``max_metric`` is the largest curve value on [0, beta] across every
    compared method for the same class; the flat-zero case is excluded.
    """
    if beta <= 0 or beta > 100:
        raise ConfigError("beta must lie in (0, 100]")
    if max_metric <= 0:
        raise ExcludedCaseError(
            "max_metric is 0: the metric vanished across the bounded range, "
            "which is excluded from curve analysis"
        )
    if auc < 0:
        raise ValueError("auc cannot be negative")
    value = auc / (beta * max_metric)
    if value == 0.0:
        raise ExcludedCaseError(
            "zero area: the metric vanished across the bounded range"
        )
    if value > 1.0 + 1e-9:
        raise ValueError(
            f"auc {auc} exceeds beta * max_metric = {beta * max_metric}; "
            "max_metric must cover every compared curve on [0, beta]"
        )
    return min(value, 1.0)


def rise_diagnostics(curve: FADCurve, beta: float = DEFAULT_BETA) -> dict:
    """Upward steps of the metric within [0, beta].

    Dropping features by importance should not raise the metric, but
    correlated features can; the rises are reported, never corrected.
    """
    p = curve.percents
    m = curve.metrics
    diffs = np.diff(m[p <= beta])
    rising = diffs[diffs > 0]
    return {
        "rising_segments": int(rising.size),
        "max_rise": float(rising.max()) if rising.size else 0.0,
    }


@dataclass
class NAUCEntry:
    """One class/method cell of the normalized-area table."""

    label: str
    method: str
    auc: float
    n_auc: float
    beta: float
    max_metric: float

    def __post_init__(self):
        if not 0.0 < self.n_auc <= 1.0:
            raise ValueError("n_auc must lie in (0, 1]")
        expected = self.auc / (self.beta * self.max_metric)
        if abs(self.n_auc - min(expected, 1.0)) > 1e-9:
            raise ValueError("n_auc inconsistent with auc / (beta * max_metric)")


def curve_to_csv(curve: FADCurve) -> str:
    """Two-column CSV (percent, metric) for one curve."""
    lines = ["percent,metric"]
    lines += [f"{p!r},{m!r}" for p, m in curve.points]
    return "\n".join(lines) + "\n"
