"""Wrap-up time analysis: one-breakpoint piecewise linear regression.

Each meeting with annotated decision intervals yields one point: x is the
minute mark where the last decision interval closes, y is how many minutes
of meeting remain after it.  A two-segment linear model is fit by exhaustive
grid search over breakpoints placed at midpoints between consecutive
distinct x values, with independent ordinary least squares on each side.
The segments are deliberately not constrained to meet at the breakpoint.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus

__all__ = [
    "WrapupPoint",
    "extract_points",
    "PiecewiseModel",
    "fit_piecewise",
    "predict_wrapup",
    "points_csv",
    "model_to_json",
    "fit_csv",
]


@dataclass(frozen=True)
class WrapupPoint:
    """Decision-completion minute x and remaining minutes y for one meeting."""

    x: float
    y: float
    clamped: bool = False

    def __post_init__(self) -> None:
        if self.x <= 0:
            raise ValueError("x must be positive minutes")
        if self.y < 0:
            raise ValueError("y must be nonnegative minutes")


def extract_points(corpus: Corpus) -> list[WrapupPoint]:
    """One point per meeting that carries decision intervals.

    Meetings without intervals are skipped with a warning.  If the last act
    precedes the end of the last interval, y is clamped to 0 and flagged.
    """
    points = []
    for meeting in corpus.meetings:
        if not meeting.decision_windows:
            warnings.warn(
                f"meeting {meeting.id!r} has no decision intervals; skipped",
                stacklevel=2,
            )
            continue
        end_s = max(hi for _, hi in meeting.decision_windows)
        last_s = meeting.acts[-1].time
        x = end_s / 60.0
        y = (last_s - end_s) / 60.0
        clamped = y < 0
        points.append(WrapupPoint(x=x, y=max(y, 0.0), clamped=clamped))
    return points


@dataclass(frozen=True)
class PiecewiseModel:
    breakpoint: float
    left_slope: float
    left_intercept: float
    right_slope: float
    right_intercept: float
    sse: float


def _ols_segment(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float, float]:
    """Least-squares affine fit; returns (slope, intercept, sse)."""
    design = np.column_stack([xs, np.ones_like(xs)])
    coef, _, _, _ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - design @ coef
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def fit_piecewise(points: Sequence[WrapupPoint]) -> PiecewiseModel:
    """Grid-search breakpoint with per-side OLS, minimizing total SSE.

    Candidate breakpoints are midpoints between consecutive distinct x
    values that leave at least two points on each side.  SSE ties go to the
    smaller breakpoint.  Points with x at or below the breakpoint belong to
    the left segment.
    """
    if len(points) < 4:
        raise ValueError("need at least 4 points to fit a piecewise model")
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    order = np.argsort(xs, kind="mergesort")
    xs, ys = xs[order], ys[order]
    distinct = np.unique(xs)
    if len(distinct) < 2:
        raise ValueError("need at least 2 distinct x values")
    best = None
    for lo, hi in zip(distinct[:-1], distinct[1:]):
        bp = 0.5 * (lo + hi)
        left = xs <= bp
        if left.sum() < 2 or (~left).sum() < 2:
            continue
        ls, li, lsse = _ols_segment(xs[left], ys[left])
        rs, ri, rsse = _ols_segment(xs[~left], ys[~left])
        sse = lsse + rsse
        if best is None or sse < best[0] - 1e-12:
            best = (sse, bp, ls, li, rs, ri)
    if best is None:
        raise ValueError("no breakpoint leaves 2 points on each side")
    sse, bp, ls, li, rs, ri = best
    return PiecewiseModel(
        breakpoint=bp, left_slope=ls, left_intercept=li,
        right_slope=rs, right_intercept=ri, sse=sse,
    )


def predict_wrapup(model: PiecewiseModel, x: float) -> tuple[float, bool]:
    """Predicted wrap-up minutes at x, floored at 0.

    Returns (minutes, floored).  x exactly at the breakpoint uses the left
    segment.
    """
    if x <= 0:
        raise ValueError("x must be positive minutes")
    if x <= model.breakpoint:
        raw = model.left_slope * x + model.left_intercept
    else:
        raw = model.right_slope * x + model.right_intercept
    if raw < 0:
        return 0.0, True
    return raw, False


def points_csv(points: Sequence[WrapupPoint]) -> str:
    lines = ["x_minutes,y_minutes,clamped"]
    for p in points:
        lines.append(f"{p.x:.12g},{p.y:.12g},{int(p.clamped)}")
    return "\n".join(lines) + "\n"


def model_to_json(model: PiecewiseModel) -> str:
    return json.dumps(
        {
            "breakpoint": model.breakpoint,
            "left": {"slope": model.left_slope, "intercept": model.left_intercept},
            "right": {"slope": model.right_slope, "intercept": model.right_intercept},
            "sse": model.sse,
        },
        sort_keys=True,
    )


def fit_csv(points: Sequence[WrapupPoint], model: PiecewiseModel) -> str:
    """Plot-ready rows: observed point plus the model's prediction."""
    lines = ["x,y,y_hat"]
    for p in sorted(points, key=lambda q: (q.x, q.y)):
        value, _ = predict_wrapup(model, p.x)
        lines.append(f"{p.x:.12g},{p.y:.12g},{value:.12g}")
    return "\n".join(lines) + "\n"
