"""Trajectory shape classification from a position trace."""

from __future__ import annotations

import math

import numpy as np

LINE_TOLERANCE = 0.02  # max perpendicular deviation / path length
CIRCLE_TOLERANCE = 0.02  # max radial residual / fitted radius
CIRCLE_MIN_SWEEP_DEG = 180.0
REVERSAL_DEG = 60.0
MIN_REVERSALS = 3
MIN_FRAMES = 10


class UnclassifiableTrajectory(ValueError):
    pass


def path_length(points: np.ndarray) -> float:
    return float(np.hypot(*np.diff(points, axis=0).T).sum())


def line_deviation(points: np.ndarray) -> float:
    """Largest distance from the total-least-squares line, over path length."""
    length = path_length(points)
    if length == 0:
        return math.inf
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[1]
    return float(np.abs(centered @ normal).max() / length)


def fit_circle(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Algebraic least-squares circle: x^2 + y^2 + Dx + Ey + F = 0."""
    x, y = points[:, 0], points[:, 1]
    a = np.column_stack([x, y, np.ones_like(x)])
    b = -(x * x + y * y)
    (d, e, f), *_ = np.linalg.lstsq(a, b, rcond=None)
    center = np.array([-d / 2, -e / 2])
    r2 = center @ center - f
    return center, math.sqrt(r2) if r2 > 0 else 0.0


def circle_fit_quality(points: np.ndarray) -> tuple[float, float]:
    """(relative radial residual, swept angle in degrees) of the best circle."""
    center, radius = fit_circle(points)
    if radius == 0:
        return math.inf, 0.0
    rel = points - center
    residual = np.abs(np.hypot(rel[:, 0], rel[:, 1]) - radius).max() / radius
    theta = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    return float(residual), float(abs(math.degrees(theta[-1] - theta[0])))


def heading_reversals(points: np.ndarray, threshold_deg: float = REVERSAL_DEG) -> int:
    steps = np.diff(points, axis=0)
    steps = steps[np.hypot(steps[:, 0], steps[:, 1]) > 1e-12]
    if len(steps) < 2:
        return 0
    headings = np.degrees(np.arctan2(steps[:, 1], steps[:, 0]))
    turns = (np.diff(headings) + 180.0) % 360.0 - 180.0
    return int((np.abs(turns) > threshold_deg).sum())


def classify_points(points: np.ndarray) -> str:
    points = np.asarray(points, dtype=float)
    if len(points) < MIN_FRAMES:
        raise ValueError(f"need at least {MIN_FRAMES} frames, got {len(points)}")
    if line_deviation(points) < LINE_TOLERANCE:
        return "linear"
    residual, sweep = circle_fit_quality(points)
    if residual < CIRCLE_TOLERANCE and sweep >= CIRCLE_MIN_SWEEP_DEG:
        return "circular"
    if heading_reversals(points) >= MIN_REVERSALS:
        return "zigzag"
    raise UnclassifiableTrajectory("trace fits none of linear, circular or zigzag")


def classify_trajectory(trace, object_id: str) -> str:
    return classify_points(trace.positions[:, trace.index(object_id)])
