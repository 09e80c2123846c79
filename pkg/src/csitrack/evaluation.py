"""Trajectory quality metrics: stationary jitter and aligned trajectory error.

Estimated and ground-truth trajectories come from systems with unrelated
coordinate frames, so before differencing them both are translated to start
at the origin and the estimate is rotated (never scaled or mirrored) to
minimize the RMSE against the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Trajectory


def jitter(trajectory: Trajectory) -> float:
    """Spread of positions about their centroid: sqrt(mean ||p_i - mean||^2).

    The precision metric for a stationary target.
    """
    if len(trajectory) < 2:
        raise ValueError("jitter needs at least 2 points")
    centered = trajectory.positions - trajectory.positions.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))


@dataclass(frozen=True)
class AlignedError:
    """Per-point position errors after translate+rotate alignment."""

    errors: np.ndarray
    rotation: float

    def __post_init__(self):
        errors = np.asarray(self.errors, dtype=float)
        if np.any(errors < 0):
            raise ValueError("errors must be non-negative")
        object.__setattr__(self, "errors", errors)

    @property
    def median(self) -> float:
        return float(np.median(self.errors))

    def percentile(self, q) -> float:
        return float(np.percentile(self.errors, q))


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def fit_rotation(source: np.ndarray, target: np.ndarray) -> float:
    """Angle of the pure rotation minimizing ||R(angle) source - target||.

    Closed form of the 2D orthogonal Procrustes problem restricted to
    determinant +1 (rotation only, no reflection).
    """
    cross = np.sum(source[:, 0] * target[:, 1] - source[:, 1] * target[:, 0])
    dot = np.sum(source * target)
    return float(np.arctan2(cross, dot))


def resample_positions(trajectory: Trajectory, timestamps: np.ndarray) -> np.ndarray:
    """Linearly interpolate a trajectory's positions at the given timestamps."""
    x = np.interp(timestamps, trajectory.timestamps, trajectory.positions[:, 0])
    y = np.interp(timestamps, trajectory.timestamps, trajectory.positions[:, 1])
    return np.column_stack([x, y])


def align(estimate: Trajectory, truth: Trajectory) -> AlignedError:
    """Point-by-point error after shift-and-rotate (never scale) alignment.

    The truth is resampled onto the estimate's timestamps when the two
    timebases differ, both are translated so their first points are the
    origin, and the estimate is rotated by the RMSE-minimizing angle.
    """
    if len(estimate) < 2 or len(truth) < 2:
        raise ValueError("alignment needs at least 2 points per trajectory")
    if len(estimate) == len(truth) and np.array_equal(estimate.timestamps, truth.timestamps):
        truth_positions = truth.positions
    else:
        truth_positions = resample_positions(truth, estimate.timestamps)
    source = estimate.positions - estimate.positions[0]
    target = truth_positions - truth_positions[0]
    angle = fit_rotation(source, target)
    residual = source @ rotation_matrix(angle).T - target
    return AlignedError(np.hypot(residual[:, 0], residual[:, 1]), angle)


@dataclass(frozen=True)
class ErrorCdf:
    """Empirical CDF over pooled per-point errors."""

    levels: np.ndarray
    fractions: np.ndarray
    median: float


def error_cdf(results) -> ErrorCdf:
    """Pool per-point errors from AlignedError results (or raw arrays)."""
    pools = [
        np.asarray(r.errors if isinstance(r, AlignedError) else r, dtype=float).ravel()
        for r in results
    ]
    if not pools or sum(p.size for p in pools) == 0:
        raise ValueError("error_cdf needs at least one error value")
    pooled = np.sort(np.concatenate(pools))
    fractions = np.arange(1, pooled.size + 1) / pooled.size
    return ErrorCdf(pooled, fractions, float(np.median(pooled)))
