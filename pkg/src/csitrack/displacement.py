"""Per-packet-pair displacement recovery with clock-offset cancellation.

Projecting two consecutive CSI vectors onto the estimated steering matrix
gives per-path weights whose element-wise ratio carries, for path k, the
displacement phase -2*pi*(r_k . delta)/lambda plus a packet-wide clock term
common to all paths. Dividing each path's ratio by a reference path's ratio
cancels the clock term exactly; the remaining phases are linear in the
displacement and are solved by least squares, stacking rows from all APs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Displacement, PathSet, TWO_PI
from .errors import (
    DegenerateGeometryError,
    InsufficientPathsError,
    UnobservableDisplacementError,
    WeakPathError,
)

#: Condition-number gate for the steering matrix (rejects near-collinear AoDs).
A_CONDITION_LIMIT = 1e6
#: Condition-number gate for the stacked geometry rows.
R_CONDITION_LIMIT = 1e4
#: Path weights below this fraction of the weight-vector norm are dropped.
WEAK_PATH_RTOL = 1e-9


@dataclass(frozen=True)
class PathWeights:
    """Least-squares weights of one packet's CSI over a PathSet's columns."""

    ap_id: str
    packet_index: int
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=complex))


@dataclass(frozen=True)
class AttenuationChange:
    """Diagonal of the per-path attenuation ratio between two packets.

    Entry k estimates exp(-2j*pi*(r_k . delta)/lambda + j*(nu_2 - nu_1)).
    """

    ap_id: str
    diagonal: np.ndarray

    def __post_init__(self):
        diagonal = np.asarray(self.diagonal, dtype=complex)
        if not np.all(np.isfinite(diagonal.view(float))):
            raise ValueError("diagonal entries must be finite")
        object.__setattr__(self, "diagonal", diagonal)


def path_weights(csi: np.ndarray, paths: PathSet, packet_index: int = -1,
                 cond_limit: float = A_CONDITION_LIMIT) -> PathWeights:
    """Least-squares combination weights of ``csi`` over the steering matrix."""
    matrix = paths.steering_matrix
    if np.linalg.cond(matrix) >= cond_limit:
        raise DegenerateGeometryError(
            f"steering matrix condition number exceeds {cond_limit:g}"
        )
    weights, *_ = np.linalg.lstsq(matrix, np.asarray(csi, dtype=complex), rcond=None)
    return PathWeights(paths.ap_id, packet_index, weights)


def attenuation_change(first: PathWeights, second: PathWeights,
                       weak_rtol: float = WEAK_PATH_RTOL) -> AttenuationChange:
    """Closed-form minimizer of ||w2 - D w1|| over diagonal D.

    The problem decouples per path: D_kk = w2_k * conj(w1_k) / |w1_k|^2.
    """
    w1 = first.weights
    w2 = second.weights
    if w1.shape != w2.shape:
        raise ValueError("weight vectors must have equal length")
    threshold = weak_rtol * np.linalg.norm(w1)
    weak = np.abs(w1) <= threshold
    if np.any(weak):
        raise WeakPathError(f"vanishing weight for path(s) {np.nonzero(weak)[0].tolist()}")
    # spelled out in real arithmetic: numpy's fused complex multiply leaves a
    # rounding residue in Im(w * conj(w)), which must vanish exactly when the
    # weights are identical (a stationary target must integrate to zero)
    numerator = (
        w2.real * w1.real + w2.imag * w1.imag
        + 1j * (w2.imag * w1.real - w2.real * w1.imag)
    )
    return AttenuationChange(first.ap_id, numerator / np.abs(w1) ** 2)


def select_reference(first: PathWeights, second: PathWeights) -> int:
    """Reference path index: the one strongest in both packets.

    Dividing by the strongest path minimizes phase-noise amplification in the
    offset-cancelling ratios.
    """
    strength = np.minimum(np.abs(first.weights), np.abs(second.weights))
    return int(np.argmax(strength))


def offset_free_phases(change: AttenuationChange, ref: int) -> np.ndarray:
    """Phases of D_kk / D_ref for the non-reference paths, each in (-pi, pi].

    The packet-wide clock phase is common to every diagonal entry, so it
    cancels exactly in the ratios. No unwrapping is applied: per-packet
    displacements stay well below lambda/2, so these differential phases
    cannot wrap under the tracking assumption.
    """
    diagonal = change.diagonal
    if diagonal.size < 2:
        raise InsufficientPathsError("offset cancellation needs at least two paths")
    others = np.arange(diagonal.size) != ref
    return np.angle(diagonal[others] / diagonal[ref])


def geometry_matrix(paths: PathSet, ref: int) -> np.ndarray:
    """Rows mapping displacement to offset-free phases.

    Row k is (-2*pi/lambda) * [cos(theta_k) - cos(theta_ref),
    sin(theta_k) - sin(theta_ref)] for each non-reference path, matching the
    ordering of :func:`offset_free_phases`.
    """
    aods = paths.aods
    if aods.size < 2:
        raise InsufficientPathsError("geometry rows need at least two paths")
    others = np.arange(aods.size) != ref
    rows = np.column_stack([
        np.cos(aods[others]) - np.cos(aods[ref]),
        np.sin(aods[others]) - np.sin(aods[ref]),
    ])
    return (-TWO_PI / paths.wavelength) * rows


def _usable_subset(paths: PathSet, first: PathWeights, second: PathWeights,
                   weak_rtol: float):
    """Drop transiently-faded paths instead of failing the whole update."""
    threshold = weak_rtol * np.linalg.norm(first.weights)
    keep = np.minimum(np.abs(first.weights), np.abs(second.weights)) > threshold
    idx = np.nonzero(keep)[0]
    sub_paths = replace(
        paths, aods=paths.aods[idx], steering_matrix=paths.steering_matrix[:, idx]
    )
    sub_first = replace(first, weights=first.weights[idx])
    sub_second = replace(second, weights=second.weights[idx])
    return sub_paths, sub_first, sub_second


def displacement_rows(paths: PathSet, first: PathWeights, second: PathWeights,
                      weak_rtol: float = WEAK_PATH_RTOL):
    """One AP's offset-cancelled contribution (R, s) to the stacked solve."""
    sub_paths, sub_first, sub_second = _usable_subset(paths, first, second, weak_rtol)
    if sub_paths.num_paths < 2:
        raise InsufficientPathsError(
            f"AP {paths.ap_id!r}: {sub_paths.num_paths} usable path(s), need 2"
        )
    ref = select_reference(sub_first, sub_second)
    change = attenuation_change(sub_first, sub_second, weak_rtol)
    phases = offset_free_phases(change, ref)
    rows = geometry_matrix(sub_paths, ref)
    return rows, phases


def same_clock_rows(paths: PathSet, first: PathWeights, second: PathWeights,
                    weak_rtol: float = WEAK_PATH_RTOL):
    """Ablation rows that ignore the clock offset entirely.

    Each usable path contributes phase(D_kk) directly as
    (-2*pi/lambda) * r_k . delta, with no reference-path differencing. Any
    packet-to-packet clock phase leaks straight into every row.
    """
    sub_paths, sub_first, sub_second = _usable_subset(paths, first, second, weak_rtol)
    if sub_paths.num_paths < 1:
        raise InsufficientPathsError(f"AP {paths.ap_id!r}: no usable paths")
    change = attenuation_change(sub_first, sub_second, weak_rtol)
    phases = np.angle(change.diagonal)
    aods = sub_paths.aods
    rows = (-TWO_PI / sub_paths.wavelength) * np.column_stack([np.cos(aods), np.sin(aods)])
    return rows, phases


def estimate_displacement(per_ap_rows, cond_limit: float = R_CONDITION_LIMIT) -> Displacement:
    """Solve the stacked least-squares system for the 2D displacement.

    ``per_ap_rows`` is a sequence of (R, s) pairs, concatenated vertically
    across APs. Raises UnobservableDisplacementError when the stack has fewer
    than two rows or is too close to rank one to pin down both components.
    """
    per_ap_rows = list(per_ap_rows)
    if not per_ap_rows:
        raise UnobservableDisplacementError("no contributing APs")
    stacked_rows = np.vstack([rows for rows, _ in per_ap_rows])
    stacked_phases = np.concatenate([np.atleast_1d(phases) for _, phases in per_ap_rows])
    if stacked_rows.shape[0] < 2:
        raise UnobservableDisplacementError(
            "one equation cannot determine a 2D displacement"
        )
    singular_values = np.linalg.svd(stacked_rows, compute_uv=False)
    if singular_values[1] == 0 or singular_values[0] / singular_values[1] >= cond_limit:
        raise UnobservableDisplacementError(
            f"stacked geometry condition number exceeds {cond_limit:g}"
        )
    delta, *_ = np.linalg.lstsq(stacked_rows, stacked_phases, rcond=None)
    return Displacement(delta)
