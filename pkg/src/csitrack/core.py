"""Shared domain types and antenna-array phase math.

Conventions used throughout the package: angles are radians, positions and
wavelengths are meters, timestamps are seconds. Path angles (AoDs) live on
[0, 2*pi), measured counter-clockwise from the +x axis of the transmitter's
local frame. Antenna 0 is the phase reference of every steering vector, so
translating the whole array does not change any phase pattern.

All types here are immutable after construction and all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

#: Carrier wavelength in meters for the 5 GHz WiFi band.
DEFAULT_WAVELENGTH = 0.06


def wrap_angle(theta):
    """Wrap angle(s) into (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    wrapped = np.where(wrapped > np.pi, wrapped - TWO_PI, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def circular_distance(a, b):
    """Absolute angular separation, respecting the 2*pi wrap-around."""
    return np.abs(wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar transmit-antenna layout plus the carrier wavelength.

    ``antenna_positions`` is an (M, 2) array of coordinates in the
    transmitter's local frame. A linear layout leaves the usual theta vs.
    -theta ambiguity; configurations that need full-plane angles should use a
    non-collinear (e.g. circular) layout.
    """

    antenna_positions: np.ndarray
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        positions = np.asarray(self.antenna_positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise ValueError("antenna_positions must be an (M, 2) array")
        if positions.shape[0] < 2:
            raise ValueError("need at least 2 antennas")
        if not np.all(np.isfinite(positions)):
            raise ValueError("antenna positions must be finite")
        separations = np.hypot(
            positions[:, None, 0] - positions[None, :, 0],
            positions[:, None, 1] - positions[None, :, 1],
        )
        np.fill_diagonal(separations, np.inf)
        if np.any(separations < 1e-12):
            raise ValueError("antenna positions must be pairwise distinct")
        if not (np.isfinite(self.wavelength) and self.wavelength > 0):
            raise ValueError("wavelength must be positive and finite")
        object.__setattr__(self, "antenna_positions", positions)

    @property
    def num_antennas(self) -> int:
        return self.antenna_positions.shape[0]

    @classmethod
    def linear(cls, num_antennas=3, spacing=None, wavelength=DEFAULT_WAVELENGTH):
        """Uniform linear array along the +x axis; spacing defaults to lambda/2."""
        if spacing is None:
            spacing = wavelength / 2.0
        xs = spacing * np.arange(num_antennas)
        return cls(np.column_stack([xs, np.zeros(num_antennas)]), wavelength)

    @classmethod
    def circular(cls, num_antennas=3, spacing=0.026, wavelength=DEFAULT_WAVELENGTH):
        """Antennas equally spaced on a circle.

        ``spacing`` is the chord distance between adjacent antennas; for
        num_antennas=3 that equals the distance between any two antennas.
        """
        if num_antennas < 2:
            raise ValueError("need at least 2 antennas")
        radius = spacing / (2.0 * np.sin(np.pi / num_antennas))
        angles = TWO_PI * np.arange(num_antennas) / num_antennas
        return cls(radius * np.column_stack([np.cos(angles), np.sin(angles)]), wavelength)


def steering_matrix(geometry: ArrayGeometry, thetas) -> np.ndarray:
    """Stack steering vectors for several angles into an (M, K) matrix."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    relative = geometry.antenna_positions - geometry.antenna_positions[0]
    projection = relative @ np.vstack([np.cos(thetas), np.sin(thetas)])
    return np.exp(-2j * np.pi * projection / geometry.wavelength)


def steering_vector(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """Per-antenna relative phase pattern of a path departing at ``theta``.

    Entry q is exp(-2j*pi * (p_q - p_0) . (cos theta, sin theta) / lambda),
    so entry 0 is exactly 1. For a uniform linear array on the x axis with
    spacing d this reduces to [1, e^{-j2pi d cos(theta)/lambda}, ...].
    """
    return steering_matrix(geometry, [float(theta)])[:, 0]


def direction_unit_vector(theta: float) -> np.ndarray:
    """Unit vector (cos theta, sin theta) along a departure direction."""
    return np.array([np.cos(theta), np.sin(theta)])


@dataclass(frozen=True)
class CsiRecord:
    """One packet's CSI at one AP: a complex entry per transmit antenna."""

    ap_id: str
    packet_index: int
    timestamp: float
    csi: np.ndarray

    def __post_init__(self):
        csi = np.asarray(self.csi, dtype=complex)
        if csi.ndim != 1 or csi.size == 0:
            raise ValueError("csi must be a non-empty 1-D complex vector")
        object.__setattr__(self, "csi", csi)


@dataclass(frozen=True)
class PathSet:
    """Estimated departure angles of one AP's paths and their steering matrix.

    ``aods`` are sorted ascending when produced by the estimator; trackers may
    re-order them afterwards to keep path identity stable across windows.
    ``degenerate`` marks estimates taken from fewer spectrum peaks than paths.
    """

    ap_id: str
    aods: np.ndarray
    steering_matrix: np.ndarray
    wavelength: float = DEFAULT_WAVELENGTH
    degenerate: bool = False

    def __post_init__(self):
        aods = np.atleast_1d(np.asarray(self.aods, dtype=float))
        matrix = np.asarray(self.steering_matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[1] != aods.size:
            raise ValueError("steering_matrix must have one column per AoD")
        if not (np.isfinite(self.wavelength) and self.wavelength > 0):
            raise ValueError("wavelength must be positive and finite")
        object.__setattr__(self, "aods", aods)
        object.__setattr__(self, "steering_matrix", matrix)

    @property
    def num_paths(self) -> int:
        return self.aods.size


@dataclass(frozen=True)
class Displacement:
    """2D displacement (meters) between two consecutive packets.

    The tracking assumption keeps its magnitude well below lambda/2 per
    packet interval; violating it wraps differential phases and surfaces as
    trajectory error.
    """

    delta: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        if delta.shape != (2,):
            raise ValueError("delta must be a 2-vector")
        if not np.all(np.isfinite(delta)):
            raise ValueError("delta must be finite")
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class Trajectory:
    """Ordered 2D positions with strictly increasing timestamps."""

    positions: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        timestamps = np.asarray(self.timestamps, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise ValueError("positions must be an (N, 2) array")
        if timestamps.shape != (positions.shape[0],):
            raise ValueError("timestamps must match positions")
        if positions.shape[0] == 0:
            raise ValueError("trajectory must hold at least one point")
        if np.any(np.diff(timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "timestamps", timestamps)

    @classmethod
    def from_points(cls, points):
        """Build from an iterable of ((x, y), timestamp) pairs."""
        points = list(points)
        positions = np.array([p for p, _ in points], dtype=float)
        timestamps = np.array([t for _, t in points], dtype=float)
        return cls(positions, timestamps)

    def __len__(self) -> int:
        return self.positions.shape[0]
