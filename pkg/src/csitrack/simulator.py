"""Synthetic per-packet CSI for a moving transmitter.

The channel is a static set of departure paths per AP; motion enters only
through the per-path displacement phase, each AP's clock mismatch enters as a
packet-wide phase (linear drift plus a random-walk jitter), and the receiver
adds circular Gaussian noise and optional 8-bit quantization. This is the
ground-truth oracle used by every estimator test: given the same config and
seed the output is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import CsiRecord, ArrayGeometry, Trajectory, TWO_PI, steering_matrix

#: Largest clock offset the WiFi standard tolerates, Hz.
MAX_FREQUENCY_OFFSET = 200e3


@dataclass(frozen=True)
class PropagationPath:
    """One departure path: angle (radians) and complex attenuation."""

    aod: float
    gain: complex

    def __post_init__(self):
        if not np.isfinite(self.aod):
            raise ValueError("aod must be finite")
        gain = complex(self.gain)
        if not (np.isfinite(gain.real) and np.isfinite(gain.imag)) or abs(gain) == 0:
            raise ValueError("gain must be finite and nonzero")
        object.__setattr__(self, "gain", gain)


@dataclass(frozen=True)
class ChannelSpec:
    """Static multipath description: a tuple of paths per AP id."""

    paths: dict

    def __post_init__(self):
        cleaned = {}
        for ap_id, ap_paths in self.paths.items():
            ap_paths = tuple(ap_paths)
            if len(ap_paths) < 1:
                raise ValueError(f"AP {ap_id!r} needs at least one path")
            cleaned[str(ap_id)] = ap_paths
        object.__setattr__(self, "paths", cleaned)

    @property
    def ap_ids(self):
        return tuple(sorted(self.paths))


@dataclass(frozen=True)
class OffsetModel:
    """Packet-wide phase between one AP's clock and the transmitter's.

    nu_p = initial_phase + 2*pi*frequency_offset*(p*packet_interval) + walk_p,
    where walk is a zero-start random walk with the given per-packet std. The
    walk term makes the phase unpredictable packet-to-packet, which is what a
    tracking method must survive; its default magnitude is a free parameter.
    """

    initial_phase: float = 0.0
    frequency_offset: float = 20e3
    phase_jitter_std: float = 0.05

    def __post_init__(self):
        if abs(self.frequency_offset) > MAX_FREQUENCY_OFFSET:
            raise ValueError(f"|frequency_offset| must be <= {MAX_FREQUENCY_OFFSET:g} Hz")
        if not np.isfinite(self.initial_phase):
            raise ValueError("initial_phase must be finite")
        if not (np.isfinite(self.phase_jitter_std) and self.phase_jitter_std >= 0):
            raise ValueError("phase_jitter_std must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    """Everything a simulation run needs besides the waypoints."""

    geometry: ArrayGeometry
    channel: ChannelSpec
    offsets: dict
    packet_interval: float = 0.006
    snr_db: float = math.inf
    quantize: bool = False
    rng_seed: int = 0
    amplitude_drift_std: float = 0.0

    def __post_init__(self):
        if not self.packet_interval > 0:
            raise ValueError("packet_interval must be positive")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("snr_db must be finite or +inf (noise off)")
        if not (np.isfinite(self.amplitude_drift_std) and self.amplitude_drift_std >= 0):
            raise ValueError("amplitude_drift_std must be >= 0")
        offsets = {str(k): v for k, v in self.offsets.items()}
        if set(offsets) != set(self.channel.paths):
            raise ValueError("offsets must provide a model for exactly the channel's APs")
        object.__setattr__(self, "offsets", offsets)


def channel_at(paths, geometry: ArrayGeometry, position_offset=(0.0, 0.0)) -> np.ndarray:
    """Wireless channel H for a transmitter displaced by ``position_offset``.

    H = A diag(exp(-2j*pi*(r_k . offset)/lambda)) F: each path's attenuation
    picks up the phase of the extra path length along its departure direction.
    A zero offset returns the reference channel A F.
    """
    aods = np.array([p.aod for p in paths], dtype=float)
    gains = np.array([p.gain for p in paths], dtype=complex)
    offset = np.asarray(position_offset, dtype=float)
    matrix = steering_matrix(geometry, aods)
    along_path = np.cos(aods) * offset[0] + np.sin(aods) * offset[1]
    motion_phase = np.exp(-2j * np.pi * along_path / geometry.wavelength)
    return matrix @ (gains * motion_phase)


def offset_phase(packet_index: int, model: OffsetModel, packet_interval: float, jitter: float = 0.0) -> float:
    """Packet-wide phase nu_p for the given packet."""
    return model.initial_phase + TWO_PI * model.frequency_offset * (packet_index * packet_interval) + jitter


def apply_offset(csi: np.ndarray, packet_index: int, model: OffsetModel,
                 packet_interval: float = 0.006, jitter: float = 0.0) -> np.ndarray:
    """Rotate a CSI vector by the packet-wide clock phase e^{j nu_p}.

    ``jitter`` is the accumulated random-walk value for this packet; see
    :func:`jitter_walk`. The factor has unit modulus, so per-antenna
    magnitudes and the relative phases between antennas are untouched.
    """
    nu = offset_phase(packet_index, model, packet_interval, jitter)
    return np.asarray(csi, dtype=complex) * np.exp(1j * nu)


def jitter_walk(model: OffsetModel, num_packets: int, rng: np.random.Generator) -> np.ndarray:
    """Accumulated phase-jitter random walk, zero at the first packet."""
    walk = np.zeros(num_packets)
    if model.phase_jitter_std > 0 and num_packets > 1:
        steps = rng.normal(0.0, model.phase_jitter_std, num_packets - 1)
        walk[1:] = np.cumsum(steps)
    return walk


def add_noise_and_quantize(csi: np.ndarray, snr_db: float, quantize: bool,
                           rng: np.random.Generator) -> np.ndarray:
    """Receiver impairments: circular Gaussian noise, then 8-bit quantization.

    Noise power is the vector's mean per-antenna power divided by
    10^(snr_db/10); snr_db=+inf disables noise. Quantization scales so the
    largest |real or imaginary| component maps to 127, rounds to signed 8-bit
    and returns the dequantized floats (the scale is retained), bounding the
    per-component round-trip error by max_component/254.
    """
    csi = np.asarray(csi, dtype=complex)
    out = csi
    if math.isfinite(snr_db):
        signal_power = np.mean(np.abs(csi) ** 2)
        sigma = math.sqrt(signal_power * 10.0 ** (-snr_db / 10.0) / 2.0)
        parts = rng.standard_normal((2, csi.size))
        out = csi + sigma * (parts[0] + 1j * parts[1])
    if quantize:
        out = _quantize_8bit(out)
    return out


def _quantize_8bit(csi: np.ndarray) -> np.ndarray:
    peak = max(np.max(np.abs(csi.real)), np.max(np.abs(csi.imag)))
    if peak == 0:
        return csi.copy()
    step = peak / 127.0
    return (np.round(csi.real / step) + 1j * np.round(csi.imag / step)) * step


def resample_waypoints(waypoints: Trajectory, packet_interval: float) -> Trajectory:
    """Linearly interpolate waypoints onto the packet-interval grid."""
    times = waypoints.timestamps
    duration = times[-1] - times[0]
    count = int(math.floor(duration / packet_interval + 1e-9)) + 1
    grid = times[0] + packet_interval * np.arange(count)
    x = np.interp(grid, times, waypoints.positions[:, 0])
    y = np.interp(grid, times, waypoints.positions[:, 1])
    return Trajectory(np.column_stack([x, y]), grid)


def simulate_trajectory(config: SimConfig, waypoints: Trajectory) -> dict:
    """Emit one CsiRecord stream per AP for a transmitter following waypoints.

    Each packet is channel_at -> apply_offset -> add_noise_and_quantize. APs
    draw from independent child RNG streams of ``config.rng_seed`` (assigned
    in sorted AP order), so per-AP streams may be regenerated independently
    and the whole output is reproducible.
    """
    grid = resample_waypoints(waypoints, config.packet_interval)
    offsets_from_start = grid.positions - grid.positions[0]
    num_packets = len(grid)
    ap_ids = config.channel.ap_ids
    children = np.random.SeedSequence(config.rng_seed).spawn(len(ap_ids))
    streams = {}
    for ap_id, child in zip(ap_ids, children):
        rng = np.random.default_rng(child)
        model = config.offsets[ap_id]
        base_paths = config.channel.paths[ap_id]
        walk = jitter_walk(model, num_packets, rng)
        drift = _amplitude_drift(config, len(base_paths), num_packets, rng)
        records = []
        for p in range(num_packets):
            paths = base_paths
            if drift is not None:
                paths = tuple(replace(path, gain=path.gain * d)
                              for path, d in zip(base_paths, drift[p]))
            csi = channel_at(paths, config.geometry, offsets_from_start[p])
            csi = apply_offset(csi, p, model, config.packet_interval, walk[p])
            csi = add_noise_and_quantize(csi, config.snr_db, config.quantize, rng)
            records.append(CsiRecord(ap_id, p, float(grid.timestamps[p]), csi))
        streams[ap_id] = records
    return streams


def _amplitude_drift(config: SimConfig, num_paths: int, num_packets: int,
                     rng: np.random.Generator):
    """Optional slow per-path |gain| random walk (robustness testing only)."""
    if config.amplitude_drift_std == 0:
        return None
    steps = rng.normal(0.0, config.amplitude_drift_std, (num_packets - 1, num_paths))
    log_walk = np.vstack([np.zeros(num_paths), np.cumsum(steps, axis=0)])
    return np.exp(log_walk)


def square_waypoints(side=0.1, speed=0.05, start=(0.0, 0.0), start_time=0.0) -> Trajectory:
    """Counter-clockwise square path traversed at constant speed."""
    if side <= 0 or speed <= 0:
        raise ValueError("side and speed must be positive")
    x0, y0 = start
    corners = np.array([
        [x0, y0],
        [x0 + side, y0],
        [x0 + side, y0 + side],
        [x0, y0 + side],
        [x0, y0],
    ])
    times = start_time + (side / speed) * np.arange(5)
    return Trajectory(corners, times)


def stationary_waypoints(duration, position=(0.0, 0.0), start_time=0.0) -> Trajectory:
    """Target that does not move for ``duration`` seconds."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    pos = np.asarray(position, dtype=float)
    return Trajectory(np.vstack([pos, pos]), np.array([start_time, start_time + duration]))


def random_waypoints(scale=0.5, duration=6.0, packet_interval=0.006, seed=0,
                     start_time=0.0) -> Trajectory:
    """Smooth random wander: a few low-frequency sinusoids per axis.

    The combined x/y span is normalized to ``scale`` meters, keeping
    per-packet displacements far below lambda/2 at WiFi packet rates.
    """
    rng = np.random.default_rng(seed)
    count = int(math.floor(duration / packet_interval + 1e-9)) + 1
    t = packet_interval * np.arange(count)
    positions = np.empty((count, 2))
    for axis in range(2):
        freqs = rng.uniform(0.05, 0.25, 3)
        amps = rng.uniform(0.2, 1.0, 3)
        phases = rng.uniform(0.0, TWO_PI, 3)
        positions[:, axis] = np.sum(
            amps[:, None] * np.sin(TWO_PI * freqs[:, None] * t + phases[:, None]), axis=0
        )
    span = positions.max(axis=0) - positions.min(axis=0)
    positions *= scale / max(np.max(span), 1e-12)
    return Trajectory(positions - positions[0], start_time + t)
