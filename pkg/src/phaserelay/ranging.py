"""Multi-carrier phase ranging: sweep measurement and distance estimation.

A ranging round exchanges N continuous-wave tones on an evenly spaced
frequency grid. The initiator measures the accumulated two-way phase per
tone; the slope of that phase over the frequency step encodes the path
length. With step ``f_step`` the measurement is unambiguous up to
``c0 / (2 * f_step)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, ChannelResponse

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ToneSweep:
    """Grid and timing of one ranging sweep.

    Timing fields describe the TDD schedule: each tone is transmitted for
    ``tone_duration_us`` by each side with ``turnaround_gap_us`` between
    the two directions.
    """

    carrier_count: int = 40
    f_start_hz: float = 2.402e9
    f_step_hz: float = 1e6
    tone_duration_us: float = 250.0
    turnaround_gap_us: float = 150.0

    def __post_init__(self) -> None:
        if self.carrier_count < 2:
            raise ValueError("a sweep needs at least two carriers")
        if self.f_step_hz <= 0:
            raise ValueError("f_step_hz must be positive")
        if self.f_start_hz <= 0:
            raise ValueError("f_start_hz must be positive")

    def frequencies_hz(self) -> np.ndarray:
        return self.f_start_hz + self.f_step_hz * np.arange(self.carrier_count)


@dataclass(frozen=True)
class SweepObservation:
    """What the two nodes record during one sweep.

    ``two_way_phase_rad`` is the per-tone accumulated round-trip phase,
    wrapped to [0, 2*pi). The magnitude arrays are what each receiving
    side observed for the two link directions.
    """

    two_way_phase_rad: np.ndarray
    magnitude_forward: np.ndarray
    magnitude_reverse: np.ndarray
    phase_noise_sigma_rad: float = 0.0


@dataclass(frozen=True)
class DistanceEstimate:
    mean_m: float
    per_pair_m: np.ndarray
    sweep_id: int = 0


def unambiguous_range(f_step_hz: float) -> float:
    """Largest distance distinguishable at the given grid step."""
    if f_step_hz <= 0:
        raise ValueError("f_step_hz must be positive")
    return SPEED_OF_LIGHT / (2.0 * f_step_hz)


def run_sweep(
    sweep: ToneSweep,
    forward: ChannelResponse,
    reverse: ChannelResponse,
    phase_noise_sigma_rad: float = 0.0,
    rng: np.random.Generator | None = None,
    amplitude_noise_sigma_db: float = 0.0,
) -> SweepObservation:
    """Measure two-way phases and per-direction magnitudes over one sweep.

    Both responses must be sampled exactly on the sweep grid, otherwise
    ``ValueError("sweep/channel grid mismatch")`` is raised. Per-tone
    phase noise is zero-mean Gaussian on the two-way phase; amplitude
    noise, when enabled, is multiplicative log-normal per direction.
    """
    freqs = sweep.frequencies_hz()
    for resp in (forward, reverse):
        if resp.frequencies_hz.shape != freqs.shape or not np.array_equal(resp.frequencies_hz, freqs):
            raise ValueError("sweep/channel grid mismatch")
    if phase_noise_sigma_rad < 0 or amplitude_noise_sigma_db < 0:
        raise ValueError("noise sigmas must be non-negative")
    if rng is None:
        rng = np.random.default_rng()

    noise = rng.normal(0.0, phase_noise_sigma_rad, sweep.carrier_count)
    phases = (forward.phase_rad + reverse.phase_rad + noise) % _TWO_PI

    mag_fwd = forward.magnitude.copy()
    mag_rev = reverse.magnitude.copy()
    if amplitude_noise_sigma_db > 0.0:
        mag_fwd = mag_fwd * 10.0 ** (rng.normal(0.0, amplitude_noise_sigma_db, mag_fwd.size) / 20.0)
        mag_rev = mag_rev * 10.0 ** (rng.normal(0.0, amplitude_noise_sigma_db, mag_rev.size) / 20.0)

    return SweepObservation(
        two_way_phase_rad=phases,
        magnitude_forward=mag_fwd,
        magnitude_reverse=mag_rev,
        phase_noise_sigma_rad=phase_noise_sigma_rad,
    )


def estimate_distance(observation: SweepObservation, sweep: ToneSweep, sweep_id: int = 0) -> DistanceEstimate:
    """Turn a sweep observation into a distance.

    Per adjacent carrier pair the wrapped two-way phase difference maps to
    a non-negative distance below the unambiguous range. The mean is
    wrap-aware: pair angles are averaged on the circle (re-wrapped into a
    half-turn window around their circular mean) so that measurement noise
    on a near-zero slope does not alias individual pairs to the top of the
    range. Away from that seam this equals the arithmetic mean of the
    per-pair estimates.
    """
    phases = observation.two_way_phase_rad
    if phases.size != sweep.carrier_count:
        raise ValueError("sweep/channel grid mismatch")
    scale = SPEED_OF_LIGHT / (4.0 * math.pi * sweep.f_step_hz)

    pair_angles = np.diff(phases) % _TWO_PI
    per_pair_m = scale * pair_angles

    mean_angle = np.angle(np.exp(1j * pair_angles).mean()) % _TWO_PI
    # Re-wrap each pair into (mean - pi, mean + pi] and average linearly;
    # this preserves the telescoping of per-pair noise and quantization
    # errors that the plain arithmetic mean would lose at the 0/2*pi seam.
    deviations = (pair_angles - mean_angle + math.pi) % _TWO_PI - math.pi
    mean_m = float(scale * (mean_angle + deviations.mean()))

    return DistanceEstimate(mean_m=mean_m, per_pair_m=per_pair_m, sweep_id=sweep_id)
