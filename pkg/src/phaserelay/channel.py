"""Reciprocal narrowband propagation between antenna positions.

The medium is modeled per carrier frequency as a complex gain with the
engineering delay convention: a response with magnitude ``m`` and phase
delay ``phi`` corresponds to the complex gain ``m * exp(-1j * phi)``.
Phase delays are stored wrapped to [0, 2*pi). For a single line-of-sight
path the delay at frequency ``f`` over distance ``d`` is exactly
``2*pi*f*d/c0``; tap-delay multipath adds coherently summed echoes.

Responses are bit-for-bit reciprocal: swapping the endpoints yields
identical magnitude and phase arrays, because every quantity is derived
from the symmetric endpoint distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
"""Propagation speed used everywhere, in m/s."""

_MODEL_KINDS = ("free-space", "log-distance", "tap-delay")
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Geometry:
    """Planar antenna positions, in meters.

    Relay antenna positions may be omitted for scenarios without a relay;
    looking one up then raises ``ValueError``.
    """

    node_a: tuple[float, float] = (0.0, 0.0)
    node_b: tuple[float, float] = (1.0, 0.0)
    relay_primary: tuple[float, float] | None = None
    relay_secondary: tuple[float, float] | None = None

    def position(self, antenna: str) -> tuple[float, float]:
        try:
            pos = getattr(self, antenna)
        except AttributeError:
            raise ValueError(f"unknown antenna id: {antenna!r}") from None
        if pos is None:
            raise ValueError(f"antenna {antenna!r} has no position in this geometry")
        return pos

    def distance(self, antenna_a: str, antenna_b: str) -> float:
        """Euclidean distance between two antennas, symmetric by construction."""
        pa = self.position(antenna_a)
        pb = self.position(antenna_b)
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])


@dataclass(frozen=True)
class ChannelModelSpec:
    """Loss law and multipath description for one propagation medium.

    ``taps`` lists echoes relative to the direct path as
    ``(excess_delay_ns, complex_gain)`` where the gain is relative to the
    direct-path amplitude. An empty tap list is a pure line-of-sight link.
    ``antenna_gain_dbi`` is a flat per-link gain applied once to the
    magnitude (both endpoint antennas combined).
    """

    kind: str = "free-space"
    path_loss_exponent: float = 2.0
    reference_loss_db: float = 40.0
    taps: tuple[tuple[float, complex], ...] = ()
    antenna_gain_dbi: float = 0.0
    c0: float = field(default=SPEED_OF_LIGHT, init=False)

    def __post_init__(self) -> None:
        if self.kind not in _MODEL_KINDS:
            raise ValueError(f"unknown channel model kind: {self.kind!r}")
        if not 1.5 <= self.path_loss_exponent <= 6.0:
            raise ValueError("path_loss_exponent must lie in [1.5, 6.0]")
        for delay_ns, gain in self.taps:
            if delay_ns < 0:
                raise ValueError("tap excess delays must be non-negative")
            if abs(gain) >= 1.0:
                raise ValueError("tap gains must be weaker than the direct path")


@dataclass(frozen=True)
class ChannelResponse:
    """Sampled complex response of one directed link.

    ``phase_rad`` holds the accumulated phase delay per frequency, wrapped
    to [0, 2*pi); ``magnitude`` is the linear amplitude gain.
    """

    frequencies_hz: np.ndarray
    magnitude: np.ndarray
    phase_rad: np.ndarray
    direction: str

    def complex_gain(self) -> np.ndarray:
        """Complex gains under the delay convention mag * exp(-1j * phase)."""
        return self.magnitude * np.exp(-1j * self.phase_rad)

    @staticmethod
    def from_complex(frequencies_hz: np.ndarray, gains: np.ndarray, direction: str) -> "ChannelResponse":
        phase = (-np.angle(gains)) % _TWO_PI
        return ChannelResponse(
            frequencies_hz=np.asarray(frequencies_hz, dtype=float),
            magnitude=np.abs(gains),
            phase_rad=phase,
            direction=direction,
        )


def _path_amplitude(spec: ChannelModelSpec, dist_m: float, freqs: np.ndarray) -> np.ndarray:
    """Linear amplitude of the direct path under the selected loss law."""
    if spec.kind == "log-distance":
        loss_db = spec.reference_loss_db + 10.0 * spec.path_loss_exponent * math.log10(dist_m)
        amp = np.full(freqs.shape, 10.0 ** (-loss_db / 20.0))
    else:
        # Free-space amplitude lambda/(4*pi*d), frequency dependent.
        amp = SPEED_OF_LIGHT / (4.0 * math.pi * dist_m * freqs)
    return amp * 10.0 ** (spec.antenna_gain_dbi / 20.0)


def propagate(
    geometry: Geometry,
    spec: ChannelModelSpec,
    from_antenna: str,
    to_antenna: str,
    frequencies_hz: np.ndarray,
) -> ChannelResponse:
    """Sample the medium between two antennas at the given frequencies.

    Raises ``ValueError`` for identical endpoints, coincident antenna
    positions, or an empty/non-positive frequency grid.
    """
    if from_antenna == to_antenna:
        raise ValueError("propagation endpoints must differ")
    freqs = np.asarray(frequencies_hz, dtype=float)
    if freqs.size == 0:
        raise ValueError("frequency grid is empty")
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be strictly positive")

    dist = geometry.distance(from_antenna, to_antenna)
    if dist == 0.0:
        raise ValueError("coincident antennas")

    direction = f"{from_antenna}->{to_antenna}"
    amp = _path_amplitude(spec, dist, freqs)
    direct_delay_s = dist / SPEED_OF_LIGHT

    if spec.kind == "tap-delay" and spec.taps:
        gains = np.exp(-1j * _TWO_PI * freqs * direct_delay_s).astype(complex)
        for delay_ns, tap_gain in spec.taps:
            tau = direct_delay_s + delay_ns * 1e-9
            gains = gains + tap_gain * np.exp(-1j * _TWO_PI * freqs * tau)
        return ChannelResponse.from_complex(freqs, amp * gains, direction)

    # Pure line of sight: compute the delay phase directly so that the
    # stored phase equals (2*pi*f*d/c0) mod 2*pi to full float precision.
    phase = (_TWO_PI * freqs * dist / SPEED_OF_LIGHT) % _TWO_PI
    return ChannelResponse(
        frequencies_hz=freqs,
        magnitude=amp,
        phase_rad=phase,
        direction=direction,
    )


def received_power_dbm(tx_power_dbm: float, response: ChannelResponse, frequency_hz: float) -> float:
    """Received power at one sampled frequency of a response.

    The frequency must be present in the response grid exactly; otherwise
    ``ValueError("frequency not sampled")`` is raised.
    """
    matches = np.flatnonzero(response.frequencies_hz == frequency_hz)
    if matches.size == 0:
        raise ValueError("frequency not sampled")
    gain = float(response.magnitude[matches[0]])
    return tx_power_dbm + 20.0 * math.log10(gain)
