"""Amplify-and-forward relay with per-tone phase and amplitude actuation.

The relay hosts two unidirectional amplifier chains selected by a TDD
switch, a hardware pass delay, a discrete phase shifter in the returned
path, and a stepped attenuator used to equalize the forwarded path. The
manipulation program holds everything the attacker decided up front:
target distance, believed true distance, the expected tone grid, the
frequency-inference mode, an optional attenuation profile, and the
evolving phase-shifter state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, ChannelResponse

_TWO_PI = 2.0 * math.pi


class Direction(enum.Enum):
    """Which way the active amplifier chain points."""

    A_TO_B = "a->b"
    B_TO_A = "b->a"


class InferenceMode(enum.Enum):
    """How the attacker learns the current tone frequency."""

    COUNT_BASED = "count-based"
    ORACLE = "frequency-oracle"


@dataclass(frozen=True)
class RelayConfig:
    """Static relay hardware parameters."""

    gain_ab_db: float = 75.0
    gain_ba_db: float = 75.0
    t_relay_ns: float = 30.0
    detector_threshold_dbm: float = -40.0
    release_hysteresis_db: float = 3.0
    reaction_delay_us: float = 0.35
    phase_bits: int = 6
    attenuator_step_db: float = 0.5
    attenuator_range_db: float = 31.5

    def __post_init__(self) -> None:
        if self.gain_ab_db > 90.0 or self.gain_ba_db > 90.0:
            raise ValueError("relay gain must not exceed 90 dB")
        if not 1 <= self.phase_bits <= 12:
            raise ValueError("phase_bits must lie in [1, 12]")
        if self.reaction_delay_us < 0:
            raise ValueError("reaction delay must be non-negative")
        if self.t_relay_ns < 0:
            raise ValueError("t_relay_ns must be non-negative")
        if self.attenuator_step_db <= 0 or self.attenuator_range_db < 0:
            raise ValueError("attenuator step/range must be positive")


@dataclass
class ManipulationProgram:
    """Attacker-side plan for one ranging sweep."""

    d_set_m: float
    believed_distance_m: float
    f_start_hz: float
    f_step_hz: float
    carrier_count: int
    inference: InferenceMode = InferenceMode.COUNT_BASED
    beta_db: np.ndarray | None = None
    phase_state_rad: float = 0.0
    shifter_direction: Direction = Direction.B_TO_A

    def phase_slope_rad(self) -> float:
        return required_phase_slope(self.d_set_m, self.believed_distance_m, self.f_step_hz)


@dataclass
class RelayState:
    """Mutable switch state, owned by the TDD event loop of one run."""

    direction: Direction = Direction.B_TO_A
    last_change_us: float = 0.0
    tone_counter: int = 0


def required_phase_slope(d_set_m: float, believed_distance_m: float, f_step_hz: float) -> float:
    """Per-carrier phase increment that moves the estimate to ``d_set_m``.

    Wrapped to [0, 2*pi); zero when the target equals the believed
    distance.
    """
    if f_step_hz <= 0:
        raise ValueError("f_step_hz must be positive")
    raw = 4.0 * math.pi * f_step_hz * (d_set_m - believed_distance_m) / SPEED_OF_LIGHT
    wrapped = raw % _TWO_PI
    # A tiny negative raw value rounds to exactly 2*pi under float modulo;
    # fold it back so the result honours the half-open range.
    return 0.0 if wrapped >= _TWO_PI else wrapped


def quantize_phase(phase_rad: float, bits: int) -> float:
    """Round a phase to the nearest level of a ``bits``-wide shifter.

    The grid spans the full turn in ``2**bits`` steps; results wrap back
    into [0, 2*pi).
    """
    if not 1 <= bits <= 12:
        raise ValueError("bits must lie in [1, 12]")
    step = _TWO_PI / (1 << bits)
    return (round(phase_rad / step) * step) % _TWO_PI


def advance_phase(program: ManipulationProgram) -> float:
    """Step the shifter state by the programmed slope.

    The continuous (unquantized) state is kept in the program so rounding
    never accumulates; quantization happens when the phase is applied to a
    tone. Returns the new continuous state, wrapped to [0, 2*pi).
    """
    program.phase_state_rad = (program.phase_state_rad + program.phase_slope_rad()) % _TWO_PI
    return program.phase_state_rad


def infer_tone_frequency(
    program: ManipulationProgram,
    counter: int,
    true_frequency_hz: float | None = None,
) -> float:
    """Frequency the attacker assigns to the tone with the given counter.

    Count-based mode walks the programmed grid and raises
    ``ValueError("sweep overrun")`` past its end. Oracle mode models a
    spectrum-sensing attacker and returns the true frequency.
    """
    if program.inference is InferenceMode.ORACLE:
        if true_frequency_hz is None:
            raise ValueError("oracle inference needs the true tone frequency")
        return true_frequency_hz
    if counter < 0:
        raise ValueError("counter must be non-negative")
    if counter >= program.carrier_count:
        raise ValueError("sweep overrun")
    return program.f_start_hz + counter * program.f_step_hz


def forward_tone(
    direction: Direction,
    in_gain: complex,
    frequency_hz: float,
    config: RelayConfig,
    program: ManipulationProgram | None = None,
    tone_index: int = 0,
    state: RelayState | None = None,
) -> complex | None:
    """Apply one pass through the relay to a tone's complex gain.

    Multiplies in the chain gain for the travel direction and the phase of
    the hardware pass delay. With an active program, the chain holding the
    phase shifter (``program.shifter_direction``, the returned path by
    default) additionally picks up the quantized shifter state, and the
    forwarded path (A->B) the attenuation profile entry for
    ``tone_index``. When a switch state is supplied and points the other
    way the tone is dropped: ``None`` is returned and the caller records a
    lost tone.
    """
    if state is not None and state.direction is not direction:
        return None

    gain_db = config.gain_ab_db if direction is Direction.A_TO_B else config.gain_ba_db
    out = in_gain * 10.0 ** (gain_db / 20.0)
    out = out * np.exp(-1j * _TWO_PI * frequency_hz * config.t_relay_ns * 1e-9)

    if program is not None:
        if direction is program.shifter_direction:
            applied = quantize_phase(program.phase_state_rad, config.phase_bits)
            out = out * np.exp(-1j * applied)
        if direction is Direction.A_TO_B and program.beta_db is not None:
            if not 0 <= tone_index < program.beta_db.size:
                raise ValueError("sweep overrun")
            out = out * 10.0 ** (-float(program.beta_db[tone_index]) / 20.0)
    return complex(out)


@dataclass(frozen=True)
class EqualizationProfile:
    """Per-carrier attenuation for the forwarded path, on the attenuator grid."""

    beta_db: np.ndarray
    saturated: np.ndarray

    def residual_db(self, asymmetry_db: np.ndarray) -> np.ndarray:
        return np.asarray(asymmetry_db, dtype=float) - self.beta_db


def equalization_profile(
    forward_response: ChannelResponse,
    reverse_response: ChannelResponse,
    config: RelayConfig,
) -> EqualizationProfile:
    """Attenuation profile flattening the forward/reverse magnitude gap.

    For each carrier the required attenuation is the dB excess of the
    forwarded over the returned path, rounded to the attenuator step and
    clamped to [0, range]. Carriers whose requirement falls outside the
    reachable range are flagged in ``saturated`` and served best-effort at
    the nearest limit.
    """
    if not np.array_equal(forward_response.frequencies_hz, reverse_response.frequencies_hz):
        raise ValueError("sweep/channel grid mismatch")
    asym_db = 20.0 * np.log10(forward_response.magnitude / reverse_response.magnitude)
    quantized = np.round(asym_db / config.attenuator_step_db) * config.attenuator_step_db
    clamped = np.clip(quantized, 0.0, config.attenuator_range_db)
    return EqualizationProfile(beta_db=clamped, saturated=quantized != clamped)
