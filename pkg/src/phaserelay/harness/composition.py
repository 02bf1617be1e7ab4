"""Glue between the physical models and the experiment runners.

This module assembles, for one measurement cell, the effective forward
and reverse responses seen by the ranging nodes: the three relayed hops,
the amplifier chains with their delay, the per-tone phase program, and
the optional per-tone attenuation. It also derives the attack's tone
schedule from a simulated detector trace, so that pulse counting (and
its failure modes) comes out of the switching model rather than being
assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..channel import ChannelModelSpec, ChannelResponse, Geometry, SPEED_OF_LIGHT
from ..ranging import ToneSweep
from ..relay import (
    Direction,
    InferenceMode,
    ManipulationProgram,
    RelayConfig,
    advance_phase,
    equalization_profile,
    forward_tone,

)
from ..tdd import (
    DetectorTrace,
    SweepNotDetectedError,
    SweepStartPattern,
    TxEvent,
    detect_sweep_start,
    simulate_timeline,
)
from .config import AttackConfig, PlacementConfig, TddTimingConfig

def air_response(
    distance_m: float,
    spec: ChannelModelSpec,
    frequencies_hz: np.ndarray,
) -> ChannelResponse:
    """One over-the-air hop of the given length, forward direction."""
    geometry = Geometry(node_a=(0.0, 0.0), node_b=(float(distance_m), 0.0))
    from ..channel import propagate

    return propagate(geometry, spec, "node_a", "node_b", frequencies_hz)

def cable_response(loss_db: float, frequencies_hz: np.ndarray) -> ChannelResponse:
    """A matched cable: flat configured loss, no electrical length."""
    n = len(frequencies_hz)
    magnitude = np.full(n, 10.0 ** (-loss_db / 20.0))
    return ChannelResponse(
        frequencies_hz=np.asarray(frequencies_hz, dtype=float),
        magnitude=magnitude,
        phase_rad=np.zeros(n),
        direction="cable",
    )

@dataclass(frozen=True)
class HopPlan:
    kind: str  # "air" | "cable"
    length_m: float

@dataclass(frozen=True)
class CellLink:
    """Static (per-cell) channel state, before per-sweep noise.

    ``static_fwd``/``static_rev`` hold the product of the hop responses
    only; amplifier chains and per-tone manipulations are applied per
    tone in :func:`assemble_observation_responses`. ``path_fwd_m`` is
    the total geometric one-way length of the forward signal path.
    """

    sweep: ToneSweep
    relay_cfg: RelayConfig
    mode: str  # "direct" | "bidirectional" | "unidirectional"
    frequencies_hz: np.ndarray
    static_fwd: np.ndarray
    static_rev: np.ndarray
    chain_ab_db: np.ndarray | None
    chain_ba_db: np.ndarray | None
    path_fwd_m: float
    path_rev_m: float
    relay_passes_fwd: int
    relay_passes_rev: int

    def believed_distance_m(self) -> float:
        """Distance the nodes would measure with the relay left passive.

        Half the round-trip path length, with each pass through the
        relay chain contributing its processing delay as equivalent
        free-space length.
        """
        delay_m = SPEED_OF_LIGHT * self.relay_cfg.t_relay_ns * 1e-9
        total = (
            self.path_fwd_m
            + self.path_rev_m
            + delay_m * (self.relay_passes_fwd + self.relay_passes_rev)
        )
        return total / 2.0

def _hop_chain(
    hops: tuple[HopPlan, HopPlan, HopPlan],
    channel_spec: ChannelModelSpec,
    placement: PlacementConfig,
    frequencies_hz: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Complex response product and total length of a three-hop path."""
    product = np.ones(len(frequencies_hz), dtype=complex)
    total_m = 0.0
    for index, hop in enumerate(hops):
        if hop.kind == "cable":
            resp = cable_response(placement.cable_loss_db, frequencies_hz)
        else:
            spec = channel_spec
            if index == 1 and placement.link_antenna_gain_dbi:
                spec = replace(
                    spec, antenna_gain_dbi=spec.antenna_gain_dbi + 2.0 * placement.link_antenna_gain_dbi
                )
            resp = air_response(hop.length_m, spec, frequencies_hz)
            total_m += hop.length_m
        product = product * resp.complex_gain()
    return product, total_m

def build_direct_cell(
    sweep: ToneSweep,
    relay_cfg: RelayConfig,
    channel_spec: ChannelModelSpec,
    distance_m: float,
) -> CellLink:
    freqs = sweep.frequencies_hz()
    fwd = air_response(distance_m, channel_spec, freqs)
    gains = fwd.complex_gain()
    return CellLink(
        sweep=sweep,
        relay_cfg=relay_cfg,
        mode="direct",
        frequencies_hz=freqs,
        static_fwd=gains,
        static_rev=gains.copy(),
        chain_ab_db=None,
        chain_ba_db=None,
        path_fwd_m=float(distance_m),
        path_rev_m=float(distance_m),
        relay_passes_fwd=0,
        relay_passes_rev=0,
    )

def build_relayed_cell(
    sweep: ToneSweep,
    relay_cfg: RelayConfig,
    channel_spec: ChannelModelSpec,
    placement: PlacementConfig,
    hops: tuple[HopPlan, HopPlan, HopPlan],
    chain_ripple_ab_db: np.ndarray | None = None,
    chain_ripple_ba_db: np.ndarray | None = None,
    direct_distance_m: float | None = None,
) -> CellLink:
    """A cell whose forward path runs A -> primary -> secondary -> B.

    In bidirectional mode the reverse path runs back through the same
    hops with the B->A chain. In unidirectional mode the reverse path is
    the direct channel over ``direct_distance_m``.
    """
    freqs = sweep.frequencies_hz()
    n = len(freqs)
    hop_product, hop_length = _hop_chain(hops, channel_spec, placement, freqs)

    chain_ab = np.full(n, relay_cfg.gain_ab_db, dtype=float)
    chain_ba = np.full(n, relay_cfg.gain_ba_db, dtype=float)
    if chain_ripple_ab_db is not None:
        chain_ab = chain_ab + np.asarray(chain_ripple_ab_db, dtype=float)
    if chain_ripple_ba_db is not None:
        chain_ba = chain_ba + np.asarray(chain_ripple_ba_db, dtype=float)

    if placement.mode == "bidirectional":
        static_rev = hop_product.copy()
        path_rev = hop_length
        passes_rev = 1
    else:
        if direct_distance_m is None:
            raise ValueError("unidirectional placement needs the direct node distance")
        static_rev = air_response(direct_distance_m, channel_spec, freqs).complex_gain()
        path_rev = float(direct_distance_m)
        passes_rev = 0
        chain_ba = None

    return CellLink(
        sweep=sweep,
        relay_cfg=relay_cfg,
        mode=placement.mode,
        frequencies_hz=freqs,
        static_fwd=hop_product,
        static_rev=static_rev,
        chain_ab_db=chain_ab,
        chain_ba_db=chain_ba,
        path_fwd_m=hop_length,
        path_rev_m=path_rev,
        relay_passes_fwd=1,
        relay_passes_rev=passes_rev,
    )

@dataclass(frozen=True)
class AttackSchedule:
    """Per-tone view of what the relay firmware does during one sweep.

    ``advance_counts[i]`` is how many detector rising edges the relay
    has seen since the start pattern when ranging tone ``i`` crosses it,
    i.e. how many times the phase program has advanced. ``inferred``
    holds the tone index the firmware believes it is forwarding (None
    once the count runs past the sweep length). ``detected`` is False
    when the start pattern was never matched, in which case the relay
    stays transparent for the whole sweep.
    """

    detected: bool
    advance_counts: tuple[int, ...]
    inferred: tuple[int | None, ...]

def passthrough_schedule(carrier_count: int) -> AttackSchedule:
    return AttackSchedule(
        detected=False,
        advance_counts=tuple(0 for _ in range(carrier_count)),
        inferred=tuple(None for _ in range(carrier_count)),
    )

def oracle_schedule(carrier_count: int) -> AttackSchedule:
    """Perfect knowledge: tone i is tone i, one advance per tone."""
    return AttackSchedule(
        detected=True,
        advance_counts=tuple(i + 1 for i in range(carrier_count)),
        inferred=tuple(range(carrier_count)),
    )

def sweep_event_stream(
    sweep: ToneSweep,
    tdd_cfg: TddTimingConfig,
    fake_pulses: int = 0,
    fake_after_tone: int = 10,
    break_pattern: bool = False,
    include_b_replies: bool = True,
) -> tuple[list[TxEvent], list[float]]:
    """Transmission timeline for one ranging exchange as the relay sees it.

    The stream is: the known start pattern from node A, then per carrier
    one A tone and one B reply separated by turnaround gaps. Optional
    fake pulses from A are injected into the idle gap after the reply of
    ``fake_after_tone``. With ``break_pattern`` the first pattern pulse
    is stretched beyond tolerance so the matcher must fail.
    """
    events: list[TxEvent] = []
    freqs = sweep.frequencies_hz()
    t = tdd_cfg.stream_start_us
    for k, duration in enumerate(tdd_cfg.pattern_pulses_us):
        if break_pattern and k == 0:
            duration = duration * (1.0 + 4.0 * tdd_cfg.pattern_tolerance)
        events.append(
            TxEvent(
                source="A",
                t_start_us=t,
                duration_us=duration,
                frequency_hz=sweep.f_start_hz,
                power_at_primary_dbm=tdd_cfg.a_power_dbm,
            )
        )
        t += duration
        if k < len(tdd_cfg.pattern_gaps_us):
            t += tdd_cfg.pattern_gaps_us[k]

    tone = sweep.tone_duration_us
    gap = sweep.turnaround_gap_us
    t += gap
    tone_starts = []
    for i in range(sweep.carrier_count):
        tone_starts.append(t)
        events.append(
            TxEvent(
                source="A",
                t_start_us=t,
                duration_us=tone,
                frequency_hz=float(freqs[i]),
                power_at_primary_dbm=tdd_cfg.a_power_dbm,
            )
        )
        t += tone + gap
        if include_b_replies:
            events.append(
                TxEvent(
                    source="B",
                    t_start_us=t,
                    duration_us=tone,
                    frequency_hz=float(freqs[i]),
                    power_at_primary_dbm=tdd_cfg.b_power_dbm,
                )
            )
        t += tone + gap
        if fake_pulses and i == fake_after_tone:
            width = tdd_cfg.fake_pulse_duration_us
            slot = gap / (fake_pulses + 1)
            if width >= slot:
                width = slot * 0.5
            back = t - gap
            for j in range(fake_pulses):
                events.append(
                    TxEvent(
                        source="A",
                        t_start_us=back + slot * j + (slot - width) / 2.0,
                        duration_us=width,
                        frequency_hz=float(freqs[i]),
                        power_at_primary_dbm=tdd_cfg.a_power_dbm,
                    )
                )
    return events, tone_starts

def schedule_from_trace(
    trace: DetectorTrace,
    pattern: SweepStartPattern,
    tone_starts_us: list[float],
) -> AttackSchedule:
    """Count rising edges against real tone start times.

    Tone i's advance count is the number of detector assertions whose
    rising edge is at or before the tone's arrival (the tone's own edge
    included). The inferred index is that count minus one.
    """
    carrier_count = len(tone_starts_us)
    try:
        pattern_start = detect_sweep_start(trace, pattern)
    except SweepNotDetectedError:
        return passthrough_schedule(carrier_count)
    pattern_end = pattern_start + pattern.duration_us()
    edges = [t for t in trace.rising_edges() if t > pattern_end + 1e-9]

    counts = []
    inferred: list[int | None] = []
    for start in tone_starts_us:
        count = sum(1 for t in edges if t <= start + 1e-9)
        counts.append(count)
        index = count - 1
        inferred.append(index if 0 <= index < carrier_count else None)
    return AttackSchedule(detected=True, advance_counts=tuple(counts), inferred=tuple(inferred))

def derive_schedule(
    sweep: ToneSweep,
    relay_cfg: RelayConfig,
    attack: AttackConfig,
    tdd_cfg: TddTimingConfig,
    break_pattern: bool = False,
) -> AttackSchedule:
    """The tone schedule the relay firmware would act on for one sweep."""
    if attack.inference == "frequency-oracle":
        if break_pattern:
            return passthrough_schedule(sweep.carrier_count)
        return oracle_schedule(sweep.carrier_count)
    events, tone_starts = sweep_event_stream(
        sweep,
        tdd_cfg,
        fake_pulses=attack.fake_pulses,
        fake_after_tone=attack.fake_after_tone,
        break_pattern=break_pattern,
    )
    result = simulate_timeline(events, relay_cfg)
    pattern = SweepStartPattern(
        pulse_durations_us=tdd_cfg.pattern_pulses_us,
        gap_durations_us=tdd_cfg.pattern_gaps_us,
        tolerance=tdd_cfg.pattern_tolerance,
    )
    return schedule_from_trace(result.trace, pattern, tone_starts)

def applied_phase_states(
    schedule: AttackSchedule,
    program: ManipulationProgram,
) -> np.ndarray:
    """Continuous shifter state at each tone, from the advance counts.

    Walks the program exactly as the firmware would: one advance per
    detector edge, so tones after inserted fake pulses see the extra
    advances. Returns the pre-quantization state per tone.
    """
    states = np.zeros(len(schedule.advance_counts))
    if not schedule.detected:
        return states
    program.phase_state_rad = 0.0
    seen = 0
    for i, count in enumerate(schedule.advance_counts):
        while seen < count:
            advance_phase(program)
            seen += 1
        states[i] = program.phase_state_rad
    return states

def assemble_observation_responses(
    cell: CellLink,
    program: ManipulationProgram | None,
    schedule: AttackSchedule,
    node_ripple_a: np.ndarray | None = None,
    node_ripple_b: np.ndarray | None = None,
) -> tuple[ChannelResponse, ChannelResponse]:
    """Effective forward and reverse responses for one sweep.

    Per tone, the relayed direction(s) run through
    :func:`phaserelay.relay.forward_tone` with the shifter state the
    schedule dictates; the direct path (if any) is used as-is. Node
    ripples model receiver-side gain flatness error and multiply the
    arriving magnitude.
    """
    freqs = cell.frequencies_hz
    n = len(freqs)
    fwd = np.array(cell.static_fwd, dtype=complex)
    rev = np.array(cell.static_rev, dtype=complex)

    if cell.mode != "direct":
        active = program if (program is not None and schedule.detected) else None
        states = applied_phase_states(schedule, program) if active is not None else np.zeros(n)
        fwd_out = np.empty(n, dtype=complex)
        rev_out = np.empty(n, dtype=complex)
        for i in range(n):
            if active is not None:
                active.phase_state_rad = float(states[i])
            inferred = schedule.inferred[i]
            tone_index = inferred if inferred is not None else 0
            # A count overrun means the firmware has no attenuator entry
            # for this tone; it forwards without equalizing it.
            fwd_prog = active
            if active is not None and active.beta_db is not None and inferred is None:
                fwd_prog = replace(active, beta_db=None)
            ripple_fwd = 10.0 ** ((cell.chain_ab_db[i] - cell.relay_cfg.gain_ab_db) / 20.0)
            fwd_out[i] = forward_tone(
                Direction.A_TO_B,
                fwd[i] * ripple_fwd,
                float(freqs[i]),
                cell.relay_cfg,
                program=fwd_prog,
                tone_index=tone_index,
            )
            if cell.mode == "bidirectional":
                ripple_rev = 10.0 ** ((cell.chain_ba_db[i] - cell.relay_cfg.gain_ba_db) / 20.0)
                rev_out[i] = forward_tone(
                    Direction.B_TO_A,
                    rev[i] * ripple_rev,
                    float(freqs[i]),
                    cell.relay_cfg,
                    program=active,
                    tone_index=tone_index,
                )
            else:
                rev_out[i] = rev[i]
        fwd = fwd_out
        rev = rev_out

    if node_ripple_b is not None:
        fwd = fwd * 10.0 ** (np.asarray(node_ripple_b, dtype=float) / 20.0)
    if node_ripple_a is not None:
        rev = rev * 10.0 ** (np.asarray(node_ripple_a, dtype=float) / 20.0)

    return (
        ChannelResponse.from_complex(freqs, fwd, direction="a->b"),
        ChannelResponse.from_complex(freqs, rev, direction="b->a"),
    )

def make_program(
    cell: CellLink,
    attack: AttackConfig,
    d_set_m: float,
    beta_db: np.ndarray | None = None,
) -> ManipulationProgram:
    believed = (
        cell.believed_distance_m()
        if attack.self_compensate and attack.believed_distance_m is None
        else attack.believed_distance_m
    )
    if believed is None:
        believed = cell.believed_distance_m()
    shifter_dir = Direction.A_TO_B if cell.mode == "unidirectional" else Direction.B_TO_A
    return ManipulationProgram(
        d_set_m=float(d_set_m),
        believed_distance_m=float(believed),
        f_start_hz=cell.sweep.f_start_hz,
        f_step_hz=cell.sweep.f_step_hz,
        carrier_count=cell.sweep.carrier_count,
        inference=InferenceMode(attack.inference),
        beta_db=beta_db,
        shifter_direction=shifter_dir,
    )

def chain_equalization(cell: CellLink) -> np.ndarray | None:
    """Per-tone attenuator program flattening chain gain asymmetry."""
    if cell.chain_ab_db is None or cell.chain_ba_db is None:
        return None
    freqs = cell.frequencies_hz
    fwd = ChannelResponse(
        frequencies_hz=freqs,
        magnitude=10.0 ** (np.asarray(cell.chain_ab_db) / 20.0),
        phase_rad=np.zeros(len(freqs)),
        direction="chain a->b",
    )
    rev = ChannelResponse(
        frequencies_hz=freqs,
        magnitude=10.0 ** (np.asarray(cell.chain_ba_db) / 20.0),
        phase_rad=np.zeros(len(freqs)),
        direction="chain b->a",
    )
    profile = equalization_profile(fwd, rev, cell.relay_cfg)
    return profile.beta_db
