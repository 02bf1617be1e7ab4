"""Reactive TDD switching driven by a power detector at the primary antenna.

The relay idles in the returned direction (B->A). A power detector watches
the primary antenna; when a transmission crosses the detector threshold
the switch flips to the forwarded direction (A->B) after the configured
reaction delay, and flips back the same delay after the detector releases.
Release uses a hysteresis band: an ongoing assertion is held by any signal
within ``release_hysteresis_db`` below the threshold, but such a signal
never starts one.

The timeline is event driven and exact; there is no sample grid. A trace
records every detector or switch transition and can be exported as CSV
with columns ``time_us, detector, direction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .relay import Direction, RelayConfig, RelayState

_EPS_US = 1e-9


class SweepNotDetectedError(RuntimeError):
    """Raised when the expected pre-sweep pattern never matches a trace."""


@dataclass(frozen=True)
class TxEvent:
    """One transmission as seen at the relay's primary antenna."""

    source: str  # "A", "B" or "interferer"
    t_start_us: float
    duration_us: float
    frequency_hz: float = 2.402e9
    power_at_primary_dbm: float = -30.0

    def __post_init__(self) -> None:
        if self.source not in ("A", "B", "interferer"):
            raise ValueError(f"unknown event source: {self.source!r}")
        if self.duration_us <= 0:
            raise ValueError("event duration must be positive")
        if self.t_start_us < 0:
            raise ValueError("event start time must be non-negative")

    @property
    def t_end_us(self) -> float:
        return self.t_start_us + self.duration_us


@dataclass(frozen=True)
class TraceStep:
    """Detector/switch state holding from ``time_us`` until the next step."""

    time_us: float
    detector: bool
    direction: Direction


@dataclass(frozen=True)
class DetectorTrace:
    steps: tuple[TraceStep, ...]
    reaction_delay_us: float

    def rising_edges(self) -> list[float]:
        """Times at which the detector output asserts."""
        edges = []
        prev = False
        for step in self.steps:
            if step.detector and not prev:
                edges.append(step.time_us)
            prev = step.detector
        return edges

    def assert_intervals(self) -> list[tuple[float, float]]:
        """Closed-open [start, end) spans of detector assertion."""
        spans: list[tuple[float, float]] = []
        start = None
        for step in self.steps:
            if step.detector and start is None:
                start = step.time_us
            elif not step.detector and start is not None:
                spans.append((start, step.time_us))
                start = None
        if start is not None:
            spans.append((start, math.inf))
        return spans

    def forward_intervals(self) -> list[tuple[float, float]]:
        """[start, end) spans during which the switch points A->B."""
        spans: list[tuple[float, float]] = []
        start = None
        for step in self.steps:
            if step.direction is Direction.A_TO_B and start is None:
                start = step.time_us
            elif step.direction is Direction.B_TO_A and start is not None:
                spans.append((start, step.time_us))
                start = None
        if start is not None:
            spans.append((start, math.inf))
        return spans

    def direction_at(self, time_us: float) -> Direction:
        current = Direction.B_TO_A
        for step in self.steps:
            if step.time_us <= time_us + _EPS_US:
                current = step.direction
            else:
                break
        return current

    def write_csv(self, path) -> None:
        lines = ["time_us,detector,direction"]
        for step in self.steps:
            lines.append(f"{step.time_us!r},{int(step.detector)},{step.direction.value}")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class EventFate:
    """How one transmission fared at the relay."""

    event: TxEvent
    status: str  # "forwarded" | "clipped" | "ignored" | "lost"
    clipped_fraction: float


@dataclass(frozen=True)
class TimelineResult:
    trace: DetectorTrace
    fates: tuple[EventFate, ...]
    state: RelayState


@dataclass(frozen=True)
class SweepStartPattern:
    """Expected pre-sweep on/off signature at the detector output.

    Durations are matched pulse by pulse within a relative tolerance;
    ``gap_durations_us`` has one entry less than ``pulse_durations_us``.
    """

    pulse_durations_us: tuple[float, ...]
    gap_durations_us: tuple[float, ...]
    tolerance: float = 0.1

    def __post_init__(self) -> None:
        if len(self.pulse_durations_us) < 1:
            raise ValueError("pattern needs at least one pulse")
        if len(self.gap_durations_us) != len(self.pulse_durations_us) - 1:
            raise ValueError("pattern needs exactly one gap between consecutive pulses")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")

    def duration_us(self) -> float:
        return sum(self.pulse_durations_us) + sum(self.gap_durations_us)


def _merge_touching(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1] + _EPS_US:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


def _overlap(t0: float, t1: float, windows: list[tuple[float, float]]) -> float:
    return sum(max(0.0, min(t1, we) - max(t0, ws)) for ws, we in windows)


def simulate_timeline(events: list[TxEvent], config: RelayConfig) -> TimelineResult:
    """Run the reactive switch over a list of transmissions.

    Returns the transition trace, a fate per event, and the final switch
    state. Fates: a forwarded-direction event (A or interferer) that never
    crosses the threshold and never rides an existing forwarding window is
    ``ignored``; one that is forwarded for its whole duration is
    ``forwarded``; a partially forwarded event is ``clipped`` with the lost
    leading fraction recorded; an event forwarded for none of its duration
    despite crossing the threshold is ``lost``. Returned-direction events
    (B) are forwarded while the switch idles, and are clipped or lost by
    overlap with forwarding windows.
    """
    threshold = config.detector_threshold_dbm
    hold_floor = threshold - config.release_hysteresis_db

    trigger = [(e.t_start_us, e.t_end_us) for e in events if e.power_at_primary_dbm >= threshold]
    holdable = [(e.t_start_us, e.t_end_us) for e in events if e.power_at_primary_dbm >= hold_floor]

    asserts: list[tuple[float, float]] = []
    for comp_start, comp_end in _merge_touching(holdable):
        trigger_starts = [s for s, _ in trigger if comp_start - _EPS_US <= s < comp_end]
        if trigger_starts:
            asserts.append((min(trigger_starts), comp_end))

    reaction = config.reaction_delay_us
    forward_windows = [(s + reaction, e + reaction) for s, e in asserts]

    times = {0.0}
    for s, e in asserts:
        times.update((s, e))
    for s, e in forward_windows:
        times.update((s, e))

    steps: list[TraceStep] = []
    for t in sorted(times):
        det = any(s <= t < e for s, e in asserts)
        direction = Direction.A_TO_B if any(s <= t < e for s, e in forward_windows) else Direction.B_TO_A
        if steps and steps[-1].detector == det and steps[-1].direction is direction:
            continue
        steps.append(TraceStep(time_us=t, detector=det, direction=direction))

    trace = DetectorTrace(steps=tuple(steps), reaction_delay_us=reaction)

    fates = []
    for event in events:
        forwarded_time = _overlap(event.t_start_us, event.t_end_us, forward_windows)
        if event.source == "B":
            forwarded_time = event.duration_us - forwarded_time
        fraction = forwarded_time / event.duration_us
        if fraction >= 1.0 - 1e-12:
            fates.append(EventFate(event, "forwarded", 0.0))
        elif fraction <= 1e-12:
            if event.source != "B" and event.power_at_primary_dbm < threshold:
                fates.append(EventFate(event, "ignored", 1.0))
            else:
                fates.append(EventFate(event, "lost", 1.0))
        else:
            fates.append(EventFate(event, "clipped", 1.0 - fraction))

    state = RelayState(
        direction=steps[-1].direction if steps else Direction.B_TO_A,
        last_change_us=steps[-1].time_us if steps else 0.0,
        tone_counter=0,
    )
    return TimelineResult(trace=trace, fates=tuple(fates), state=state)


def detect_sweep_start(trace: DetectorTrace, pattern: SweepStartPattern) -> float:
    """First time the detector pulse train matches the expected pattern.

    Matches pulse durations and the gaps between them within the pattern's
    relative tolerance and returns the start time of the first matched
    pulse. Raises ``SweepNotDetectedError("sweep not detected")`` when no
    window matches.
    """
    pulses = [(s, e) for s, e in trace.assert_intervals() if math.isfinite(e)]
    need = len(pattern.pulse_durations_us)
    for i in range(len(pulses) - need + 1):
        window = pulses[i : i + need]
        ok = True
        for (s, e), expected in zip(window, pattern.pulse_durations_us):
            if abs((e - s) - expected) > pattern.tolerance * expected:
                ok = False
                break
        if ok:
            for j, expected in enumerate(pattern.gap_durations_us):
                gap = window[j + 1][0] - window[j][1]
                if abs(gap - expected) > pattern.tolerance * expected:
                    ok = False
                    break
        if ok:
            return window[0][0]
    raise SweepNotDetectedError("sweep not detected")


def count_sweep_tones(trace: DetectorTrace, pattern: SweepStartPattern, state: RelayState | None = None) -> int:
    """Number of detector rising edges after the matched pre-sweep pattern.

    This is the count-based attacker's tone counter; when a relay state is
    passed its ``tone_counter`` is updated in place.
    """
    t_end = detect_sweep_start(trace, pattern) + pattern.duration_us()
    count = sum(1 for t in trace.rising_edges() if t > t_end - _EPS_US)
    if state is not None:
        state.tone_counter = count
    return count


def tone_edges_after_pattern(trace: DetectorTrace, pattern: SweepStartPattern) -> list[float]:
    """Rising-edge times following the matched pattern, oldest first."""
    t_end = detect_sweep_start(trace, pattern) + pattern.duration_us()
    return [t for t in trace.rising_edges() if t > t_end - _EPS_US]
