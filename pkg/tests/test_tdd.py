"""Reactive TDD switch tests: detector timeline, fates, pattern matching."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaserelay import (
    Direction,
    RelayConfig,
    RelayState,
    SweepNotDetectedError,
    SweepStartPattern,
    TxEvent,
    count_sweep_tones,
    detect_sweep_start,
    simulate_timeline,
    tone_edges_after_pattern,
)

CFG = RelayConfig()  # threshold -40 dBm, hysteresis 3 dB, reaction 0.35 us

# Leading-edge loss of a switch-triggering event equals the reaction delay,
# so the clipped fraction is 0.35 us over the event duration.
CLIP_FRACTION_44US = 0.35 / 44.0
CLIP_FRACTION_2128US = 0.35 / 2128.0


def a_pulse(start, duration, power=-30.0):
    return TxEvent("A", start, duration, power_at_primary_dbm=power)


def b_pulse(start, duration, power=-55.0):
    return TxEvent("B", start, duration, power_at_primary_dbm=power)


def interferer(start, duration, power=-35.0):
    return TxEvent("interferer", start, duration, power_at_primary_dbm=power)


class TestTxEvent:
    def test_end_time(self):
        assert a_pulse(10.0, 5.0).t_end_us == 15.0

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"source": "C", "t_start_us": 0.0, "duration_us": 1.0}, "unknown event source"),
            ({"source": "A", "t_start_us": 0.0, "duration_us": 0.0}, "duration must be positive"),
            ({"source": "A", "t_start_us": -1.0, "duration_us": 1.0}, "must be non-negative"),
        ],
    )
    def test_validation(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            TxEvent(**kwargs)


class TestSimulateTimeline:
    def test_single_pulse_trace(self):
        result = simulate_timeline([a_pulse(100.0, 50.0)], CFG)
        assert result.trace.rising_edges() == [100.0]
        assert result.trace.assert_intervals() == [(100.0, 150.0)]
        assert result.trace.forward_intervals() == [(100.35, 150.35)]

    def test_single_pulse_is_clipped_by_reaction(self):
        result = simulate_timeline([a_pulse(100.0, 50.0)], CFG)
        fate = result.fates[0]
        assert fate.status == "clipped"
        assert fate.clipped_fraction == pytest.approx(0.35 / 50.0, abs=1e-12)

    def test_clip_fraction_oracle_44us(self):
        result = simulate_timeline([interferer(0.0, 44.0)], CFG)
        assert result.fates[0].status == "clipped"
        assert result.fates[0].clipped_fraction == pytest.approx(CLIP_FRACTION_44US, abs=1e-12)
        # Percentage form, within one thousandth of a percent of 0.795%.
        assert abs(100.0 * result.fates[0].clipped_fraction - 0.795) < 1e-3

    def test_clip_fraction_oracle_2128us(self):
        result = simulate_timeline([interferer(0.0, 2128.0)], CFG)
        assert result.fates[0].status == "clipped"
        assert result.fates[0].clipped_fraction == pytest.approx(CLIP_FRACTION_2128US, abs=1e-12)
        assert abs(100.0 * result.fates[0].clipped_fraction - 0.016) < 1e-3

    def test_sub_threshold_event_ignored(self):
        result = simulate_timeline([a_pulse(10.0, 5.0, power=-41.0)], CFG)
        assert result.fates[0].status == "ignored"
        assert result.trace.assert_intervals() == []

    def test_direction_at(self):
        result = simulate_timeline([a_pulse(100.0, 50.0)], CFG)
        trace = result.trace
        assert trace.direction_at(0.0) is Direction.B_TO_A
        assert trace.direction_at(100.1) is Direction.B_TO_A  # still reacting
        assert trace.direction_at(100.4) is Direction.A_TO_B
        assert trace.direction_at(150.2) is Direction.A_TO_B  # release also delayed
        assert trace.direction_at(150.4) is Direction.B_TO_A

    def test_final_state_returns_to_idle(self):
        result = simulate_timeline([a_pulse(100.0, 50.0)], CFG)
        assert result.state.direction is Direction.B_TO_A
        assert result.state.last_change_us == 150.35

    def test_hysteresis_holds_but_does_not_trigger(self):
        trigger = a_pulse(0.0, 10.0, power=-35.0)
        tail = a_pulse(10.0, 10.0, power=-42.0)  # inside the 3 dB hold band
        both = simulate_timeline([trigger, tail], CFG)
        assert both.trace.assert_intervals() == [(0.0, 20.0)]
        assert both.fates[1].status == "forwarded"

        alone = simulate_timeline([tail], CFG)
        assert alone.trace.assert_intervals() == []
        assert alone.fates[0].status == "ignored"

    def test_below_hold_band_releases(self):
        trigger = a_pulse(0.0, 10.0, power=-35.0)
        tail = a_pulse(10.0, 10.0, power=-44.0)  # below threshold minus hysteresis
        result = simulate_timeline([trigger, tail], CFG)
        assert result.trace.assert_intervals() == [(0.0, 10.0)]

    def test_b_reply_forwarded_while_idle(self):
        result = simulate_timeline([b_pulse(500.0, 250.0)], CFG)
        assert result.fates[0].status == "forwarded"
        assert result.trace.assert_intervals() == []

    def test_b_reply_lost_inside_forward_window(self):
        events = [a_pulse(0.0, 100.0), b_pulse(10.0, 50.0)]
        result = simulate_timeline(events, CFG)
        assert result.fates[1].status == "lost"

    def test_b_reply_clipped_on_partial_overlap(self):
        events = [a_pulse(0.0, 100.0), b_pulse(90.0, 50.0)]
        result = simulate_timeline(events, CFG)
        fate = result.fates[1]
        assert fate.status == "clipped"
        # Forward window covers [0.35, 100.35); the reply loses 90..100.35.
        assert fate.clipped_fraction == pytest.approx(10.35 / 50.0, abs=1e-12)

    def test_empty_timeline(self):
        result = simulate_timeline([], CFG)
        assert result.state.direction is Direction.B_TO_A
        assert result.trace.assert_intervals() == []

    def test_trace_csv_format(self, tmp_path):
        result = simulate_timeline([a_pulse(100.0, 50.0)], CFG)
        path = tmp_path / "trace.csv"
        result.trace.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "time_us,detector,direction"
        assert lines[1] == "0.0,0,b->a"
        assert lines[2] == "100.0,1,b->a"
        assert all(len(line.split(",")) == 3 for line in lines[1:])


@settings(max_examples=40, deadline=None)
@given(
    starts=st.lists(st.floats(min_value=0.0, max_value=5000.0), min_size=1, max_size=6),
    durations=st.lists(st.floats(min_value=1.0, max_value=300.0), min_size=6, max_size=6),
    powers=st.lists(st.floats(min_value=-60.0, max_value=-20.0), min_size=6, max_size=6),
    bump_db=st.floats(min_value=0.5, max_value=10.0),
)
def test_raising_threshold_never_widens_assertion(starts, durations, powers, bump_db):
    """Detector assertions at a higher threshold nest inside the lower ones."""
    events = [
        a_pulse(s, d, power=p)
        for s, d, p in zip(starts, durations[: len(starts)], powers[: len(starts)])
    ]
    low = simulate_timeline(events, CFG)
    high_cfg = RelayConfig(detector_threshold_dbm=CFG.detector_threshold_dbm + bump_db)
    high = simulate_timeline(events, high_cfg)
    low_spans = low.trace.assert_intervals()
    for hs, he in high.trace.assert_intervals():
        assert any(ls - 1e-9 <= hs and he <= le + 1e-9 for ls, le in low_spans)


def pattern_events(t0, pulses=(80.0, 80.0, 80.0), gaps=(120.0, 120.0), power=-30.0):
    events = []
    t = t0
    for i, dur in enumerate(pulses):
        events.append(a_pulse(t, dur, power=power))
        t += dur
        if i < len(gaps):
            t += gaps[i]
    return events, t


def tone_events(t0, count=40, tone_us=250.0, gap_us=150.0):
    events = []
    t = t0
    for _ in range(count):
        events.append(a_pulse(t, tone_us))
        t += tone_us + gap_us
        events.append(b_pulse(t, tone_us))
        t += tone_us + gap_us
    return events, t


class TestSweepDetection:
    def setup_method(self):
        self.pattern = SweepStartPattern((80.0, 80.0, 80.0), (120.0, 120.0))

    def test_pattern_validation(self):
        with pytest.raises(ValueError, match="at least one pulse"):
            SweepStartPattern((), ())
        with pytest.raises(ValueError, match="one gap between"):
            SweepStartPattern((80.0, 80.0), (120.0, 120.0))
        with pytest.raises(ValueError, match="tolerance"):
            SweepStartPattern((80.0,), (), tolerance=0.0)

    def test_pattern_duration(self):
        assert self.pattern.duration_us() == 480.0

    def test_detects_exact_pattern(self):
        events, _ = pattern_events(1000.0)
        trace = simulate_timeline(events, CFG).trace
        assert detect_sweep_start(trace, self.pattern) == 1000.0

    def test_detects_within_tolerance(self):
        events, _ = pattern_events(1000.0, pulses=(86.0, 74.0, 80.0), gaps=(112.0, 130.0))
        trace = simulate_timeline(events, CFG).trace
        assert detect_sweep_start(trace, self.pattern) == 1000.0

    def test_stretched_pulse_breaks_match(self):
        events, _ = pattern_events(1000.0, pulses=(80.0 * 1.25, 80.0, 80.0))
        trace = simulate_timeline(events, CFG).trace
        with pytest.raises(SweepNotDetectedError, match="sweep not detected"):
            detect_sweep_start(trace, self.pattern)

    def test_skips_leading_clutter(self):
        clutter = [interferer(0.0, 60.0), interferer(200.0, 60.0)]
        events, _ = pattern_events(1000.0)
        trace = simulate_timeline(clutter + events, CFG).trace
        assert detect_sweep_start(trace, self.pattern) == 1000.0

    def test_counts_tones_after_pattern(self):
        events, t = pattern_events(1000.0)
        tones, _ = tone_events(t + 100.0)
        trace = simulate_timeline(events + tones, CFG).trace
        state = RelayState()
        assert count_sweep_tones(trace, self.pattern, state) == 40
        assert state.tone_counter == 40

    def test_fake_pulses_inflate_count(self):
        events, t = pattern_events(1000.0)
        tones, end = tone_events(t + 100.0)
        fakes = [interferer(end + 50.0 + i * 40.0, 20.0) for i in range(3)]
        trace = simulate_timeline(events + tones + fakes, CFG).trace
        assert count_sweep_tones(trace, self.pattern) == 43

    def test_tone_edges_are_sorted_times(self):
        events, t = pattern_events(1000.0)
        tones, _ = tone_events(t + 100.0, count=5)
        trace = simulate_timeline(events + tones, CFG).trace
        edges = tone_edges_after_pattern(trace, self.pattern)
        assert len(edges) == 5
        assert edges == sorted(edges)
        assert edges[0] == t + 100.0

    def test_missing_pattern_raises(self):
        tones, _ = tone_events(1000.0, count=5)
        trace = simulate_timeline(tones, CFG).trace
        with pytest.raises(SweepNotDetectedError):
            count_sweep_tones(trace, SweepStartPattern((80.0, 80.0, 80.0), (120.0, 120.0)))
