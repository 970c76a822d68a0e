import pytest

from cprglove.core import ForceClass, PoseClass, RateClass, joint_states
from cprglove.haptics import (COMMAND_LATENCY_US, HapticPattern, Unit,
                              VirtualBus, bus_apply, encode_feedback,
                              schedule_pattern, timeline_text)


def test_encode_table_anchor_rows():
    p = encode_feedback(RateClass.TOO_SLOW, ForceClass.TOO_WEAK, PoseClass.CORRECT)
    assert (p.pulse_count, p.pwm, p.units) == (1, 128, (Unit.CENTER,))

    p = encode_feedback(RateClass.CORRECT, ForceClass.CORRECT, PoseClass.LEFT_SKEWED)
    assert (p.pulse_count, p.pwm, p.units) == (2, 73, (Unit.LEFT,))

    p = encode_feedback(RateClass.TOO_FAST, ForceClass.TOO_STRONG, PoseClass.FINGER_RELEASE)
    assert (p.pulse_count, p.pwm, p.units) == (3, 50, (Unit.LOWER, Unit.CENTER))
    assert p.alternating


def test_encode_total_and_dimension_independent():
    seen = set()
    for rate, force, pose in joint_states():
        p = encode_feedback(rate, force, pose)
        assert p.pwm in (50, 73, 128)
        seen.add((p.pulse_count, p.pwm, p.units, p.alternating))
        # changing only the rate changes only the pulse count
        for other_rate in RateClass:
            q = encode_feedback(other_rate, force, pose)
            assert (q.pwm, q.units, q.alternating) == (p.pwm, p.units, p.alternating)
    assert len(seen) == 36


def test_pattern_invariants_enforced():
    with pytest.raises(ValueError):
        HapticPattern(pulse_count=4, pwm=73, units=(Unit.CENTER,))
    with pytest.raises(ValueError):
        HapticPattern(pulse_count=1, pwm=100, units=(Unit.CENTER,))
    with pytest.raises(ValueError):
        HapticPattern(pulse_count=2, pwm=73, units=(Unit.LEFT,), alternating=True)


def test_schedule_single_pulse():
    p = HapticPattern(1, 73, (Unit.CENTER,))
    events = schedule_pattern(p, 0)
    assert len(events) == 1
    assert events[0].start_us == 0 and events[0].duration_ms == 80.0


def test_schedule_triple_pulse_spacing():
    p = HapticPattern(3, 50, (Unit.CENTER,))
    events = schedule_pattern(p, 0)
    assert [e.start_us for e in events] == [0, 140_000, 280_000]
    span_us = events[-1].end_us - events[0].start_us
    assert span_us == 360_000
    assert span_us < 500_000


def test_schedule_alternating_units():
    p = encode_feedback(RateClass.CORRECT, ForceClass.CORRECT, PoseClass.FINGER_RELEASE)
    events = schedule_pattern(p, 0)
    assert [e.unit for e in events] == [Unit.LOWER, Unit.CENTER]


def test_every_pattern_fits_the_fastest_interval():
    for rate, force, pose in joint_states():
        events = schedule_pattern(encode_feedback(rate, force, pose), 0)
        span = max(e.end_us for e in events) - min(e.start_us for e in events)
        assert span < 500_000


def test_bus_apply_latency_arithmetic():
    bus = VirtualBus()
    events = schedule_pattern(HapticPattern(1, 73, (Unit.CENTER,)), 0)
    bus_apply(events, bus)
    assert bus.logs[Unit.CENTER] == [(20, 73), (80_000 + 20, 0)]


def test_bus_apply_empty_noop():
    bus = VirtualBus()
    bus_apply([], bus)
    assert all(not log for log in bus.logs.values())


def _overlap_oracle(spans):
    spans = sorted(spans)
    return any(b_start < a_end for (_, a_end, _), (b_start, _, _) in zip(spans, spans[1:]))


def test_full_sweep_no_channel_overlap():
    bus = VirtualBus()
    t_us = 0
    for rate, force, pose in joint_states():
        bus.apply(schedule_pattern(encode_feedback(rate, force, pose), t_us))
        t_us += 600_000  # one pattern per (slow-side) compression interval
    assert bus.preemptions == 0
    for unit in Unit:
        assert not _overlap_oracle(bus.active_intervals(unit))


def test_preemption_counted_and_log_consistent():
    bus = VirtualBus()
    bus.apply(schedule_pattern(HapticPattern(3, 73, (Unit.CENTER,)), 0))
    bus.apply(schedule_pattern(HapticPattern(1, 128, (Unit.CENTER,)), 100_000))
    assert bus.preemptions == 1
    assert not _overlap_oracle(bus.active_intervals(Unit.CENTER))


def test_timeline_text_lists_events():
    bus = VirtualBus()
    bus.apply(schedule_pattern(HapticPattern(2, 73, (Unit.LEFT,)), 0))
    text = timeline_text(bus)
    assert "left" in text and "73" in text
