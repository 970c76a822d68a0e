"""Vibrotactile feedback: verdict-to-pattern encoding, pulse scheduling and a
virtual four-unit actuator bus.

Pattern vocabulary: pulse count carries rate (1/2/3), PWM carries force with
the weak-maps-to-strong inversion (128/73/50), and the active unit carries
pose (Left/Center/Right, with finger release alternating Lower and Center).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import CprgloveError, ForceClass, PoseClass, RateClass

PWM_LOW = 50
PWM_MID = 73
PWM_HIGH = 128

PULSE_MS = 80.0
GAP_MS = 60.0
COMMAND_LATENCY_US = 20  # serial transmission cost per bus command


class Unit(str, Enum):
    LEFT = "left"
    CENTER = "center"
    RIGHT = "right"
    LOWER = "lower"


class PatternOverrun(CprgloveError):
    """A new pattern preempted one still playing on the same unit."""


@dataclass(frozen=True)
class HapticPattern:
    pulse_count: int
    pwm: int
    units: tuple
    alternating: bool = False

    def __post_init__(self):
        if self.pulse_count not in (1, 2, 3):
            raise ValueError("pulse_count must be 1, 2 or 3")
        if self.pwm not in (PWM_LOW, PWM_MID, PWM_HIGH):
            raise ValueError(f"pwm must be one of {PWM_LOW}, {PWM_MID}, {PWM_HIGH}")
        if not self.units:
            raise ValueError("units must be non-empty")
        if self.alternating and tuple(self.units) != (Unit.LOWER, Unit.CENTER):
            raise ValueError("alternating patterns run on (Lower, Center)")


@dataclass(frozen=True)
class ActuationEvent:
    unit: Unit
    pwm: int
    start_us: int
    duration_ms: float

    @property
    def end_us(self) -> int:
        return self.start_us + int(self.duration_ms * 1000)


_RATE_PULSES = {
    RateClass.TOO_SLOW: 1,
    RateClass.CORRECT: 2,
    RateClass.TOO_FAST: 3,
}

# Inverted on purpose: a weak compression gets the strongest cue.
_FORCE_PWM = {
    ForceClass.TOO_WEAK: PWM_HIGH,
    ForceClass.CORRECT: PWM_MID,
    ForceClass.TOO_STRONG: PWM_LOW,
}

_POSE_UNITS = {
    PoseClass.CORRECT: (Unit.CENTER,),
    PoseClass.LEFT_SKEWED: (Unit.LEFT,),
    PoseClass.RIGHT_SKEWED: (Unit.RIGHT,),
    PoseClass.FINGER_RELEASE: (Unit.LOWER, Unit.CENTER),
}


def encode_feedback(rate: RateClass, force: ForceClass, pose: PoseClass) -> HapticPattern:
    """Total, deterministic mapping of all 36 joint verdict states."""
    return HapticPattern(
        pulse_count=_RATE_PULSES[rate],
        pwm=_FORCE_PWM[force],
        units=_POSE_UNITS[pose],
        alternating=pose is PoseClass.FINGER_RELEASE,
    )


def schedule_pattern(pattern: HapticPattern, anchor_t_us: int,
                     pulse_ms: float = PULSE_MS, gap_ms: float = GAP_MS):
    """Lay the pattern's pulses out in time starting at the anchor.

    80 ms pulses with 60 ms gaps keep even a triple pulse (360 ms span)
    under the 500 ms floor of a correct compression interval. Alternating
    patterns send pulse i to units[i mod 2]; other patterns repeat on every
    listed unit.
    """
    events = []
    step_us = int((pulse_ms + gap_ms) * 1000)
    for i in range(pattern.pulse_count):
        start = int(anchor_t_us) + i * step_us
        if pattern.alternating:
            targets = (pattern.units[i % 2],)
        else:
            targets = pattern.units
        for unit in targets:
            events.append(ActuationEvent(unit, pattern.pwm, start, pulse_ms))
    return events


@dataclass
class VirtualBus:
    """Stand-in for the driver/multiplexer chain: per-unit (t_us, pwm) logs
    with a fixed 20 us command latency."""

    logs: dict = field(default_factory=lambda: {u: [] for u in Unit})
    busy_until: dict = field(default_factory=lambda: {u: 0 for u in Unit})
    preemptions: int = 0

    def apply(self, events):
        """Append each event's on/off edges to its channel log.

        An event that lands on a still-busy unit preempts the running one:
        the stale off-edge is dropped, the preemption counted.
        """
        for ev in sorted(events, key=lambda e: e.start_us):
            log = self.logs[ev.unit]
            if ev.start_us < self.busy_until[ev.unit]:
                self.preemptions += 1
                while log and log[-1][0] >= ev.start_us:
                    log.pop()
            log.append((ev.start_us + COMMAND_LATENCY_US, ev.pwm))
            off_t = ev.end_us + COMMAND_LATENCY_US
            log.append((off_t, 0))
            self.busy_until[ev.unit] = off_t
        return self

    def active_intervals(self, unit: Unit):
        """Nonzero (on_us, off_us, pwm) spans reconstructed from the log."""
        spans = []
        on = None
        for t, pwm in self.logs[unit]:
            if pwm > 0:
                on = (t, pwm)
            elif on is not None:
                spans.append((on[0], t, on[1]))
                on = None
        return spans


def bus_apply(events, bus: VirtualBus) -> VirtualBus:
    return bus.apply(events)


def timeline_text(bus: VirtualBus) -> str:
    rows = []
    for unit in Unit:
        for start, end, pwm in bus.active_intervals(unit):
            rows.append((start, end, unit.value, pwm))
    rows.sort()
    lines = [f"{'start_ms':>10} {'end_ms':>10} {'unit':<8} {'pwm':>4}"]
    for start, end, unit, pwm in rows:
        lines.append(f"{start / 1000:>10.2f} {end / 1000:>10.2f} {unit:<8} {pwm:>4d}")
    return "\n".join(lines)
