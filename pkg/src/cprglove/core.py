"""Domain types shared by every stage of the pipeline.

Frames, dual samples, class enumerations, subject profiles and the
JSON-Lines session log. All types are immutable values once constructed;
they can be copied or handed between threads freely.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

ROWS = 13
COLS = 14
ADC_MAX = 8191  # 13-bit
FRAME_PERIOD_US = 70_000  # nominal 14.3 Hz frame spacing


class CprgloveError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CprgloveError):
    pass


class CountOutOfRange(CprgloveError):
    pass


class NonMonotoneTimestamp(CprgloveError):
    pass


class Side(str, Enum):
    PALM = "palm"
    DORSUM = "dorsum"


class RateClass(str, Enum):
    TOO_SLOW = "too_slow"
    CORRECT = "correct"
    TOO_FAST = "too_fast"


class ForceClass(str, Enum):
    TOO_WEAK = "too_weak"
    CORRECT = "correct"
    TOO_STRONG = "too_strong"


class PoseClass(str, Enum):
    CORRECT = "correct"
    LEFT_SKEWED = "left_skewed"
    RIGHT_SKEWED = "right_skewed"
    FINGER_RELEASE = "finger_release"


def joint_states():
    """All 36 (rate, force, pose) combinations, in enum order."""
    return [
        (r, f, p)
        for r in RateClass
        for f in ForceClass
        for p in PoseClass
    ]


@dataclass(frozen=True)
class TactileFrame:
    """One 13x14 grid of raw ADC counts from a single side of the hand."""

    side: Side
    counts: np.ndarray  # (13, 14) int array, values 0..8191
    timestamp_us: int

    def __post_init__(self):
        object.__setattr__(
            self, "counts", np.asarray(self.counts, dtype=np.int32)
        )

    def __eq__(self, other):
        if not isinstance(other, TactileFrame):
            return NotImplemented
        return (
            self.side == other.side
            and self.timestamp_us == other.timestamp_us
            and np.array_equal(self.counts, other.counts)
        )


def validate_frame(frame: TactileFrame, prev_timestamp_us: int | None = None):
    """Raise if the frame violates any invariant; return the frame otherwise."""
    if frame.counts.shape != (ROWS, COLS):
        raise DimensionMismatch(
            f"expected {ROWS}x{COLS} grid, got {frame.counts.shape}"
        )
    if frame.counts.min() < 0 or frame.counts.max() > ADC_MAX:
        raise CountOutOfRange(
            f"counts must lie in [0, {ADC_MAX}], "
            f"found [{frame.counts.min()}, {frame.counts.max()}]"
        )
    if prev_timestamp_us is not None and frame.timestamp_us <= prev_timestamp_us:
        raise NonMonotoneTimestamp(
            f"timestamp {frame.timestamp_us} not after {prev_timestamp_us}"
        )
    return frame


@dataclass(frozen=True)
class DualSample:
    """Synchronized palm+dorsum frame pair; the pipeline's unit of work."""

    palm: TactileFrame
    dorsum: TactileFrame
    seq: int

    def __post_init__(self):
        if self.palm.side is not Side.PALM or self.dorsum.side is not Side.DORSUM:
            raise DimensionMismatch("palm/dorsum fields carry the wrong side")
        if abs(self.palm.timestamp_us - self.dorsum.timestamp_us) > FRAME_PERIOD_US:
            raise NonMonotoneTimestamp(
                "palm and dorsum timestamps differ by more than one frame period"
            )

    @property
    def timestamp_us(self) -> int:
        return self.palm.timestamp_us


@dataclass(frozen=True)
class SubjectProfile:
    """Trainee identity plus the body weight the force band derives from."""

    id: str
    weight_kg: float

    def __post_init__(self):
        if self.weight_kg <= 0:
            raise ValueError("weight_kg must be positive")


# ---------------------------------------------------------------------------
# Session log (JSON Lines)

class CorruptLog(CprgloveError):
    pass


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class SessionLog:
    """Ordered record stream of one session, serializable to JSON Lines.

    Record kinds: meta, frame, force, pose, pred, haptic. One JSON object
    per line; see README for the field-by-field schema.
    """

    def __init__(self, records: list[dict] | None = None):
        self.records = list(records) if records else []

    def add_meta(self, subject_id: str, config: dict, start_wallclock: float | None = None):
        self.records.append(
            {
                "k": "meta",
                "subject": subject_id,
                "config_hash": config_hash(config),
                "start": start_wallclock if start_wallclock is not None else time.time(),
            }
        )

    def add_frame(self, frame: TactileFrame):
        self.records.append(
            {
                "k": "frame",
                "side": frame.side.value,
                "t_us": int(frame.timestamp_us),
                "counts": frame.counts.tolist(),
            }
        )

    def add_sample(self, sample: DualSample):
        self.add_frame(sample.palm)
        self.add_frame(sample.dorsum)

    def add_force(self, t_us: int, newton: float):
        self.records.append({"k": "force", "t_us": int(t_us), "newton": float(newton)})

    def add_pose(self, t_us: int, label: PoseClass):
        self.records.append({"k": "pose", "t_us": int(t_us), "label": label.value})

    def add_prediction(self, t_us: int, rate: RateClass | None,
                       force: ForceClass, pose: PoseClass):
        self.records.append(
            {
                "k": "pred",
                "t_us": int(t_us),
                "rate": rate.value if rate is not None else None,
                "force": force.value,
                "pose": pose.value,
            }
        )

    def add_haptic(self, t_us: int, unit: str, pwm: int, dur_ms: float):
        self.records.append(
            {"k": "haptic", "t_us": int(t_us), "unit": unit,
             "pwm": int(pwm), "dur_ms": float(dur_ms)}
        )

    def iter_kind(self, kind: str):
        return (r for r in self.records if r["k"] == kind)

    def frames(self, side: Side | None = None) -> list[TactileFrame]:
        out = []
        for r in self.iter_kind("frame"):
            if side is not None and r["side"] != side.value:
                continue
            out.append(
                TactileFrame(Side(r["side"]), np.array(r["counts"]), r["t_us"])
            )
        return out

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    def dumps(self) -> str:
        return "".join(
            json.dumps(rec, separators=(",", ":")) + "\n" for rec in self.records
        )

    @classmethod
    def load(cls, path) -> "SessionLog":
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorruptLog(f"line {lineno}: {exc}") from exc
                if "k" not in rec:
                    raise CorruptLog(f"line {lineno}: record without kind")
                records.append(rec)
        return cls(records)
