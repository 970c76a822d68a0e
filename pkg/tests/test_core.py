import numpy as np
import pytest

from cprglove.core import (ADC_MAX, COLS, ROWS, CountOutOfRange,
                           DimensionMismatch, DualSample, ForceClass,
                           NonMonotoneTimestamp, PoseClass, RateClass,
                           SessionLog, Side, SubjectProfile, TactileFrame,
                           joint_states, validate_frame)
from conftest import make_frame, make_sample


def test_validate_frame_midscale_ok():
    frame = make_frame(fill=4096)
    assert validate_frame(frame) is frame


def test_validate_frame_count_out_of_range():
    counts = np.full((ROWS, COLS), 4096)
    counts[3, 4] = 9000
    with pytest.raises(CountOutOfRange):
        validate_frame(make_frame(counts=counts))


def test_validate_frame_bad_shape():
    with pytest.raises(DimensionMismatch):
        validate_frame(TactileFrame(Side.PALM, np.zeros((12, 14), int), 0))


def test_validate_frame_timestamp_monotone():
    frame = make_frame(t_us=100)
    validate_frame(frame, prev_timestamp_us=50)
    with pytest.raises(NonMonotoneTimestamp):
        validate_frame(frame, prev_timestamp_us=100)


def test_dual_sample_skew_bound():
    palm = make_frame(Side.PALM, t_us=0)
    dorsum = make_frame(Side.DORSUM, t_us=80_000)
    with pytest.raises(NonMonotoneTimestamp):
        DualSample(palm, dorsum, 0)


def test_dual_sample_sides_checked():
    with pytest.raises(DimensionMismatch):
        DualSample(make_frame(Side.DORSUM), make_frame(Side.DORSUM), 0)


def test_enumeration_totality():
    states = joint_states()
    assert len(states) == 36
    assert len(set(states)) == 36
    assert len(RateClass) == 3 and len(ForceClass) == 3 and len(PoseClass) == 4


def test_subject_profile_rejects_nonpositive_weight():
    with pytest.raises(ValueError):
        SubjectProfile("x", 0.0)


def test_session_log_roundtrip(tmp_path, rng):
    log = SessionLog()
    log.add_meta("subj", {"a": 1}, start_wallclock=123.0)
    sample = make_sample(
        seq=0, t_us=70_000,
        palm_counts=rng.integers(0, ADC_MAX + 1, (ROWS, COLS)),
        dorsum_counts=rng.integers(0, ADC_MAX + 1, (ROWS, COLS)),
    )
    log.add_sample(sample)
    log.add_force(70_000, 312.5)
    log.add_pose(70_000, PoseClass.LEFT_SKEWED)
    log.add_prediction(70_000, None, ForceClass.CORRECT, PoseClass.CORRECT)
    log.add_haptic(140_000, "center", 73, 80.0)

    path = tmp_path / "session.jsonl"
    log.dump(path)
    back = SessionLog.load(path)
    assert back.records == log.records

    frames = back.frames(Side.PALM)
    assert len(frames) == 1
    assert frames[0] == sample.palm


def test_session_log_rejects_corrupt(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"k":"meta"}\nnot json\n')
    from cprglove.core import CorruptLog
    with pytest.raises(CorruptLog):
        SessionLog.load(path)
