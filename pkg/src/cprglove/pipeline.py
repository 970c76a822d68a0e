"""Closed-loop orchestration: calibration, per-compression classification and
haptic emission, with per-stage latency accounting.

The loop is deliberately single-threaded and deterministic: ingest ->
preprocess -> (on each confirmed peak) infer -> encode feedback. Peaks are
confirmed as soon as half a detection window of newer data exists, so the
verdict for a compression lands roughly 0.3 s after its crest.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import (CprgloveError, DualSample, ForceClass, PoseClass,
                   RateClass, SessionLog, SubjectProfile)
from .haptics import VirtualBus, encode_feedback, schedule_pattern
from .metrics import (CompressionVerdict, classify_force, classify_rate,
                      force_band)
from .models import TrainedModel, predict
from .preprocess import (Baseline, DEFAULT_PEAK_WINDOW_S, aggregate_signal,
                         detect_peaks, normalize_frame, offset_correct,
                         _refine_vertex)

FRAME_PERIOD_US = 70_000
QUIESCENT_S = 10.0
QUIESCENT_FORCE_N = 5.0


class InsufficientQuiescence(CprgloveError):
    pass


class InsufficientCompressions(CprgloveError):
    pass


class ModelMissing(CprgloveError):
    pass


@dataclass
class CalibrationDataset:
    """Labeled peak samples assembled from a calibration session."""

    force_X: np.ndarray   # (n, 364) corrected peak frames
    force_y: list         # ForceClass values
    pose_X: np.ndarray    # (n, 364) normalized peak frames
    pose_y: list          # PoseClass values
    prominence: float     # 5 sigma of the quiescent aggregate signal
    baseline_palm: Baseline = None
    baseline_dorsum: Baseline = None


def _features(palm_corr, dorsum_corr):
    raw = np.concatenate([palm_corr.ravel(), dorsum_corr.ravel()])
    normed = np.concatenate(
        [normalize_frame(palm_corr).ravel(), normalize_frame(dorsum_corr).ravel()]
    )
    return raw, normed


def _nearest(records, t_us, max_gap_us):
    """Nearest (t_us, payload) record to t_us, or None beyond the gap."""
    best = None
    for rt, payload in records:
        d = abs(rt - t_us)
        if best is None or d < best[0]:
            best = (d, payload)
    if best is None or best[0] > max_gap_us:
        return None
    return best[1]


def calibrate(samples, log: SessionLog, subject: SubjectProfile,
              peak_window_s: float = DEFAULT_PEAK_WINDOW_S):
    """Build baselines and a labeled training set from a calibration session.

    `samples` is the DualSample stream; `log` supplies the ground-truth
    force and pose records recorded alongside it. Requires a quiescent
    prefix of at least 10 s before the first real force.
    """
    samples = list(samples)
    if not samples:
        raise InsufficientCompressions("empty sample stream")
    t0 = samples[0].timestamp_us
    force_records = [(r["t_us"], r["newton"]) for r in log.iter_kind("force")]
    pose_records = [(r["t_us"], PoseClass(r["label"])) for r in log.iter_kind("pose")]
    active = [t for t, n in force_records if n > QUIESCENT_FORCE_N]
    if not active:
        raise InsufficientCompressions("no compressions in the calibration stream")
    if (min(active) - t0) / 1e6 < QUIESCENT_S:
        raise InsufficientQuiescence(
            f"first force at {(min(active) - t0) / 1e6:.1f} s; need {QUIESCENT_S} s of quiet"
        )

    quiet = [s for s in samples if s.timestamp_us - t0 <= QUIESCENT_S * 1e6]
    baseline_palm = Baseline.from_frames([s.palm for s in quiet])
    baseline_dorsum = Baseline.from_frames([s.dorsum for s in quiet])

    corr = [
        (offset_correct(s.palm, baseline_palm), offset_correct(s.dorsum, baseline_dorsum))
        for s in samples
    ]
    agg = [aggregate_signal(p, d) for p, d in corr]
    quiet_agg = agg[: len(quiet)]
    prominence = 5.0 * float(np.std(quiet_agg))

    series = list(zip((s.timestamp_us for s in samples), agg))
    peaks = detect_peaks(series, window_s=peak_window_s, prominence=prominence)

    times = np.array([s.timestamp_us for s in samples], dtype=np.float64)
    band = force_band(subject.weight_kg)
    force_X, force_y, pose_X, pose_y = [], [], [], []
    for pt in peaks.timestamps_us:
        i = int(np.argmin(np.abs(times - pt)))
        raw, normed = _features(*corr[i])
        newton = _nearest(force_records, pt, FRAME_PERIOD_US)
        if newton is not None:
            force_X.append(raw)
            force_y.append(classify_force(newton, band))
        pose = _nearest(pose_records, pt, int(peak_window_s * 1e6))
        if pose is not None:
            pose_X.append(normed)
            pose_y.append(pose)
    if len(force_X) < 6 or len(pose_X) < 8:
        raise InsufficientCompressions(
            f"only {len(force_X)} force-labeled and {len(pose_X)} pose-labeled peaks"
        )
    baselines = (baseline_palm, baseline_dorsum)
    return baselines, CalibrationDataset(
        force_X=np.array(force_X),
        force_y=force_y,
        pose_X=np.array(pose_X),
        pose_y=pose_y,
        prominence=prominence,
        baseline_palm=baseline_palm,
        baseline_dorsum=baseline_dorsum,
    )


@dataclass
class PipelineConfig:
    subject: SubjectProfile
    force_model: TrainedModel
    pose_model: TrainedModel
    baseline_palm: Baseline
    baseline_dorsum: Baseline
    prominence: float = 0.0
    peak_window_s: float = DEFAULT_PEAK_WINDOW_S
    channel_capacity: int = 64
    latency_budget_ms: float = 50.0
    haptic_delay_us: int = FRAME_PERIOD_US

    def __post_init__(self):
        if self.latency_budget_ms <= 0:
            raise ValueError("latency budget must be positive")
        for model, name in ((self.force_model, "force"), (self.pose_model, "pose")):
            if model is None:
                raise ModelMissing(f"no {name} model configured")


@dataclass
class LatencyReport:
    """Per-stage wall-clock statistics in ms (mean/std/p99), mirroring the
    record/model split of the latency budget."""

    stages: dict

    @classmethod
    def from_samples(cls, stage_samples: dict) -> "LatencyReport":
        stages = {}
        for name, vals in stage_samples.items():
            arr = np.asarray(vals, dtype=np.float64)
            if arr.size == 0:
                stages[name] = {"mean": 0.0, "std": 0.0, "p99": 0.0, "n": 0}
            else:
                stages[name] = {
                    "mean": float(arr.mean()),
                    "std": float(arr.std()),
                    "p99": float(np.percentile(arr, 99)),
                    "n": int(arr.size),
                }
        return cls(stages)

    def table(self) -> str:
        lines = [f"{'stage':<12}{'mean ms':>10}{'std ms':>10}{'p99 ms':>10}{'n':>8}"]
        for name, s in self.stages.items():
            lines.append(
                f"{name:<12}{s['mean']:>10.3f}{s['std']:>10.3f}{s['p99']:>10.3f}{s['n']:>8d}"
            )
        return "\n".join(lines)


@dataclass
class RunResult:
    verdicts: list
    bus: VirtualBus
    latency: LatencyReport
    log: SessionLog
    dropped_frames: int = 0
    unscored: int = 0


class _StreamingPeakDetector:
    """Confirms a sample as a peak once half a window of newer data exists.

    Same strict-maximum + prominence rule as detect_peaks, applied online;
    timestamps are refined to the local parabolic vertex.
    """

    def __init__(self, window_s: float, prominence: float):
        self.half_us = int(window_s * 1e6 / 2)
        self.prominence = prominence
        self.t = []
        self.v = []
        self.candidate = 0

    def push(self, t_us: int, value: float):
        self.t.append(t_us)
        self.v.append(value)
        out = []
        while self.candidate < len(self.t) - 1 and (
            self.t[-1] >= self.t[self.candidate] + self.half_us
        ):
            i = self.candidate
            lo = i
            while lo > 0 and self.t[lo - 1] >= self.t[i] - self.half_us:
                lo -= 1
            hi = i
            while hi + 1 < len(self.t) and self.t[hi + 1] <= self.t[i] + self.half_us:
                hi += 1
            window = self.v[lo:hi + 1]
            vi = self.v[i]
            others = window[: i - lo] + window[i - lo + 1:]
            if others and max(others) < vi and vi - min(window) > self.prominence:
                t_arr = np.asarray(self.t[lo:hi + 1], dtype=np.float64)
                v_arr = np.asarray(window, dtype=np.float64)
                out.append((_refine_vertex(t_arr, v_arr, i - lo), vi))
            self.candidate += 1
        return out


def run_loop(source, cfg: PipelineConfig) -> RunResult:
    """Consume a DualSample stream and produce per-compression verdicts,
    haptic bus activity, the latency report and the session log."""
    detector = _StreamingPeakDetector(cfg.peak_window_s, cfg.prominence)
    bus = VirtualBus()
    log = SessionLog()
    log.add_meta(cfg.subject.id, {"weight_kg": cfg.subject.weight_kg})
    band = force_band(cfg.subject.weight_kg)

    verdicts = []
    unscored = 0
    timings = {"record": [], "preprocess": [], "infer": [], "encode": []}
    pending = deque(maxlen=cfg.channel_capacity)
    dropped = 0

    corr_by_t = {}
    prev_peak_t = None

    for sample in source:
        t0 = time.perf_counter()
        if len(pending) == pending.maxlen:
            pending.popleft()
            dropped += 1
        pending.append(sample)
        log.add_sample(sample)
        timings["record"].append((time.perf_counter() - t0) * 1e3)

        sample = pending.pop()
        t1 = time.perf_counter()
        palm_corr = offset_correct(sample.palm, cfg.baseline_palm)
        dorsum_corr = offset_correct(sample.dorsum, cfg.baseline_dorsum)
        corr_by_t[sample.timestamp_us] = (palm_corr, dorsum_corr)
        agg = aggregate_signal(palm_corr, dorsum_corr)
        confirmed = detector.push(sample.timestamp_us, agg)
        horizon = sample.timestamp_us - int(4 * cfg.peak_window_s * 1e6)
        for stale in [t for t in corr_by_t if t < horizon]:
            del corr_by_t[stale]
        timings["preprocess"].append((time.perf_counter() - t1) * 1e3)

        for peak_t, _peak_v in confirmed:
            t2 = time.perf_counter()
            nearest_t = min(corr_by_t, key=lambda t: abs(t - peak_t))
            raw, normed = _features(*corr_by_t[nearest_t])
            try:
                force_label, force_scores = predict(cfg.force_model, raw)
                pose_label, _ = predict(cfg.pose_model, normed)
                force_cls = ForceClass(force_label)
                pose_cls = PoseClass(pose_label)
            except CprgloveError:
                unscored += 1
                continue
            finally:
                timings["infer"].append((time.perf_counter() - t2) * 1e3)
            if prev_peak_t is None:
                rate_cls, dt_ms = None, None
            else:
                dt_ms = (peak_t - prev_peak_t) / 1e3
                rate_cls = classify_rate(dt_ms)
            prev_peak_t = peak_t
            verdicts.append(
                CompressionVerdict(
                    peak_t_us=peak_t,
                    rate=rate_cls,
                    force=classify_force(force_cls, band),
                    pose=pose_cls,
                    dt_ms=dt_ms,
                    force_scores=force_scores,
                )
            )
            log.add_prediction(int(peak_t), rate_cls, force_cls, pose_cls)

            t3 = time.perf_counter()
            pattern = encode_feedback(rate_cls or RateClass.CORRECT, force_cls, pose_cls)
            events = schedule_pattern(pattern, int(peak_t) + cfg.haptic_delay_us)
            bus.apply(events)
            for ev in events:
                log.add_haptic(ev.start_us, ev.unit.value, ev.pwm, ev.duration_ms)
            timings["encode"].append((time.perf_counter() - t3) * 1e3)

    return RunResult(
        verdicts=verdicts,
        bus=bus,
        latency=LatencyReport.from_samples(timings),
        log=log,
        dropped_frames=dropped,
        unscored=unscored,
    )
