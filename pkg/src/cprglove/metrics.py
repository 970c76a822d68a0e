"""Deterministic CPR quality classification and session reporting.

Rate comes straight from inter-peak intervals (no model); the force band
derives from body weight; per-compression verdicts combine all three
dimensions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import CprgloveError, ForceClass, PoseClass, RateClass

GRAVITY_BAND = 9.8  # the band formula's constant, distinct from kgf's 9.81

RATE_FAST_MS = 500.0
RATE_SLOW_MS = 600.0


class NonPositiveInterval(CprgloveError):
    pass


class NonPositiveWeight(CprgloveError):
    pass


class TooFewPeaks(CprgloveError):
    pass


def classify_rate(dt_ms: float) -> RateClass:
    """Too fast below 500 ms, correct on [500, 600] ms, too slow above."""
    if dt_ms <= 0:
        raise NonPositiveInterval(f"interval must be positive, got {dt_ms}")
    if dt_ms < RATE_FAST_MS:
        return RateClass.TOO_FAST
    if dt_ms <= RATE_SLOW_MS:
        return RateClass.CORRECT
    return RateClass.TOO_SLOW


@dataclass(frozen=True)
class ForceBand:
    f1: float
    f2: float
    weight_kg: float

    def __post_init__(self):
        if not 0 < self.f1 < self.f2:
            raise NonPositiveWeight(f"invalid band [{self.f1}, {self.f2}]")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.f1 + self.f2)


def force_band(weight_kg: float, stepwise: bool = False) -> ForceBand:
    """Target force band for a trainee of the given body weight.

    Canonical form: [0.5w*9.8, 0.6w*9.8] N. The stepwise variant anchors
    90 kg and above at [500, 600] N and shrinks that base band by 10% for
    every full 10 kg below 90 (non-compounding).
    """
    if weight_kg <= 0:
        raise NonPositiveWeight(f"weight must be positive, got {weight_kg}")
    if stepwise:
        steps = 0 if weight_kg >= 90 else int((90.0 - weight_kg) // 10.0)
        factor = max(0.1, 1.0 - 0.1 * steps)
        return ForceBand(500.0 * factor, 600.0 * factor, weight_kg)
    # 0.5*9.8 and 0.6*9.8 as exact ratios, so round weights give round bands
    return ForceBand(weight_kg * 49.0 / 10.0, weight_kg * 294.0 / 50.0, weight_kg)


def classify_force(value, band: ForceBand) -> ForceClass:
    """Classify a peak force against the band.

    Accepts either a ground-truth value in newtons or an already-predicted
    ForceClass (passed through unchanged). Band edges count as correct,
    mirroring the inclusive rate bounds.
    """
    if isinstance(value, ForceClass):
        return value
    f = float(value)
    if f < band.f1:
        return ForceClass.TOO_WEAK
    if f <= band.f2:
        return ForceClass.CORRECT
    return ForceClass.TOO_STRONG


def compute_intervals(peak_timestamps_us) -> list[float]:
    """Adjacent peak-to-peak intervals in milliseconds."""
    t = np.asarray(list(peak_timestamps_us), dtype=np.float64)
    if len(t) < 2:
        raise TooFewPeaks(f"need at least 2 peaks, got {len(t)}")
    return list(np.diff(t) / 1000.0)


@dataclass(frozen=True)
class CompressionVerdict:
    peak_t_us: float
    rate: RateClass | None  # None marks the first compression of a session
    force: ForceClass
    pose: PoseClass
    dt_ms: float | None
    force_scores: dict = field(default_factory=dict)

    @property
    def is_first(self) -> bool:
        return self.rate is None


def session_report(verdicts: list[CompressionVerdict]) -> dict:
    """Histograms, per-dimension correct fractions and interval statistics."""
    rate_hist = {c.value: 0 for c in RateClass}
    force_hist = {c.value: 0 for c in ForceClass}
    pose_hist = {c.value: 0 for c in PoseClass}
    dts = []
    timeline = []
    n_rated = 0
    for v in verdicts:
        if v.rate is not None:
            rate_hist[v.rate.value] += 1
            n_rated += 1
        force_hist[v.force.value] += 1
        pose_hist[v.pose.value] += 1
        if v.dt_ms is not None:
            dts.append(v.dt_ms)
        timeline.append(
            {
                "t_us": v.peak_t_us,
                "rate": v.rate.value if v.rate else None,
                "force": v.force.value,
                "pose": v.pose.value,
            }
        )
    n = len(verdicts)
    frac = {
        "rate": rate_hist["correct"] / n_rated if n_rated else 0.0,
        "force": force_hist["correct"] / n if n else 0.0,
        "pose": pose_hist["correct"] / n if n else 0.0,
    }
    return {
        "compressions": n,
        "rate_hist": rate_hist,
        "force_hist": force_hist,
        "pose_hist": pose_hist,
        "fraction_correct": frac,
        "dt_ms_mean": float(np.mean(dts)) if dts else None,
        "dt_ms_std": float(np.std(dts)) if dts else None,
        "timeline": timeline,
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2)


def report_to_table(report: dict) -> str:
    """Aligned-column text rendering of a session report."""
    lines = []
    lines.append(f"compressions        {report['compressions']:>6d}")
    if report["dt_ms_mean"] is not None:
        lines.append(
            f"interval ms         {report['dt_ms_mean']:>8.1f} +/- {report['dt_ms_std']:.1f}"
        )
    header = f"{'dimension':<12}{'class':<16}{'count':>6}"
    lines.append(header)
    lines.append("-" * len(header))
    for dim, hist in (("rate", report["rate_hist"]),
                      ("force", report["force_hist"]),
                      ("pose", report["pose_hist"])):
        for label, count in hist.items():
            lines.append(f"{dim:<12}{label:<16}{count:>6d}")
        lines.append(
            f"{dim:<12}{'fraction correct':<16}{report['fraction_correct'][dim]:>6.2f}"
        )
    return "\n".join(lines)
