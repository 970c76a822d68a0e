"""Hardware-in-the-loop stand-in for the glove.

Models each sensing cell as a force-dependent resistance read through a
4.7 kOhm pull-up divider into a 13-bit ADC, scans full 13x14 frames at a
jittered ~14.3 Hz, synthesizes calibration and compression scripts from
pose footprint templates, and emits synchronized tactile + ground-truth
force streams as a SessionLog.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import (ADC_MAX, COLS, ROWS, DualSample, PoseClass, SessionLog,
                   Side, SubjectProfile, TactileFrame)
from .metrics import force_band
from .preprocess import KGF_TO_N

PULLUP_OHM = 4700.0
VREF_V = 3.3  # config default; counts themselves are vref-independent

NOMINAL_PERIOD_US = 70_000
PERIOD_MIN_US = 50_000
PERIOD_MAX_US = 72_000

FORCE_RATE_HZ = 10.0


@dataclass(frozen=True)
class CellModel:
    """One resistive cell: R0/(1 + k*F) with a branch-dependent hysteresis
    multiplier and additive ADC noise."""

    r0_ohm: float = 50_000.0
    k_per_n: float = 0.02
    hysteresis: float = 0.0      # h in [0, 1): loading/unloading sensitivity split
    crosstalk: float = 0.0       # alpha in [0, 0.2]
    noise_counts: float = 0.0    # sigma of the additive ADC noise

    def __post_init__(self):
        if self.r0_ohm <= 0 or self.k_per_n < 0:
            raise ValueError("resistance parameters must be positive")
        if not 0 <= self.hysteresis < 1:
            raise ValueError("hysteresis must lie in [0, 1)")
        if not 0 <= self.crosstalk <= 0.2:
            raise ValueError("crosstalk must lie in [0, 0.2]")


def sample_cell(model: CellModel, force_n: float, vref: float = VREF_V,
                pullup: float = PULLUP_OHM, loading: bool = True,
                rng: np.random.Generator | None = None,
                quantize: bool = True) -> float:
    """ADC counts for one cell under the given force.

    The cell sits below the pull-up, so pressing (lower R) lowers the
    counts. `vref` cancels out of the ratio but stays in the signature for
    symmetry with the voltage-domain view used in characterization.
    """
    if force_n < 0:
        raise ValueError("force must be non-negative")
    branch = 1.0 if loading else -1.0
    counts = _kernels.divider_counts(
        np.float64(force_n), branch, model.r0_ohm, model.k_per_n,
        model.hysteresis, pullup,
    )
    if rng is not None and model.noise_counts > 0:
        counts = counts + rng.normal(0.0, model.noise_counts)
    if quantize:
        counts = min(max(round(float(counts)), 0), ADC_MAX)
    return counts


def cell_voltage(counts: float, vref: float = VREF_V) -> float:
    return counts / ADC_MAX * vref


@dataclass
class ScanClock:
    """Frame timestamps advancing by 70 ms plus seeded jitter, clamped to
    the [50, 72] ms band."""

    rng: np.random.Generator
    jitter_us: int = 2_000
    t_us: int = 0

    def advance(self) -> int:
        period = NOMINAL_PERIOD_US + int(self.rng.uniform(-self.jitter_us, self.jitter_us))
        period = min(max(period, PERIOD_MIN_US), PERIOD_MAX_US)
        self.t_us += period
        return self.t_us


def scan_frame(model: CellModel, force_grid: np.ndarray, side: Side, t_us: int,
               loading: bool = True,
               rng: np.random.Generator | None = None) -> TactileFrame:
    """Sample every cell of one side row-major, leaking `crosstalk` times
    each cell's count drop into its 4-neighbors."""
    force_grid = np.asarray(force_grid, dtype=np.float64)
    if force_grid.shape != (ROWS, COLS):
        raise ValueError(f"force grid must be {ROWS}x{COLS}")
    branch = np.full((1, ROWS, COLS), 1.0 if loading else -1.0)
    counts = _kernels.synth_counts(
        force_grid[None, :, :], branch, model.crosstalk,
        model.r0_ohm, model.k_per_n, model.hysteresis, PULLUP_OHM,
    )[0]
    if rng is not None and model.noise_counts > 0:
        counts = counts + rng.normal(0.0, model.noise_counts, counts.shape)
    counts = np.clip(np.rint(counts), 0, ADC_MAX).astype(np.int32)
    return TactileFrame(side, counts, t_us)


# ---------------------------------------------------------------------------
# Pose footprint templates

def _gaussian_blob(row_c, col_c, sigma_r, sigma_c):
    rr, cc = np.mgrid[0:ROWS, 0:COLS]
    return np.exp(-0.5 * (((rr - row_c) / sigma_r) ** 2 + ((cc - col_c) / sigma_c) ** 2))


@dataclass(frozen=True)
class PoseTemplate:
    """Normalized 13x14 force footprints, one per side; palm+dorsum weights
    sum to 1 so a scalar force splits across the contact area."""

    palm: np.ndarray
    dorsum: np.ndarray

    def __post_init__(self):
        total = self.palm.sum() + self.dorsum.sum()
        object.__setattr__(self, "palm", self.palm / total)
        object.__setattr__(self, "dorsum", self.dorsum / total)


def default_templates() -> dict:
    """Heel-of-palm blob for a correct pose, +/-3 column shifts for the
    skewed poses, added dorsum contact for finger release."""
    heel = _gaussian_blob(8.0, 6.5, 2.2, 2.6)
    near_zero = np.full((ROWS, COLS), 1e-12)
    knuckle = _gaussian_blob(4.0, 6.5, 2.0, 3.0)
    # finger release shifts a quarter of the contact mass onto the dorsum
    knuckle = knuckle / knuckle.sum() * heel.sum() / 3.0
    return {
        PoseClass.CORRECT: PoseTemplate(heel, near_zero),
        PoseClass.LEFT_SKEWED: PoseTemplate(np.roll(heel, -3, axis=1), near_zero),
        PoseClass.RIGHT_SKEWED: PoseTemplate(np.roll(heel, 3, axis=1), near_zero),
        PoseClass.FINGER_RELEASE: PoseTemplate(heel * 0.75, knuckle),
    }


def center_of_pressure_col(grid: np.ndarray) -> float:
    w = np.asarray(grid, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return float(COLS - 1) / 2
    cols = np.arange(COLS)
    return float((w.sum(axis=0) * cols).sum() / total)


# ---------------------------------------------------------------------------
# Scripts

@dataclass(frozen=True)
class CompressionScript:
    """Declarative description of one recording stage."""

    kind: str                     # step_press | ramp | free | pose_series
    cpm: float = 110.0
    peak_force_n: float = 300.0
    pose: PoseClass = PoseClass.CORRECT
    count: int = 20
    step_n: float = 10.0          # step_press increment
    press_s: float = 3.0
    release_s: float = 1.0
    force_range_n: tuple | None = None  # free: explicit crest range override

    def __post_init__(self):
        if self.kind not in ("step_press", "ramp", "free", "pose_series"):
            raise ValueError(f"unknown script kind {self.kind!r}")
        if self.peak_force_n <= 0 or self.cpm <= 0 or self.count <= 0:
            raise ValueError("script parameters must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "CompressionScript":
        d = dict(d)
        if "pose" in d:
            d["pose"] = PoseClass(d["pose"])
        if "force_range_n" in d and d["force_range_n"] is not None:
            d["force_range_n"] = tuple(d["force_range_n"])
        return cls(**d)


def _raised_cosine(phase):
    """Hann pulse: 0 at the edges, 1 at phase 0.5."""
    return 0.5 * (1.0 - math.cos(2.0 * math.pi * phase))


def force_waveform(script: CompressionScript, profile: SubjectProfile,
                   rng: np.random.Generator):
    """Scalar ground-truth force f(t) for the script, as a callable plus the
    total duration and the list of (crest_t_s, crest_force_n)."""
    if script.kind == "step_press":
        levels = np.arange(script.step_n, script.peak_force_n + 1e-9, script.step_n)
        cycle = script.press_s + script.release_s
        duration = len(levels) * cycle
        crests = [((i + 0.5) * cycle - script.release_s / 2, float(f))
                  for i, f in enumerate(levels)]

        def f(t):
            i = int(t // cycle)
            if i >= len(levels):
                return 0.0
            within = t - i * cycle
            return float(levels[i]) if within < script.press_s else 0.0

        return f, duration, crests

    if script.kind == "ramp":
        duration = 2.0 * script.press_s
        crests = [(script.press_s, script.peak_force_n)]

        def f(t):
            half = script.press_s
            if t < half:
                return script.peak_force_n * t / half
            if t < duration:
                return script.peak_force_n * (duration - t) / half
            return 0.0

        return f, duration, crests

    # free-style and pose-series compressions: one raised cosine per cycle
    period = 60.0 / script.cpm
    band = force_band(profile.weight_kg)
    if script.force_range_n is not None:
        lo, hi = script.force_range_n
    else:
        lo, hi = 0.7 * band.midpoint, 1.3 * band.midpoint
    amps = rng.uniform(lo, hi, script.count)
    duration = script.count * period
    crests = [((i + 0.5) * period, float(a)) for i, a in enumerate(amps)]

    def f(t):
        i = int(t // period)
        if i >= script.count:
            return 0.0
        return float(amps[i]) * _raised_cosine((t - i * period) / period)

    return f, duration, crests


def generate_script(script: CompressionScript, profile: SubjectProfile,
                    seed: int = 0, rate_hz: float = 1.0 / 0.070):
    """Time series of (t_s, palm force field, dorsum force field, force_n,
    pose label) sampled densely at the tactile rate."""
    rng = np.random.default_rng(seed)
    f, duration, crests = force_waveform(script, profile, rng)
    template = default_templates()[script.pose]
    out = []
    t = 0.0
    dt = 1.0 / rate_hz
    while t < duration:
        force = f(t)
        out.append(
            (t, force * template.palm, force * template.dorsum, force, script.pose)
        )
        t += dt
    return out, crests


# ---------------------------------------------------------------------------
# Full session simulation

@dataclass(frozen=True)
class SessionScript:
    """One session = quiescent prefix then a list of stages with gaps."""

    stages: tuple
    quiet_s: float = 11.0
    gap_s: float = 1.5

    @classmethod
    def from_json(cls, doc: dict) -> "SessionScript":
        stages = tuple(CompressionScript.from_dict(s) for s in doc["stages"])
        return cls(stages, doc.get("quiet_s", 11.0), doc.get("gap_s", 1.5))


@dataclass
class SimResult:
    samples: list          # DualSample stream
    log: SessionLog
    crests: list           # (t_us, force_n, pose) ground truth


def simulate_session(session: SessionScript, profile: SubjectProfile,
                     cell: CellModel, seed: int = 0,
                     jitter_us: int = 2_000) -> SimResult:
    """Run every stage through the scan model.

    Produces a jittered 14.3 Hz DualSample stream, a 10 Hz ground-truth
    force stream (generated in kgf and converted to newtons, mirroring the
    load-cell path), pose labels at each crest, and the SessionLog holding
    all of it. Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    clock = ScanClock(rng=np.random.default_rng(seed + 1), jitter_us=jitter_us)
    log = SessionLog()
    # simulated sessions pin the wall-clock so equal seeds give byte-equal logs
    log.add_meta(profile.id, {"seed": seed, "weight_kg": profile.weight_kg},
                 start_wallclock=0.0)

    # assemble the scalar timeline stage by stage
    segments = []  # (t_start_s, duration, f(t_local), template, pose)
    crest_truth = []
    zero_tpl = default_templates()[PoseClass.CORRECT]
    cursor = session.quiet_s
    for stage in session.stages:
        f, duration, crests = force_waveform(stage, profile, rng)
        tpl = default_templates()[stage.pose]
        segments.append((cursor, duration, f, tpl, stage.pose))
        for ct, cf in crests:
            crest_truth.append(((cursor + ct) * 1e6, cf, stage.pose))
        cursor += duration + session.gap_s
    total_s = cursor

    def field_at(t_s):
        for start, duration, f, tpl, _pose in segments:
            if start <= t_s < start + duration:
                force = f(t_s - start)
                return force * tpl.palm, force * tpl.dorsum, force
        z = np.zeros((ROWS, COLS))
        return z, z, 0.0

    samples = []
    prev_force = 0.0
    seq = 0
    next_force_t = 0.0
    force_events = []
    t_us = 0
    while t_us / 1e6 < total_s:
        t_s = t_us / 1e6
        palm_field, dorsum_field, force = field_at(t_s)
        loading = force >= prev_force
        prev_force = force
        palm = scan_frame(cell, palm_field, Side.PALM, t_us, loading, rng)
        dorsum = scan_frame(cell, dorsum_field, Side.DORSUM, t_us, loading, rng)
        sample = DualSample(palm, dorsum, seq)
        samples.append(sample)
        log.add_sample(sample)
        seq += 1
        t_us = clock.advance()

    # ground-truth force channel at ~10 Hz, reported in kgf then converted
    while next_force_t < total_s:
        _, _, force = field_at(next_force_t)
        kgf = force / KGF_TO_N
        force_events.append((int(next_force_t * 1e6), kgf * KGF_TO_N))
        next_force_t += 1.0 / FORCE_RATE_HZ
    for t_f, newton in force_events:
        log.add_force(t_f, newton)
    for ct_us, cf, pose in crest_truth:
        log.add_pose(int(ct_us), pose)

    log.records.sort(key=lambda r: (r.get("t_us", -1), r["k"] == "pose"))
    return SimResult(samples=samples, log=log, crests=crest_truth)
