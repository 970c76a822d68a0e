"""Sensor metrics: hysteresis loop-area ratio, cyclic amplitude drift,
local/global SNR and per-cell force from contact pressure."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import COLS, ROWS, CprgloveError
from .preprocess import detect_peaks

PATCH_AREA_MM2 = 27.2 * 27.2
PATCH_CELLS = 25


class DegenerateTrace(CprgloveError):
    pass


class TooFewCycles(CprgloveError):
    pass


class ZeroNoise(CprgloveError):
    pass


class NonPositiveSignal(CprgloveError):
    pass


@dataclass(frozen=True)
class LoopTrace:
    """One quasi-static loading/unloading cycle, optionally repeated."""

    loading: list    # (force_n, response), force strictly increasing
    unloading: list  # (force_n, response), force strictly decreasing

    def __post_init__(self):
        lf = [p[0] for p in self.loading]
        uf = [p[0] for p in self.unloading]
        if any(b <= a for a, b in zip(lf, lf[1:])):
            raise DegenerateTrace("loading force must be strictly increasing")
        if any(b >= a for a, b in zip(uf, uf[1:])):
            raise DegenerateTrace("unloading force must be strictly decreasing")


def _interp(points, grid):
    f = np.array([p[0] for p in points], dtype=np.float64)
    r = np.array([p[1] for p in points], dtype=np.float64)
    order = np.argsort(f)
    return np.interp(grid, f[order], r[order])


def hysteresis_ratio(trace: LoopTrace) -> float:
    """Loop area between the branches over the area under the loading curve
    (above the response floor), as a percentage.

    Both integrals use the trapezoid rule on the union force grid with
    linear interpolation, so the ratio is invariant under uniform scaling
    of the response axis.
    """
    if len(trace.loading) < 3 or len(trace.unloading) < 3:
        raise DegenerateTrace("need at least 3 points per branch")
    grid = np.union1d(
        [p[0] for p in trace.loading], [p[0] for p in trace.unloading]
    )
    load = _interp(trace.loading, grid)
    unload = _interp(trace.unloading, grid)
    floor = min(load.min(), unload.min())
    enclosed = np.trapezoid(np.abs(unload - load), grid)
    under_loading = np.trapezoid(load - floor, grid)
    if under_loading <= 0:
        raise DegenerateTrace("loading curve has no area above the floor")
    return 100.0 * float(enclosed / under_loading)


def cycle_drift(cycles) -> float:
    """Peak-valley amplitude drift between the first and last 10 cycles,
    as an absolute percentage of the early amplitude.

    `cycles` is a list of (peak, valley) pairs or of per-cycle sample
    arrays (peak/valley taken as max/min).
    """
    amps = []
    for c in cycles:
        arr = np.asarray(c, dtype=np.float64)
        if arr.ndim == 0 or arr.size < 2:
            raise TooFewCycles("each cycle needs at least a peak and a valley")
        amps.append(float(arr.max() - arr.min()))
    if len(amps) < 20:
        raise TooFewCycles(f"need at least 20 cycles, got {len(amps)}")
    first = float(np.mean(amps[:10]))
    last = float(np.mean(amps[-10:]))
    if first == 0:
        raise DegenerateTrace("zero initial amplitude")
    return 100.0 * abs(first - last) / first


@dataclass(frozen=True)
class PressMask:
    """Pressed-cell layout plus the derived unpressed rings."""

    pressed: np.ndarray  # (13, 14) bool

    def __post_init__(self):
        mask = np.asarray(self.pressed, dtype=bool)
        if mask.shape != (ROWS, COLS):
            raise ValueError(f"mask must be {ROWS}x{COLS}")
        object.__setattr__(self, "pressed", mask)

    @classmethod
    def patch(cls, row0: int, col0: int, size: int = 5) -> "PressMask":
        mask = np.zeros((ROWS, COLS), dtype=bool)
        mask[row0:row0 + size, col0:col0 + size] = True
        return cls(mask)

    @property
    def local_ring(self) -> np.ndarray:
        """Unpressed cells 4- or 8-adjacent to the pressed patch."""
        grown = np.zeros_like(self.pressed)
        p = self.pressed
        grown[:, :] = p
        grown[1:, :] |= p[:-1, :]
        grown[:-1, :] |= p[1:, :]
        grown[:, 1:] |= p[:, :-1]
        grown[:, :-1] |= p[:, 1:]
        grown[1:, 1:] |= p[:-1, :-1]
        grown[1:, :-1] |= p[:-1, 1:]
        grown[:-1, 1:] |= p[1:, :-1]
        grown[:-1, :-1] |= p[1:, 1:]
        return grown & ~self.pressed

    @property
    def unpressed(self) -> np.ndarray:
        return ~self.pressed


def snr_db(frames, mask: PressMask, mode: str = "global",
           peak_indices=None) -> float:
    """20*log10(Signal/Noise) over a corrected frame sequence.

    Signal: median over cycles of the mean corrected value on the pressed
    cells at each cycle's peak. Noise: the same median-of-means statistic
    on the local ring (mode="local") or on all unpressed cells
    (mode="global"). `peak_indices` names each cycle's peak frame; when
    omitted the peaks of the pressed-cell mean series are used.
    """
    if mode not in ("local", "global"):
        raise ValueError("mode must be 'local' or 'global'")
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3:
        raise ValueError("frames must be a (n, 13, 14) sequence")
    pressed = mask.pressed
    ring = mask.local_ring if mode == "local" else mask.unpressed
    if pressed.sum() == 0:
        raise ValueError("mask has no pressed cells")
    if ring.sum() == 0:
        raise ValueError("selected noise ring is empty")
    if peak_indices is None:
        series = frames[:, pressed].mean(axis=1)
        ts = [(i * 70_000, v) for i, v in enumerate(series)]
        peaks = detect_peaks(ts, prominence=0.0)
        peak_indices = (peaks.timestamps_us / 70_000).astype(int)
        if len(peak_indices) == 0:
            peak_indices = [int(np.argmax(series))]
    peak_indices = np.asarray(peak_indices, dtype=int)
    signal = float(np.median(frames[peak_indices][:, pressed].mean(axis=1)))
    noise = float(np.median(np.abs(frames[peak_indices][:, ring].mean(axis=1))))
    if signal <= 0:
        raise NonPositiveSignal(f"signal statistic is {signal}")
    if noise == 0:
        return math.inf  # reported distinctly by callers
    return 20.0 * math.log10(signal / noise)


def force_per_cell(total_force_n: float, patch_area_mm2: float = PATCH_AREA_MM2,
                   cells: int = PATCH_CELLS) -> dict:
    """Uniform-contact pressure and per-cell force on the pressed patch."""
    if total_force_n <= 0 or patch_area_mm2 <= 0 or cells <= 0:
        raise ValueError("inputs must be positive")
    return {
        "pressure_n_per_mm2": total_force_n / patch_area_mm2,
        "force_per_cell_n": total_force_n / cells,
    }


# ---------------------------------------------------------------------------
# Trace CSV: columns cycle, force_N, then one response column per cell.

def read_trace_csv(path):
    """Returns (cycles, forces, responses) arrays grouped per row."""
    cycles, forces, responses = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["cycle", "force_N"]:
            raise DegenerateTrace("trace CSV must start with cycle,force_N columns")
        for row in reader:
            if not row:
                continue
            cycles.append(int(row[0]))
            forces.append(float(row[1]))
            responses.append([float(x) for x in row[2:]])
    return np.array(cycles), np.array(forces), np.array(responses)


def characterize_trace(path) -> dict:
    """Metrics table for a raw trace CSV: per-cycle loops feed hysteresis
    and drift; cell responses are averaged per row."""
    cycles, forces, responses = read_trace_csv(path)
    mean_resp = responses.mean(axis=1)
    per_cycle = {}
    for c in np.unique(cycles):
        sel = cycles == c
        per_cycle[int(c)] = (forces[sel], mean_resp[sel])

    first = per_cycle[min(per_cycle)]
    apex = int(np.argmax(first[0]))
    loading = list(zip(first[0][: apex + 1], first[1][: apex + 1]))
    unloading = list(zip(first[0][apex:], first[1][apex:]))
    out = {"cycles": len(per_cycle)}
    try:
        out["hysteresis_pct"] = hysteresis_ratio(LoopTrace(loading, unloading))
    except DegenerateTrace:
        out["hysteresis_pct"] = None
    if len(per_cycle) >= 20:
        out["drift_pct"] = cycle_drift(
            [resp for _, (_, resp) in sorted(per_cycle.items())]
        )
    else:
        out["drift_pct"] = None
    return out
