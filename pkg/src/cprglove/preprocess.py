"""Signal preprocessing: offset correction, peak sampling, PCA, normalization,
stream alignment and unit conversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import COLS, ROWS, CprgloveError, Side, TactileFrame

KGF_TO_N = 9.81
DEFAULT_PEAK_WINDOW_S = 0.6
ALIGN_MAX_GAP_US = 70_000


class SideMismatch(CprgloveError):
    pass


class EmptySeries(CprgloveError):
    pass


class DegenerateData(CprgloveError):
    pass


class DimensionMismatch(CprgloveError):
    pass


@dataclass(frozen=True)
class Baseline:
    """Per-cell quiescent counts for one side, averaged over the first 10 s."""

    side: Side
    counts: np.ndarray  # (13, 14) float

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.float64)
        if arr.shape != (ROWS, COLS):
            raise DimensionMismatch(f"baseline must be {ROWS}x{COLS}")
        if not np.all(np.isfinite(arr)):
            raise DegenerateData("baseline contains non-finite values")
        object.__setattr__(self, "counts", arr)

    @classmethod
    def from_frames(cls, frames: list[TactileFrame], duration_s: float = 10.0):
        if not frames:
            raise EmptySeries("no frames to estimate a baseline from")
        t0 = frames[0].timestamp_us
        cut = t0 + int(duration_s * 1e6)
        sel = [f.counts for f in frames if f.timestamp_us <= cut]
        return cls(frames[0].side, np.mean(sel, axis=0))


def offset_correct(frame: TactileFrame, baseline: Baseline) -> np.ndarray:
    """baseline - raw, so the corrected signal grows with applied force.

    Negative values (noise) are kept; characterization needs them.
    """
    if frame.side is not baseline.side:
        raise SideMismatch(f"frame is {frame.side.value}, baseline is {baseline.side.value}")
    return baseline.counts - frame.counts


def aggregate_signal(palm_corr: np.ndarray, dorsum_corr: np.ndarray) -> float:
    """Mean of all 364 corrected cell values across both sides."""
    if palm_corr.shape != (ROWS, COLS) or dorsum_corr.shape != (ROWS, COLS):
        raise DimensionMismatch("both grids must be 13x14")
    return float((palm_corr.sum() + dorsum_corr.sum()) / (2 * ROWS * COLS))


@dataclass(frozen=True)
class PeakSet:
    """Compression maxima of the aggregate signal, with the window minima
    kept internally for force pairing."""

    timestamps_us: np.ndarray
    values: np.ndarray
    window_s: float
    minima_timestamps_us: np.ndarray
    minima_values: np.ndarray

    def __len__(self):
        return len(self.timestamps_us)


def _refine_vertex(t: np.ndarray, v: np.ndarray, i: int) -> float:
    """Parabola through the three samples around index i; returns vertex time.

    Recovers sub-frame crest timing: at 14.3 Hz a raw peak index can sit up
    to half a frame away from the true crest, which is enough to push an
    inter-peak interval across the 500/600 ms class boundaries.
    """
    if i == 0 or i == len(t) - 1:
        return float(t[i])
    t0, t1, t2 = float(t[i - 1]), float(t[i]), float(t[i + 1])
    v0, v1, v2 = float(v[i - 1]), float(v[i]), float(v[i + 1])
    # Lagrange second-difference; denominator is the parabola curvature
    d01, d12, d02 = t1 - t0, t2 - t1, t2 - t0
    curv = 2.0 * (v0 / (d01 * d02) - v1 / (d01 * d12) + v2 / (d12 * d02))
    if curv >= 0:
        return t1
    slope = (v2 - v0) / d02 - curv * 0.5 * (t0 + t2 - 2 * t1)
    vertex = t1 - slope / curv
    lo, hi = t1 - 0.5 * d01, t1 + 0.5 * d12
    return float(min(max(vertex, lo), hi))


def detect_peaks(series, window_s: float = DEFAULT_PEAK_WINDOW_S,
                 prominence: float = 0.0, refine: bool = False) -> PeakSet:
    """Sliding-window peak detection on a time-ordered (t_us, value) series.

    A sample is a peak iff it is the strict maximum within +/- window/2 and
    exceeds the window minimum by more than `prominence`. Minima are located
    the same way on the negated series. With refine=True peak timestamps are
    interpolated to the parabolic vertex of the three surrounding samples.
    """
    series = list(series)
    if not series:
        raise EmptySeries("cannot detect peaks on an empty series")
    t = np.asarray([s[0] for s in series], dtype=np.int64)
    v = np.asarray([s[1] for s in series], dtype=np.float64)
    if np.any(np.diff(t) < 0):
        raise EmptySeries("series must be time-ordered")
    if prominence < 0:
        raise ValueError("prominence must be >= 0")
    half = np.int64(round(window_s * 1e6 / 2))
    peak_mask = _kernels.peak_scan(t, v, half, prominence)
    min_mask = _kernels.peak_scan(t, -v, half, prominence)
    pidx = np.nonzero(peak_mask)[0]
    midx = np.nonzero(min_mask)[0]
    if refine:
        pt = np.array([_refine_vertex(t, v, i) for i in pidx])
    else:
        pt = t[pidx].astype(np.float64)
    return PeakSet(
        timestamps_us=pt,
        values=v[pidx],
        window_s=window_s,
        minima_timestamps_us=t[midx].astype(np.float64),
        minima_values=v[midx],
    )


@dataclass(frozen=True)
class PcaProjection:
    """Mean, orthonormal components and explained-variance ratios retained at
    the 95% threshold."""

    mean: np.ndarray          # (d,)
    components: np.ndarray    # (k, d), rows orthonormal
    explained_ratio: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca(samples: np.ndarray, threshold: float = 0.95) -> PcaProjection:
    """PCA via SVD of the centered sample matrix; keeps the smallest number
    of components whose cumulative explained variance reaches `threshold`.

    Component signs are made deterministic: the largest-magnitude entry of
    each component is positive.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateData("need an n x d matrix with n >= 2")
    if not np.all(np.isfinite(X)):
        raise DegenerateData("samples contain non-finite values")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2
    total = var.sum()
    if total <= 0:
        raise DegenerateData("zero total variance")
    ratio = var / total
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, threshold - 1e-12) + 1)
    k = min(k, len(ratio))
    comps = vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaProjection(mean=mean, components=comps, explained_ratio=ratio[:k])


def apply_pca(proj: PcaProjection, x: np.ndarray) -> np.ndarray:
    """(x - mean) projected onto the retained components."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != proj.mean.shape[0]:
        raise DimensionMismatch(
            f"expected dimension {proj.mean.shape[0]}, got {x.shape[-1]}"
        )
    return (x - proj.mean) @ proj.components.T


def normalize_frame(corrected: np.ndarray) -> np.ndarray:
    """Affine rescale of one corrected grid to [0, 1]; constant grids map to
    all zeros."""
    corrected = np.asarray(corrected, dtype=np.float64)
    lo = corrected.min()
    hi = corrected.max()
    if hi == lo:
        return np.zeros_like(corrected)
    return (corrected - lo) / (hi - lo)


def align_streams(force, tactile_t_us):
    """Attach each force sample to the nearest tactile timestamp.

    Exact midpoints resolve to the earlier tactile timestamp; pairs farther
    than 70 ms apart are dropped. Returns (pairs, dropped) where pairs is a
    list of (tactile_t_us, force_n) ordered by tactile timestamp.
    """
    tact = np.asarray(list(tactile_t_us), dtype=np.int64)
    pairs = []
    dropped = 0
    for t_f, newton in force:
        i = int(np.searchsorted(tact, t_f))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(tact):
                d = abs(int(tact[j]) - int(t_f))
                if best is None or d < best[0]:  # strict: earlier wins ties
                    best = (d, int(tact[j]))
        if best is None or best[0] > ALIGN_MAX_GAP_US:
            dropped += 1
            continue
        pairs.append((best[1], float(newton)))
    pairs.sort(key=lambda p: p[0])
    return pairs, dropped


def kgf_to_newton(x: float) -> float:
    return x * KGF_TO_N
