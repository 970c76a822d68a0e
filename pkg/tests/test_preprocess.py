import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cprglove.core import COLS, ROWS, Side
from cprglove.preprocess import (Baseline, DegenerateData, EmptySeries,
                                 PcaProjection, SideMismatch, align_streams,
                                 aggregate_signal, apply_pca, detect_peaks,
                                 fit_pca, kgf_to_newton, normalize_frame,
                                 offset_correct)
from conftest import make_frame


# ---------------------------------------------------------------------------
# offset correction

def test_offset_correct_subtracts():
    baseline = Baseline(Side.PALM, np.full((ROWS, COLS), 2000.0))
    out = offset_correct(make_frame(fill=1500), baseline)
    assert np.all(out == 500)


def test_offset_correct_identity():
    baseline = Baseline(Side.PALM, np.full((ROWS, COLS), 1800.0))
    assert np.all(offset_correct(make_frame(fill=1800), baseline) == 0)


def test_offset_correct_keeps_negative_values():
    baseline = Baseline(Side.PALM, np.full((ROWS, COLS), 1800.0))
    out = offset_correct(make_frame(fill=1850), baseline)
    assert np.all(out == -50)


def test_offset_correct_side_mismatch():
    baseline = Baseline(Side.DORSUM, np.full((ROWS, COLS), 2000.0))
    with pytest.raises(SideMismatch):
        offset_correct(make_frame(side=Side.PALM), baseline)


def test_offset_correct_involution(rng):
    baseline = Baseline(Side.PALM, rng.uniform(1000, 3000, (ROWS, COLS)))
    raw = rng.integers(0, 8192, (ROWS, COLS))
    frame = make_frame(counts=raw)
    assert np.allclose(baseline.counts - offset_correct(frame, baseline), raw)


# ---------------------------------------------------------------------------
# aggregate

def test_aggregate_constant():
    g = np.full((ROWS, COLS), 500.0)
    assert aggregate_signal(g, g) == 500.0


def test_aggregate_half_half():
    a = np.zeros((ROWS, COLS))
    b = np.full((ROWS, COLS), 100.0)
    assert aggregate_signal(a, b) == 50.0


def test_aggregate_matches_direct_sum(rng):
    a = rng.normal(size=(ROWS, COLS))
    b = rng.normal(size=(ROWS, COLS))
    # oracle: plain elementwise accumulation
    total = 0.0
    for grid in (a, b):
        for i in range(ROWS):
            for j in range(COLS):
                total += grid[i, j]
    assert aggregate_signal(a, b) == pytest.approx(total / 364, rel=1e-12)


# ---------------------------------------------------------------------------
# peak detection

def _oracle_peaks(t, v, half_us, theta):
    """Brute-force argmax-per-window reference."""
    out = []
    for i in range(len(t)):
        idx = [j for j in range(len(t)) if abs(t[j] - t[i]) <= half_us]
        others = [v[j] for j in idx if j != i]
        if others and max(others) < v[i] and v[i] - min(v[j] for j in idx) > theta:
            out.append(i)
    return out


def test_constant_series_has_no_peaks():
    series = [(i * 70_000, 1.0) for i in range(50)]
    assert len(detect_peaks(series)) == 0


def test_empty_series_raises():
    with pytest.raises(EmptySeries):
        detect_peaks([])


def _raised_cosine_series(period_ms=550.0, pulses=10, rate_hz=14.3):
    dt_us = int(1e6 / rate_hz)
    series = []
    t = 0
    while t <= pulses * period_ms * 1000:
        phase = (t / 1000.0) % period_ms / period_ms
        series.append((t, 0.5 * (1 - math.cos(2 * math.pi * phase))))
        t += dt_us
    crests = [int((i + 0.5) * period_ms * 1000) for i in range(pulses)]
    return series, crests


def test_pulse_train_one_peak_per_pulse_within_one_frame():
    series, crests = _raised_cosine_series()
    peaks = detect_peaks(series, prominence=0.1)
    assert len(peaks) == len(crests)
    for pt, crest in zip(peaks.timestamps_us, crests):
        assert abs(pt - crest) <= 70_000
    # agree with the brute-force oracle
    t = [s[0] for s in series]
    v = [s[1] for s in series]
    oracle = _oracle_peaks(t, v, 300_000, 0.1)
    assert list(peaks.timestamps_us) == [t[i] for i in oracle]


def test_close_pulses_suppressed():
    # two crests 200 ms apart inside one 600 ms window: only the taller wins
    series = []
    for i in range(40):
        t = i * 25_000
        v = 0.0
        for crest, amp in ((300_000, 1.0), (500_000, 0.8)):
            v += amp * math.exp(-0.5 * ((t - crest) / 60_000) ** 2)
        series.append((t, v))
    peaks = detect_peaks(series, prominence=0.1)
    assert len(peaks) == 1
    t = [s[0] for s in series]
    v = [s[1] for s in series]
    assert list(peaks.timestamps_us) == [t[i] for i in _oracle_peaks(t, v, 300_000, 0.1)]


def test_peaks_invariant_under_time_shift():
    series, _ = _raised_cosine_series()
    peaks = detect_peaks(series, prominence=0.1)
    shifted = [(t + 123_456, v) for t, v in series]
    speaks = detect_peaks(shifted, prominence=0.1)
    assert np.array_equal(speaks.timestamps_us - 123_456, peaks.timestamps_us)


def test_refined_peaks_hit_the_crest():
    series, crests = _raised_cosine_series()
    peaks = detect_peaks(series, prominence=0.1, refine=True)
    for pt, crest in zip(peaks.timestamps_us, crests):
        assert abs(pt - crest) <= 10_000  # sub-frame accuracy


def test_minima_are_retained():
    series, _ = _raised_cosine_series()
    peaks = detect_peaks(series, prominence=0.1)
    assert len(peaks.minima_timestamps_us) > 0


# ---------------------------------------------------------------------------
# PCA

def _pca_oracle(X, threshold=0.95):
    """Dense symmetric eigensolver on the covariance matrix."""
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / len(X)
    evals = np.linalg.eigvalsh(cov)[::-1]
    evals = np.clip(evals, 0, None)
    ratio = evals / evals.sum()
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, threshold - 1e-12) + 1)
    return k, ratio


def test_pca_rank_one_line(rng):
    direction = rng.normal(size=364)
    X = np.outer(rng.normal(size=40), direction)
    proj = fit_pca(X)
    assert proj.k == 1


def test_pca_equal_variances_need_both():
    X = np.zeros((40, 364))
    X[::2, 0] = 1.0
    X[1::2, 0] = -1.0
    X[::2, 1] = np.tile([1.0, -1.0], 10)
    X[1::2, 1] = np.tile([-1.0, 1.0], 10)
    proj = fit_pca(X)
    assert proj.k == 2


def test_pca_matches_eigensolver_oracle(rng):
    X = rng.normal(size=(50, 364)) * rng.uniform(0.1, 3.0, 364)
    proj = fit_pca(X)
    k, ratio = _pca_oracle(X)
    assert proj.k == k
    assert np.allclose(proj.explained_ratio, ratio[:k], atol=1e-9)
    assert proj.explained_ratio.sum() >= 0.95 - 1e-12


def test_pca_components_orthonormal(rng):
    X = rng.normal(size=(30, 20))
    proj = fit_pca(X)
    gram = proj.components @ proj.components.T
    assert np.allclose(gram, np.eye(proj.k), atol=1e-9)


def test_pca_rejects_zero_variance():
    with pytest.raises(DegenerateData):
        fit_pca(np.ones((5, 8)))


def test_apply_pca_centers():
    X = np.vstack([np.eye(4)[0] * 3, -np.eye(4)[0] * 3, np.zeros(4), np.zeros(4)])
    proj = fit_pca(X, threshold=0.9)
    assert np.allclose(apply_pca(proj, proj.mean), 0.0)


def test_apply_pca_component_maps_to_unit():
    X = np.random.default_rng(0).normal(size=(20, 6))
    proj = fit_pca(X)
    out = apply_pca(proj, proj.mean + proj.components[0])
    expected = np.zeros(proj.k)
    expected[0] = 1.0
    assert np.allclose(out, expected, atol=1e-9)


def test_apply_pca_matches_naive_multiply(rng):
    X = rng.normal(size=(25, 10))
    proj = fit_pca(X)
    x = rng.normal(size=10)
    # oracle: explicit double loop
    centered = [x[j] - proj.mean[j] for j in range(10)]
    expected = [
        sum(proj.components[i, j] * centered[j] for j in range(10))
        for i in range(proj.k)
    ]
    assert np.allclose(apply_pca(proj, x), expected, atol=1e-9)


# ---------------------------------------------------------------------------
# normalization

def test_normalize_affine_endpoints(rng):
    g = rng.uniform(-50, 450, (ROWS, COLS))
    g.flat[0], g.flat[1] = -50.0, 450.0
    out = normalize_frame(g)
    assert out.min() == 0.0 and out.max() == 1.0


def test_normalize_constant_grid_is_zero():
    assert np.all(normalize_frame(np.full((ROWS, COLS), 7.0)) == 0.0)


def test_normalize_preserves_ordering(rng):
    g = rng.normal(size=(ROWS, COLS))
    out = normalize_frame(g)
    assert np.all((out >= 0) & (out <= 1))
    assert np.array_equal(np.argsort(g.ravel()), np.argsort(out.ravel()))


def test_normalize_idempotent(rng):
    g = rng.normal(size=(ROWS, COLS))
    once = normalize_frame(g)
    assert np.allclose(normalize_frame(once), once)


# ---------------------------------------------------------------------------
# stream alignment

def test_align_nearest():
    pairs, dropped = align_streams([(100_000, 5.0)], [70_000, 140_000])
    assert pairs == [(70_000, 5.0)] and dropped == 0


def test_align_midpoint_earlier_wins():
    pairs, _ = align_streams([(105_000, 5.0)], [70_000, 140_000])
    assert pairs == [(70_000, 5.0)]


def test_align_far_samples_dropped():
    pairs, dropped = align_streams([(1_000_000, 5.0)], [70_000, 140_000])
    assert pairs == [] and dropped == 1


def test_align_10hz_onto_tactile_no_drops():
    tactile = list(range(0, 10_000_001, 70_000))
    force = [(t, 1.0) for t in range(0, 10_000_001, 100_000)]
    pairs, dropped = align_streams(force, tactile)
    assert dropped == 0 and len(pairs) == len(force)
    # oracle: exhaustive nearest neighbor with the earlier-wins rule
    for (tact_t, _), (force_t, _) in zip(pairs, force):
        best = min(tactile, key=lambda t: (abs(t - force_t), t))
        assert tact_t == best


def test_align_order_preserving(rng):
    tactile = np.cumsum(rng.integers(50_000, 72_001, 100)).tolist()
    force = [(int(t), 1.0) for t in np.linspace(tactile[0], tactile[-1], 40)]
    pairs, _ = align_streams(force, tactile)
    ts = [p[0] for p in pairs]
    assert ts == sorted(ts)


# ---------------------------------------------------------------------------
# unit conversion

@pytest.mark.parametrize("kgf,newton", [(1.0, 9.81), (0.0, 0.0), (60.0, 588.6)])
def test_kgf_to_newton(kgf, newton):
    assert kgf_to_newton(kgf) == pytest.approx(newton, abs=1e-9)


@given(st.floats(-1e6, 1e6))
def test_kgf_linear(x):
    assert kgf_to_newton(x) == pytest.approx(9.81 * x, rel=1e-12)
