"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Set CPRGLOVE_NO_NUMBA=1 to force the numpy path (useful on platforms
where numba is unavailable, and for the benchmark in benchmarks/).
Both paths compute the same arithmetic; tests compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("CPRGLOVE_NO_NUMBA", "0").lower() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

ADC_MAX = 8191.0


# ---------------------------------------------------------------------------
# Resistive divider: counts for a grid of per-cell forces.
#
# R = R0 / (1 + k*F*(1 + s*h/2)), s = +1 on the loading branch, -1 unloading.
# The sensor sits below the pull-up, so counts = ADC_MAX * R / (R + pullup):
# pressing lowers R and therefore lowers the raw counts.

def _divider_counts_np(force, branch, r0, k, h, pullup):
    sens = 1.0 + branch * (h / 2.0)
    r = r0 / (1.0 + k * force * sens)
    return ADC_MAX * r / (r + pullup)


def _synth_counts_np(force_fields, branch, alpha, r0, k, h, pullup):
    counts = _divider_counts_np(force_fields, branch, r0, k, h, pullup)
    if alpha > 0.0:
        base = ADC_MAX * r0 / (r0 + pullup)
        drop = base - counts
        leak = np.zeros_like(drop)
        leak[:, 1:, :] += drop[:, :-1, :]
        leak[:, :-1, :] += drop[:, 1:, :]
        leak[:, :, 1:] += drop[:, :, :-1]
        leak[:, :, :-1] += drop[:, :, 1:]
        counts = counts - alpha * leak
    return counts


def _synth_counts_loop(force_fields, branch, alpha, r0, k, h, pullup):
    n, rows, cols = force_fields.shape
    counts = np.empty((n, rows, cols), np.float64)
    base = ADC_MAX * r0 / (r0 + pullup)
    for f in range(n):
        for i in range(rows):
            for j in range(cols):
                sens = 1.0 + branch[f, i, j] * (h / 2.0)
                r = r0 / (1.0 + k * force_fields[f, i, j] * sens)
                counts[f, i, j] = ADC_MAX * r / (r + pullup)
    if alpha > 0.0:
        out = counts.copy()
        for f in range(n):
            for i in range(rows):
                for j in range(cols):
                    drop = base - counts[f, i, j]
                    if drop == 0.0:
                        continue
                    if i > 0:
                        out[f, i - 1, j] -= alpha * drop
                    if i < rows - 1:
                        out[f, i + 1, j] -= alpha * drop
                    if j > 0:
                        out[f, i, j - 1] -= alpha * drop
                    if j < cols - 1:
                        out[f, i, j + 1] -= alpha * drop
        counts = out
    return counts


# ---------------------------------------------------------------------------
# Sliding-window peak scan: sample i is a peak iff it is the strict maximum
# of every sample within +/- half_win_us and rises more than theta above the
# window minimum.

def _peak_scan_loop(t_us, values, half_win_us, theta):
    n = t_us.shape[0]
    is_peak = np.zeros(n, np.bool_)
    j0 = 0
    j1 = 0
    for i in range(n):
        while t_us[j0] < t_us[i] - half_win_us:
            j0 += 1
        if j1 < i:
            j1 = i
        while j1 + 1 < n and t_us[j1 + 1] <= t_us[i] + half_win_us:
            j1 += 1
        strict = True
        vmin = values[i]
        for j in range(j0, j1 + 1):
            if j == i:
                continue
            if values[j] >= values[i]:
                strict = False
                break
            if values[j] < vmin:
                vmin = values[j]
        if strict and values[i] - vmin > theta:
            is_peak[i] = True
    return is_peak


def _peak_scan_np(t_us, values, half_win_us, theta):
    n = len(t_us)
    is_peak = np.zeros(n, np.bool_)
    lo = np.searchsorted(t_us, t_us - half_win_us, side="left")
    hi = np.searchsorted(t_us, t_us + half_win_us, side="right")
    for i in range(n):
        win = values[lo[i]:hi[i]]
        if win.max() > values[i]:
            continue
        # strict max: v[i] must occur exactly once in the window
        if np.count_nonzero(win == values[i]) != 1:
            continue
        if values[i] - win.min() > theta:
            is_peak[i] = True
    return is_peak


if USE_NUMBA:
    synth_counts = njit(cache=True)(_synth_counts_loop)
    peak_scan = njit(cache=True)(_peak_scan_loop)
else:
    synth_counts = _synth_counts_np
    peak_scan = _peak_scan_np

divider_counts = _divider_counts_np
