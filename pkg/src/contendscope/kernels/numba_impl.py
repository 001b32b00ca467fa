"""Numba-jitted twins of the numpy kernels.

Same contracts as :mod:`contendscope.kernels.numpy_impl`; the apportioning
kernel runs a two-pointer merge instead of materializing the (m x k)
overlap matrix.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apportion(win_bounds, deltas, slice_bounds):
    m = slice_bounds.shape[0] - 1
    k = win_bounds.shape[0] - 1
    r = deltas.shape[1]
    out = np.zeros((m, r))
    j = 0
    for i in range(m):
        a = slice_bounds[i]
        b = slice_bounds[i + 1]
        while j < k and win_bounds[j + 1] <= a:
            j += 1
        jj = j
        while jj < k and win_bounds[jj] < b:
            lo = max(a, win_bounds[jj])
            hi = min(b, win_bounds[jj + 1])
            if hi > lo:
                frac = (hi - lo) / (win_bounds[jj + 1] - win_bounds[jj])
                for c in range(r):
                    out[i, c] += frac * deltas[jj, c]
            jj += 1
    return out


@njit(cache=True)
def ratp_integrals(wt, ct, ra, dtau):
    m, r = wt.shape
    out = np.zeros(r)
    for i in range(m):
        for j in range(r):
            if ra[i, j] > 0.0:
                out[j] += (wt[i, j] + ct[i, j]) / ra[i, j] * dtau[i]
    return out


@njit(cache=True)
def ratp_blocked_integrals(wt, ra, dtau):
    m, r = wt.shape
    out = np.zeros(r)
    for i in range(m):
        for j in range(r):
            if ra[i, j] > 0.0:
                out[j] += wt[i, j] / ra[i, j] * dtau[i]
    return out


@njit(cache=True)
def blame_blocked_sums(wt_tt, ra_tt, ra_st):
    m, r = wt_tt.shape
    out = np.zeros(r)
    for i in range(m):
        for j in range(r):
            if ra_tt[i, j] > 0.0 and ra_st[i, j] > 0.0:
                out[j] += wt_tt[i, j] * ra_st[i, j] / ra_tt[i, j]
    return out


@njit(cache=True)
def blame_full_sums(wt_tt, ct_tt, ra_tt, wt_st, ct_st, ra_st, dtau):
    m, r = wt_tt.shape
    out = np.zeros(r)
    for i in range(m):
        for j in range(r):
            if ra_tt[i, j] > 0.0 and ra_st[i, j] > 0.0:
                num = (wt_tt[i, j] + ct_tt[i, j]) / ra_tt[i, j]
                den = (wt_st[i, j] + ct_st[i, j]) / ra_st[i, j]
                if den > 0.0:
                    out[j] += num / den * dtau[i]
                elif num > 0.0:
                    out[j] = np.inf
    return out


@njit(cache=True)
def slowdown_sums(wt, ct, ra, dtau, ideal):
    m, r = wt.shape
    out = np.zeros(r)
    for j in range(r):
        floor = ideal[j]
        if not (floor > 0.0):  # NaN or <= 0: undefined
            continue
        for i in range(m):
            if ra[i, j] > 0.0:
                ratp = (wt[i, j] + ct[i, j]) / ra[i, j]
                excess = (ratp - floor) / floor
                if excess > 0.0:
                    out[j] += excess * dtau[i]
    return out
