"""Pure-numpy implementations of the hot per-task/per-pair kernels.

Array layout conventions (float64 throughout):

- ``slice_bounds``: shape (m+1,) strictly increasing; slice i spans
  [slice_bounds[i], slice_bounds[i+1]].
- per-slice metric matrices ``wt``/``ct``/``ra``: shape (m, R) with R the
  canonical request count.
- ``ideal``: shape (R,) seconds-per-unit floor; NaN marks "undefined".

All kernels treat a zero resource-acquired entry as "no demand": the slice
contributes exactly 0.0 to the affected sum.
"""

from __future__ import annotations

import numpy as np


def apportion(win_bounds, deltas, slice_bounds):
    """Split sample-window deltas across slices proportionally to overlap.

    ``win_bounds`` has shape (k+1,), ``deltas`` (k, R); returns (m, R).
    Window totals are conserved whenever slices cover the windows.
    """
    lo = np.maximum(slice_bounds[:-1, None], win_bounds[None, :-1])
    hi = np.minimum(slice_bounds[1:, None], win_bounds[None, 1:])
    overlap = np.clip(hi - lo, 0.0, None)
    widths = win_bounds[1:] - win_bounds[:-1]
    frac = overlap / widths[None, :]
    return frac @ deltas


def ratp_integrals(wt, ct, ra, dtau):
    """Per-request sum over slices of ((wt+ct)/ra) * dtau where ra > 0."""
    demanded = ra > 0.0
    out = np.zeros(wt.shape[1])
    if demanded.any():
        ratio = np.where(demanded, (wt + ct) / np.where(demanded, ra, 1.0), 0.0)
        out = (ratio * dtau[:, None]).sum(axis=0)
    return out


def ratp_blocked_integrals(wt, ra, dtau):
    """Per-request sum over slices of (wt/ra) * dtau where ra > 0."""
    demanded = ra > 0.0
    ratio = np.where(demanded, wt / np.where(demanded, ra, 1.0), 0.0)
    return (ratio * dtau[:, None]).sum(axis=0)


def blame_blocked_sums(wt_tt, ra_tt, ra_st):
    """Per-request sum of wt_tt * ra_st / ra_tt over mutually-demanding slices.

    This is the slice sum of (blocked target penalty / max source penalty)
    * dtau with the interval length cancelled algebraically.
    """
    live = (ra_tt > 0.0) & (ra_st > 0.0)
    terms = np.where(live, wt_tt * ra_st / np.where(live, ra_tt, 1.0), 0.0)
    return terms.sum(axis=0)


def blame_full_sums(wt_tt, ct_tt, ra_tt, wt_st, ct_st, ra_st, dtau):
    """Per-request sum of (penalty_tt / penalty_st) * dtau over slices.

    Both sides must demand (ra > 0) for a slice to contribute. A source
    that acquired with zero spent time yields +inf against a target with
    positive penalty, and 0 when the target penalty is 0 as well.
    """
    m, r = wt_tt.shape
    out = np.zeros(r)
    live = (ra_tt > 0.0) & (ra_st > 0.0)
    t_tt = wt_tt + ct_tt
    t_st = wt_st + ct_st
    for j in range(r):
        col = live[:, j]
        if not col.any():
            continue
        num = t_tt[col, j] / ra_tt[col, j]
        den = t_st[col, j] / ra_st[col, j]
        terms = np.empty(num.shape)
        zero_den = den == 0.0
        ok = ~zero_den
        terms[ok] = num[ok] / den[ok] * dtau[col][ok]
        terms[zero_den] = np.where(num[zero_den] > 0.0, np.inf, 0.0)
        out[j] = terms.sum()
    return out


def slowdown_sums(wt, ct, ra, dtau, ideal):
    """Per-request sum of max(0, (ratp - ideal)/ideal) * dtau.

    Slices with no demand and requests with undefined (NaN or <= 0) ideal
    contribute 0.
    """
    defined = np.nan_to_num(ideal, nan=0.0) > 0.0
    demanded = ra > 0.0
    live = demanded & defined[None, :]
    ratp = np.where(live, (wt + ct) / np.where(live, ra, 1.0), 0.0)
    excess = np.where(live, (ratp - ideal[None, :]) / np.where(defined, ideal, 1.0)[None, :], 0.0)
    return (np.clip(excess, 0.0, None) * dtau[:, None]).sum(axis=0)
