"""Compiled exhaustive threshold search for one tree node.

For every candidate feature the node members are swept in increasing
feature order, moving one member at a time into the left child; each
boundary between distinct values is scored. Ties keep the earliest
(feature, threshold), which the caller arranges to be the lowest feature
index and smallest threshold.
"""
import math

import numpy as np
from numba import njit

LOGRANK = 0
DEVIANCE = 1


@njit(cache=True, nogil=True)
def _midpoint(a, b):
    m = 0.5 * (a + b)
    if m >= b or m < a:
        m = a
    return m


@njit(cache=True, nogil=True)
def best_split(cols, rank, ev, w, d, r, lam0, rule):
    """Best threshold over the rows of ``cols`` (features x members).

    rank[j]  number of node event times <= time of member j
    ev, w    member event indicator and bootstrap multiplicity
    d, r     deaths and number at risk at each node event time
    lam0     parent Nelson-Aalen hazard at each member's time (deviance only)

    Returns (feature row, threshold, score); feature row is -1 when no
    admissible split exists.
    """
    n_feat, m = cols.shape
    K = d.shape[0]
    ev_total = 0.0
    lam_total = 0.0
    for j in range(m):
        ev_total += w[j] * ev[j]
        lam_total += w[j] * lam0[j]

    parent_term = 0.0
    if rule == DEVIANCE and ev_total > 0:
        parent_term = ev_total * math.log(ev_total / lam_total)

    tie = np.zeros(K)
    for k in range(K):
        if r[k] > 1:
            tie[k] = d[k] * (r[k] - d[k]) / (r[k] - 1)

    best_f = -1
    best_thr = 0.0
    best_score = 0.0
    r_left = np.empty(K)
    d_left = np.empty(K)
    for f in range(n_feat):
        x = cols[f]
        order = np.argsort(x, kind="mergesort")
        r_left[:] = 0.0
        d_left[:] = 0.0
        ev_left = 0.0
        lam_left = 0.0
        for s in range(m - 1):
            j = order[s]
            wj = w[j]
            for k in range(rank[j]):
                r_left[k] += wj
            if ev[j] == 1:
                d_left[rank[j] - 1] += wj
                ev_left += wj
            lam_left += wj * lam0[j]
            lo = x[j]
            hi = x[order[s + 1]]
            if hi == lo:
                continue
            if rule == LOGRANK:
                if ev_left == 0 or ev_left == ev_total:
                    continue
                num = 0.0
                var = 0.0
                for k in range(K):
                    num += d_left[k] - r_left[k] * d[k] / r[k]
                    frac = r_left[k] / r[k]
                    var += frac * (1.0 - frac) * tie[k]
                score = abs(num) / math.sqrt(var) if var > 0 else 0.0
            else:
                ev_right = ev_total - ev_left
                lam_right = lam_total - lam_left
                score = -parent_term
                if ev_left > 0:
                    score += ev_left * math.log(ev_left / lam_left)
                if ev_right > 0:
                    score += ev_right * math.log(ev_right / lam_right)
                score *= 2.0
            if score > best_score:
                best_score = score
                best_f = f
                best_thr = _midpoint(lo, hi)
    return best_f, best_thr, best_score
