"""Independent brute-force reference computations used by the tests.

Everything here is written directly from the textbook definitions with
plain Python loops and exact arithmetic where possible; none of it imports
the package under test.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations


def nelson_aalen_points(times, events):
    """Dict event_time -> cumulative hazard, summing d/r over distinct death times."""
    out = {}
    total = Fraction(0)
    for s in sorted({t for t, e in zip(times, events) if e == 1}):
        d = sum(1 for t, e in zip(times, events) if t == s and e == 1)
        r = sum(1 for t in times if t >= s)
        total += Fraction(d, r)
        out[s] = total
    return out


def harrell_c(times, events, predicted):
    """(concordance, permissible) as Fractions via pair enumeration."""
    conc = Fraction(0)
    perm = 0
    for i, j in combinations(range(len(times)), 2):
        ti, tj = times[i], times[j]
        di, dj = events[i], events[j]
        pi, pj = predicted[i], predicted[j]
        if ti != tj:
            # orient so that i has the shorter time
            if tj < ti:
                ti, tj, di, dj, pi, pj = tj, ti, dj, di, pj, pi
            if di == 0:
                continue
            perm += 1
            if pi > pj:
                conc += 1
            elif pi == pj:
                conc += Fraction(1, 2)
        else:
            if di == 0 and dj == 0:
                continue
            perm += 1
            if di == 1 and dj == 1:
                conc += 1 if pi == pj else Fraction(1, 2)
            else:
                death_p, other_p = (pi, pj) if di == 1 else (pj, pi)
                conc += 1 if death_p > other_p else Fraction(1, 2)
    return conc, perm


def logrank(times_left, events_left, times_right, events_right):
    """Two-sample log-rank |O-E|/sqrt(V) for the left group, looping over
    distinct death times of the pooled sample."""
    pooled = [(t, e, 0) for t, e in zip(times_left, events_left)] + [
        (t, e, 1) for t, e in zip(times_right, events_right)
    ]
    death_times = sorted({t for t, e, _ in pooled if e == 1})
    o_minus_e = 0.0
    var = 0.0
    for s in death_times:
        r = sum(1 for t, _, _ in pooled if t >= s)
        r1 = sum(1 for t, _, g in pooled if t >= s and g == 0)
        d = sum(1 for t, e, _ in pooled if t == s and e == 1)
        d1 = sum(1 for t, e, g in pooled if t == s and e == 1 and g == 0)
        o_minus_e += d1 - r1 * d / r
        if r > 1:
            var += (r1 / r) * (1 - r1 / r) * ((r - d) / (r - 1)) * d
    if var <= 0:
        return 0.0
    return abs(o_minus_e) / math.sqrt(var)


def step_eval(points: dict, t):
    """Evaluate a right-continuous step function given as {knot: value}."""
    val = 0
    for k in sorted(points):
        if k <= t:
            val = points[k]
    return val


def deviance(times, events, baseline_points: dict, theta):
    """Per-record relative-risk deviance sum; zero-baseline records skipped."""
    total = 0.0
    for t, e in zip(times, events):
        lam = float(step_eval(baseline_points, t))
        if lam == 0:
            continue
        mu = lam * theta
        total += 2 * ((e * math.log(e / mu) if e else 0.0) - (e - mu))
    return total


def theta_hat(times, events, baseline_points: dict):
    num = sum(events)
    den = sum(float(step_eval(baseline_points, t)) for t in times)
    return 0.0 if num == 0 else num / den
