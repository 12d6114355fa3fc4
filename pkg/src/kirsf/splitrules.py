"""Node splitting criteria: two-sample log-rank and relative-risk deviance.

These are the readable reference versions, scoring one fixed split. Tree
growing scores all thresholds at once with the compiled search in
:mod:`kirsf._search`; the two are cross-checked in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .survival import NodeSample, StepFunction, nelson_aalen

RULES = ("logrank", "deviance")

__all__ = [
    "NodeSample",
    "RULES",
    "SplitCandidate",
    "deviance_reduction",
    "estimate_baseline_chf",
    "estimate_theta",
    "logrank_statistic",
    "node_deviance",
]


@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    score: float
    rule: str = "logrank"


def logrank_statistic(left: NodeSample, right: NodeSample) -> float:
    """Absolute standardized log-rank statistic |O - E| / sqrt(V) for the
    left group, over the distinct event times of the pooled sample.

    Returns 0 when the variance vanishes.
    """
    if len(left) == 0 or len(right) == 0:
        raise ValueError("both groups must be nonempty")
    pooled = NodeSample.concat(left, right)
    if pooled.n_events <= 0:
        raise ValueError("pooled sample has no events")

    t_all, e_all, w_all = pooled.times, pooled.events, pooled.weights
    event_times = np.unique(t_all[(e_all == 1) & (w_all > 0)])
    at_risk = (t_all[None, :] >= event_times[:, None]) * w_all
    died = ((t_all[None, :] == event_times[:, None]) & (e_all == 1)) * w_all
    r = at_risk.sum(axis=1)
    d = died.sum(axis=1)
    n_left = len(left)
    r_left = at_risk[:, :n_left].sum(axis=1)
    d_left = died[:, :n_left].sum(axis=1)

    numerator = np.sum(d_left - r_left * d / r)
    frac = r_left / r
    with np.errstate(divide="ignore", invalid="ignore"):
        tie = np.where(r > 1, (r - d) / (r - 1), 0.0)
    variance = np.sum(frac * (1 - frac) * tie * d)
    if variance <= 0:
        return 0.0
    return abs(numerator) / math.sqrt(variance)


def estimate_baseline_chf(sample: NodeSample) -> StepFunction:
    """Nelson-Aalen estimate of the node's baseline cumulative hazard."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    return nelson_aalen(sample)


def estimate_theta(sample: NodeSample, baseline: StepFunction) -> float:
    """Maximum likelihood relative risk: events / summed baseline hazard."""
    numerator = float(np.sum(sample.weights * sample.events))
    denominator = float(np.sum(sample.weights * baseline(sample.times)))
    if denominator <= 0:
        if numerator == 0:
            return 0.0
        raise ValueError("events present but the baseline hazard sums to zero")
    return numerator / denominator


def node_deviance(sample: NodeSample, baseline: StepFunction, theta: float) -> float:
    """Relative-risk node deviance.

    Sum over records of 2 * (d log(d / (L0 * theta)) - (d - L0 * theta)),
    where 0 log 0 = 0 and records with zero baseline hazard are skipped.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    total = 0.0
    lam = baseline(sample.times)
    for d, l0, w in zip(sample.events, np.atleast_1d(lam), sample.weights):
        if l0 == 0 or w == 0:
            continue
        fitted = l0 * theta
        if d == 1:
            if fitted == 0:
                return math.inf
            term = math.log(1.0 / fitted) - (1.0 - fitted)
        else:
            term = fitted
        total += 2.0 * w * term
    return total


def deviance_reduction(parent: NodeSample, left: NodeSample, right: NodeSample) -> float:
    """D(parent) - D(left) - D(right), all against the parent's Nelson-Aalen
    baseline, each node with its own maximum likelihood theta."""
    if len(left) == 0 or len(right) == 0:
        raise ValueError("both children must be nonempty")
    if len(left) + len(right) != len(parent):
        raise ValueError("children must partition the parent")
    baseline = estimate_baseline_chf(parent)
    total = 0.0
    for node, sign in ((parent, 1.0), (left, -1.0), (right, -1.0)):
        total += sign * node_deviance(node, baseline, estimate_theta(node, baseline))
    return total
