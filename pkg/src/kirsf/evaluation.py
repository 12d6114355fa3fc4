"""Harrell's concordance index and the pooled two-sample t-test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

RANDOM_GUESS_NOTE = "prediction no better than random guessing"


class UndefinedConcordance(ValueError):
    """No permissible pairs, so the C-index is undefined."""


@dataclass(frozen=True)
class ConcordanceResult:
    concordance: float
    permissible: int
    c_index: float
    prediction_error: float
    # concordance counted in half-units; exact
    concordance_halves: int = 0

    @property
    def exact_c_index(self) -> Fraction:
        return Fraction(self.concordance_halves, 2 * self.permissible)


def c_index(times, events, predicted) -> ConcordanceResult:
    """Harrell's C over all unordered pairs; larger ``predicted`` = worse outcome.

    Pair rules, for times Ti, Tj:

    * Ti != Tj: usable only if the shorter time is a death; scores 1 when the
      shorter time has the larger prediction, 0.5 on tied predictions, else 0.
    * Ti == Tj, both deaths: 1 for tied predictions, otherwise 0.5.
    * Ti == Tj, one death: 1 if the death has the larger prediction, otherwise 0.5.
    * Ti == Tj, both censored: not usable.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(events).astype(bool)
    p = np.asarray(predicted, dtype=float)
    if not (t.ndim == 1 and t.shape == e.shape == p.shape):
        raise ValueError("times, events and predicted must be 1-D with equal lengths")
    if t.size < 2:
        raise ValueError("need at least two cases")

    ti, tj = t[:, None], t[None, :]
    ei, ej = e[:, None], e[None, :]
    pi, pj = p[:, None], p[None, :]
    upper = np.triu(np.ones((t.size, t.size), dtype=bool), k=1)

    # i strictly earlier than j (and symmetric case handled by transposing)
    earlier = (ti < tj) & ei
    later = (tj < ti) & ej
    same = (ti == tj) & (ei | ej)

    halves = np.zeros((t.size, t.size), dtype=np.int64)
    halves += np.where(earlier, np.where(pi > pj, 2, np.where(pi == pj, 1, 0)), 0)
    halves += np.where(later, np.where(pj > pi, 2, np.where(pi == pj, 1, 0)), 0)
    both = same & ei & ej
    halves += np.where(both, np.where(pi == pj, 2, 1), 0)
    one = same & (ei ^ ej)
    death_worse = np.where(ei, pi > pj, pj > pi)
    halves += np.where(one, np.where(death_worse, 2, 1), 0)

    usable = (earlier | later | same) & upper
    permissible = int(usable.sum())
    if permissible == 0:
        raise UndefinedConcordance("undefined C-index: no permissible pairs")
    total = int(halves[usable].sum())
    c = total / (2 * permissible)
    return ConcordanceResult(total / 2, permissible, c, 1.0 - c, total)


def prediction_error(result: ConcordanceResult) -> float:
    """1 - C; 0.5 means prediction no better than random guessing."""
    return 1.0 - result.c_index


def describe_error(error: float) -> str:
    if error == 0.5:
        return f"{error:.4f} ({RANDOM_GUESS_NOTE})"
    return f"{error:.4f}"


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_value: float
    infinite: bool = False


def pooled_t_test(a, b) -> TTestResult:
    """Two-sided equal-variance two-sample t-test.

    The p-value comes from the Student t survival function
    (scipy.stats.t.sf, regularized incomplete beta).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    df = a.size + b.size - 2
    ss = np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)
    pooled_var = ss / df
    diff = a.mean() - b.mean()
    if pooled_var == 0:
        if diff == 0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.copysign(math.inf, diff), df, 0.0, infinite=True)
    t = diff / math.sqrt(pooled_var * (1.0 / a.size + 1.0 / b.size))
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return TTestResult(float(t), df, p)
