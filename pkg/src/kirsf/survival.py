"""Shared survival primitives: node samples, step functions and Nelson-Aalen."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NodeSample:
    """(time, event) pairs falling in one tree node.

    ``weights`` carries bootstrap multiplicity; a record drawn k times is
    equivalent to k unit-weight copies.
    """

    times: np.ndarray
    events: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        events = np.asarray(self.events, dtype=float)
        if times.ndim != 1 or times.shape != events.shape:
            raise ValueError("times and events must be 1-D arrays of equal length")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise ValueError("times must be finite and nonnegative")
        if not np.all((events == 0) | (events == 1)):
            raise ValueError("events must be 0 or 1")
        if self.weights is None:
            weights = np.ones_like(times)
        else:
            weights = np.asarray(self.weights, dtype=float)
            if weights.shape != times.shape or np.any(weights < 0):
                raise ValueError("weights must be nonnegative and match times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.times)

    @property
    def n_events(self) -> float:
        return float(np.sum(self.weights * self.events))

    @classmethod
    def concat(cls, *samples: "NodeSample") -> "NodeSample":
        return cls(
            np.concatenate([s.times for s in samples]),
            np.concatenate([s.events for s in samples]),
            np.concatenate([s.weights for s in samples]),
        )


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function, zero before the first knot."""

    knots: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if knots.shape != values.shape:
            raise ValueError("knots and values must have the same length")
        if knots.size > 1 and not np.all(np.diff(knots) > 0):
            raise ValueError("knots must be strictly increasing")
        knots.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)] if self.knots.size else 0.0, 0.0)
        return out if out.ndim else float(out)

    def __len__(self):
        return self.knots.size

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return np.array_equal(self.knots, other.knots) and np.array_equal(self.values, other.values)

    __hash__ = None

    @property
    def is_zero(self) -> bool:
        return self.knots.size == 0 or not np.any(self.values)

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls(np.empty(0), np.empty(0))


def _nelson_aalen_arrays(times, events, weights):
    event_mask = (events == 1) & (weights > 0)
    if not np.any(event_mask):
        return np.empty(0), np.empty(0)
    knots = np.unique(times[event_mask])
    # position of each record's time among the event times
    pos = np.searchsorted(knots, times, side="right")
    deaths = np.bincount(pos[event_mask] - 1, weights=weights[event_mask], minlength=knots.size)
    counts = np.bincount(pos, weights=weights, minlength=knots.size + 1)
    at_risk = np.cumsum(counts[::-1])[::-1][1:]
    return knots, np.cumsum(deaths / at_risk)


def nelson_aalen(sample: NodeSample) -> StepFunction:
    """Nelson-Aalen cumulative hazard: running sum of deaths / number at risk
    over the distinct event times. All-censored input gives the zero function."""
    knots, values = _nelson_aalen_arrays(sample.times, sample.events, sample.weights)
    return StepFunction(knots, values)
