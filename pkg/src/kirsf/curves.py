"""Survival curves derived from a fitted forest, as plot-ready data."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .survival import NodeSample, nelson_aalen


@dataclass(frozen=True, eq=False)
class CurveBundle:
    """Curves on a shared time grid that starts at t = 0.

    ``subject`` holds exp(-H_e(t | x_i)) per row, ``ensemble`` their mean,
    ``nelson_aalen`` the pooled-sample estimate, ``true`` optional exact
    curves keyed by series name.
    """

    t: np.ndarray
    subject: np.ndarray
    ensemble: np.ndarray
    nelson_aalen: np.ndarray
    true: dict = field(default_factory=dict)

    def rows(self):
        """Long-format (series, subject_id, t, value) rows."""
        for i, curve in enumerate(self.subject):
            for t, v in zip(self.t, curve):
                yield "subject", i, t, v
        for name, curve in (("ensemble", self.ensemble), ("nelson_aalen", self.nelson_aalen), *self.true.items()):
            for t, v in zip(self.t, curve):
                yield name, "", t, v

    def to_csv(self, comment_lines=()) -> str:
        buf = io.StringIO()
        for line in comment_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series", "subject_id", "t", "value"])
        for series, sid, t, v in self.rows():
            w.writerow([series, sid, repr(float(t)), repr(float(v))])
        return buf.getvalue()


def make_curve_bundle(forest, X, times, events, true_rates: dict | None = None) -> CurveBundle:
    """Curves for the rows of ``X`` (already in the forest's feature space).

    ``times``/``events`` give the sample behind the Nelson-Aalen curve;
    ``true_rates`` maps a class label to an exponential rate.
    """
    grid = forest.event_time_grid
    t = np.concatenate([[0.0], grid])
    H = forest.chf_matrix(X)
    subject = np.hstack([np.ones((H.shape[0], 1)), np.exp(-H)])
    na = nelson_aalen(NodeSample(times, events))
    na_curve = np.concatenate([[1.0], np.exp(-na(grid))])
    true = {}
    for label, rate in (true_rates or {}).items():
        true[f"true_class{label}"] = np.exp(-rate * t)
    return CurveBundle(t, subject, subject.mean(axis=0), na_curve, true)
