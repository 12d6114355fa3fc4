"""Ringnorm covariates with two-rate exponential survival and uniform censoring."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import SurvivalDataset

GENERATOR = "numpy.random.Generator(PCG64); normals: standard_normal (ziggurat); exponentials: exponential (ziggurat)"


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings. Class 1 (wide, centred) gets ``lambda1``; class 2 ``lambda2``."""

    n: int = 1000
    d: int = 20
    lambda1: float = 0.1
    lambda2: float = 0.5
    censor_low: float = 5.0
    censor_high: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("rates must be positive")
        if not self.censor_low < self.censor_high:
            raise ValueError("censor_low must be below censor_high")

    def rate(self, label: int) -> float:
        return self.lambda1 if label == 1 else self.lambda2

    def to_dict(self):
        return asdict(self)


def ringnorm_offset(d: int) -> float:
    return 2.0 / math.sqrt(d)


def ringnorm(n: int, d: int, rng: np.random.Generator):
    """Breiman's ringnorm: class 1 ~ N(0, 4I), class 2 ~ N(a*1, I), a = 2/sqrt(d),
    classes equally likely. Returns (X, labels in {1, 2})."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    labels = rng.integers(1, 3, size=n)
    Z = rng.standard_normal((n, d))
    X = np.where((labels == 1)[:, None], 2.0 * Z, Z + ringnorm_offset(d))
    return X, labels


def simulate_survival(labels, config: SimConfig, rng: np.random.Generator):
    """Exponential event times by class, independent Uniform censoring.

    Returns (observed times, event indicators)."""
    labels = np.asarray(labels)
    if not np.all((labels == 1) | (labels == 2)):
        raise ValueError("labels must be 1 or 2")
    rates = np.where(labels == 1, config.lambda1, config.lambda2)
    u = rng.exponential(1.0 / rates)
    v = rng.uniform(config.censor_low, config.censor_high, size=labels.size)
    events = (u <= v).astype(np.int64)
    return np.minimum(u, v), events


def censoring_probability(rate: float, low: float, high: float) -> float:
    """P(U > V) for U ~ Exp(rate), V ~ Uniform[low, high]."""
    return (math.exp(-rate * low) - math.exp(-rate * high)) / (rate * (high - low))


@dataclass(frozen=True, eq=False)
class SimulatedSurvival:
    """Simulated dataset plus the hidden class labels (never a covariate)."""

    dataset: SurvivalDataset
    labels: np.ndarray
    config: SimConfig
    generator: str = GENERATOR

    def true_survival(self, label: int, t):
        return np.exp(-self.config.rate(label) * np.asarray(t, dtype=float))

    def metadata(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "generator": self.generator,
            "class_rates": {"1": self.config.lambda1, "2": self.config.lambda2},
            "labels": self.labels.tolist(),
        }


def make_ringnorm_survival(config: SimConfig) -> SimulatedSurvival:
    rng = np.random.default_rng(config.seed % 2**64)
    X, labels = ringnorm(config.n, config.d, rng)
    times, events = simulate_survival(labels, config, rng)
    names = tuple(f"X{j + 1}" for j in range(config.d))
    labels.flags.writeable = False
    return SimulatedSurvival(SurvivalDataset(times, events, X, names), labels, config)
