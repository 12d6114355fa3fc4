"""A fitted forest bundled with its (optional) kernel feature map."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import forest as forest_mod
from ._io import atomic_write
from .kernels import KernelFeatureMap

MODEL_FORMAT = "kirsf-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class FittedModel:
    forest: forest_mod.SurvivalForest
    input_feature_names: tuple
    kernel_map: KernelFeatureMap | None = None
    time_column: str = "time"
    event_column: str = "event"

    def features(self, X_raw) -> np.ndarray:
        """Map raw covariates to the forest's feature space."""
        X_raw = np.asarray(X_raw, dtype=float)
        if X_raw.ndim == 1:
            X_raw = X_raw.reshape(1, -1)
        if X_raw.shape[1] != len(self.input_feature_names):
            raise ValueError(
                f"dimension mismatch: model expects p={len(self.input_feature_names)}, found p={X_raw.shape[1]}"
            )
        return self.kernel_map.transform(X_raw) if self.kernel_map is not None else X_raw

    def mortality(self, X_raw) -> np.ndarray:
        return self.forest.mortality(self.features(X_raw))

    def chf_matrix(self, X_raw) -> np.ndarray:
        return self.forest.chf_matrix(self.features(X_raw))


def to_bytes(model: FittedModel) -> bytes:
    return forest_mod.dump_payload({
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_feature_names": list(model.input_feature_names),
        "time_column": model.time_column,
        "event_column": model.event_column,
        "kernel_map": model.kernel_map.to_dict() if model.kernel_map is not None else None,
        "forest": forest_mod.forest_to_dict(model.forest),
    })


def from_bytes(payload: bytes) -> FittedModel:
    doc = forest_mod.load_payload(payload)
    forest_mod.check_header(doc, MODEL_FORMAT, MODEL_VERSION)
    try:
        km = KernelFeatureMap.from_dict(doc["kernel_map"]) if doc["kernel_map"] else None
        return FittedModel(
            forest_mod.forest_from_dict(doc["forest"]),
            tuple(doc["input_feature_names"]),
            km,
            doc["time_column"],
            doc["event_column"],
        )
    except (KeyError, TypeError) as exc:
        raise forest_mod.ModelFormatError(f"corrupt model payload: {exc}") from exc


def save_model(model: FittedModel, path):
    atomic_write(path, to_bytes(model))


def load_model(path) -> FittedModel:
    return from_bytes(Path(path).read_bytes())
