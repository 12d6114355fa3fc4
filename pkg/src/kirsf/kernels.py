"""Kernel functions and kernel-induced covariates.

Each training vector x_j defines a new covariate K_j(z) = K(x_j, z). A
dataset is kernelized by replacing its covariate matrix with the m x n
matrix of these values.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

FAMILIES = ("linear", "polynomial", "gaussian")

# rows per block when broadcasting pairwise differences
_BLOCK = 256


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with its hyperparameters.

    ``c`` and ``degree`` are the polynomial offset and power; ``sigma2`` the
    Gaussian bandwidth. ``sigma2=None`` means "use the feature dimension",
    resolved by :meth:`resolved`.
    """

    family: str = "gaussian"
    c: float = 1.0
    degree: int = 2
    sigma2: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial kernel needs an integer degree >= 1")
            if not np.isfinite(self.c):
                raise ValueError("polynomial offset c must be finite")
        if self.family == "gaussian" and self.sigma2 is not None:
            if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
                raise ValueError("gaussian kernel needs sigma2 > 0")

    def resolved(self, dim: int) -> "KernelSpec":
        if self.family == "gaussian" and self.sigma2 is None:
            return replace(self, sigma2=float(dim))
        return self

    def to_dict(self):
        return {"family": self.family, "c": self.c, "degree": self.degree, "sigma2": self.sigma2}


def _pairwise(spec: KernelSpec, X: np.ndarray, A: np.ndarray) -> np.ndarray:
    # elementwise broadcasting keeps K(x, z) and K(z, x) bitwise equal
    if spec.family == "gaussian" and spec.sigma2 is None:
        raise ValueError("gaussian sigma2 unresolved; call spec.resolved(dim) first")
    out = np.empty((X.shape[0], A.shape[0]))
    for lo in range(0, X.shape[0], _BLOCK):
        xb = X[lo:lo + _BLOCK, None, :]
        if spec.family == "gaussian":
            sq = np.sum((xb - A[None, :, :]) ** 2, axis=2)
            out[lo:lo + _BLOCK] = np.exp(-sq / (2.0 * spec.sigma2))
        else:
            dot = np.sum(xb * A[None, :, :], axis=2)
            if spec.family == "polynomial":
                dot = (dot + spec.c) ** int(spec.degree)
            out[lo:lo + _BLOCK] = dot
    return out


def _as_matrix(rows, name) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a list of vectors")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {z.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ValueError("kernel inputs must be finite")
    return float(_pairwise(spec, x[None, :], z[None, :])[0, 0])


@dataclass(frozen=True, eq=False)
class KernelBasis:
    anchor_points: np.ndarray
    spec: KernelSpec

    @property
    def n_anchors(self) -> int:
        return self.anchor_points.shape[0]

    @property
    def dim(self) -> int:
        return self.anchor_points.shape[1]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f"K_{j + 1}" for j in range(self.n_anchors))

    @property
    def input_dim(self) -> int:
        return self.dim

    def transform(self, covariates) -> np.ndarray:
        X = _as_matrix(covariates, "covariates")
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: basis expects p={self.dim}, got p={X.shape[1]}")
        return _pairwise(self.spec, X, self.anchor_points)

    def to_dict(self):
        return {"spec": self.spec.to_dict(), "anchor_points": self.anchor_points.tolist()}

    @classmethod
    def from_dict(cls, d):
        anchors = np.array(d["anchor_points"], dtype=float).reshape(len(d["anchor_points"]), -1)
        return cls(anchors, KernelSpec(**d["spec"]))


def build_basis(train_covariates, spec: KernelSpec) -> KernelBasis:
    """Use the training vectors, in order, as kernel anchors."""
    if len(train_covariates) == 0:
        raise ValueError("cannot build a kernel basis from no training vectors")
    anchors = _as_matrix(train_covariates, "train_covariates").copy()
    anchors.flags.writeable = False
    return KernelBasis(anchors, spec.resolved(anchors.shape[1]))


def transform(basis: KernelBasis, covariates) -> np.ndarray:
    return basis.transform(covariates)


def kernelize_dataset(data, basis):
    """Replace the covariates of ``data`` with kernel-induced features.

    ``basis`` is a :class:`KernelBasis` or a :class:`KernelFeatureMap`.
    """
    return data.with_covariates(basis.transform(data.X), basis.feature_names)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature centring and scaling learned on training data.

    Zero-variance columns are dropped.
    """

    mean: np.ndarray
    scale: np.ndarray
    keep: np.ndarray

    @classmethod
    def fit(cls, X, feature_names=None) -> "Standardizer":
        X = _as_matrix(X, "X")
        scale = X.std(axis=0)
        keep = scale > 0
        if not np.all(keep):
            dropped = np.flatnonzero(~keep)
            labels = [feature_names[j] for j in dropped] if feature_names is not None else dropped.tolist()
            warnings.warn(f"dropping zero-variance features before kernelizing: {labels}", stacklevel=2)
        if not np.any(keep):
            raise ValueError("every feature has zero variance in the training data")
        return cls(X.mean(axis=0)[keep], scale[keep], keep)

    @property
    def input_dim(self) -> int:
        return self.keep.size

    @property
    def output_dim(self) -> int:
        return int(self.keep.sum())

    def transform(self, X) -> np.ndarray:
        X = _as_matrix(X, "X")
        if X.shape[1] != self.keep.size:
            raise ValueError(f"dimension mismatch: expected p={self.keep.size}, got p={X.shape[1]}")
        return (X[:, self.keep] - self.mean) / self.scale

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(), "keep": self.keep.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float), np.array(d["keep"], dtype=bool))


@dataclass(frozen=True, eq=False)
class KernelFeatureMap:
    """Optional standardization followed by a kernel basis; fitted on training data."""

    basis: KernelBasis
    standardizer: Standardizer | None = None

    @classmethod
    def fit(cls, train_X, spec: KernelSpec, standardize: bool = True, feature_names=None) -> "KernelFeatureMap":
        train_X = _as_matrix(train_X, "train_X")
        standardizer = Standardizer.fit(train_X, feature_names) if standardize else None
        anchors = standardizer.transform(train_X) if standardizer else train_X
        return cls(build_basis(anchors, spec), standardizer)

    @property
    def spec(self) -> KernelSpec:
        return self.basis.spec

    @property
    def input_dim(self) -> int:
        return self.standardizer.input_dim if self.standardizer else self.basis.dim

    @property
    def feature_names(self):
        return self.basis.feature_names

    def transform(self, X) -> np.ndarray:
        X = _as_matrix(X, "X")
        if X.shape[1] != self.input_dim:
            raise ValueError(f"dimension mismatch: kernel map expects p={self.input_dim}, got p={X.shape[1]}")
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return self.basis.transform(X)

    def to_dict(self):
        return {
            "basis": self.basis.to_dict(),
            "standardizer": self.standardizer.to_dict() if self.standardizer else None,
        }

    @classmethod
    def from_dict(cls, d):
        std = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
        return cls(KernelBasis.from_dict(d["basis"]), std)
