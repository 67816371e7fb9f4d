"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigurationError, InvalidDimensionError, ShapeError


def check_samples(X, *, min_rows: int = 1, name: str = "sample") -> np.ndarray:
    """Return ``X`` as a finite, C-contiguous float64 array of shape (N, n)."""
    try:
        X = check_array(
            X,
            dtype=np.float64,
            order="C",
            ensure_min_samples=min_rows,
            input_name=name,
        )
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    return X


def check_positive_int(value, name: str, *, minimum: int = 1) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidDimensionError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_orthonormal(basis, name: str = "basis", atol: float = 1e-8) -> np.ndarray:
    basis = np.asarray(basis, dtype=np.float64)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.ndim != 2:
        raise ShapeError(f"{name} must be a 2-d array, got shape {basis.shape}")
    k = basis.shape[1]
    if k and not np.allclose(basis.T @ basis, np.eye(k), atol=atol):
        raise ShapeError(f"{name} columns are not orthonormal")
    return basis


def check_column_count(X: np.ndarray, n_features: int, name: str = "sample") -> None:
    if X.shape[1] != n_features:
        raise ShapeError(
            f"{name} has {X.shape[1]} columns, expected {n_features}"
        )


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
