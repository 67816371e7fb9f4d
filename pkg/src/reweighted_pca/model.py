"""Synthetic NGCA distributions, whitening, and sample pairing.

A draw from the isotropic NGCA model is ``X = Q (x_tilde, g)`` where
``x_tilde`` is a zero-mean, identity-covariance non-gaussian vector in
``R^d``, ``g`` is a standard gaussian in ``R^(n-d)`` and ``Q`` is a fixed
orthogonal matrix. The planted subspace is spanned by the first ``d``
columns of ``Q``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _parallel
from ._validation import check_column_count, check_positive_int, check_samples
from .exceptions import (
    ConfigurationError,
    InvalidDimensionError,
    PairingError,
    SingularCovarianceError,
)

__all__ = [
    "Family",
    "GeneratorConfig",
    "GroundTruth",
    "PairedSample",
    "WhiteningTransform",
    "Whitener",
    "haar_orthogonal",
    "sample_ngca",
    "fit_whitening",
    "apply_whitening",
    "pair_samples",
]

GEN_BLOCK_ROWS = 4096
_ROTATION_STREAM = 0
_SAMPLE_STREAM = 1


class Family(str, enum.Enum):
    UNIFORM_CUBE = "uniform-cube"
    UNIFORM_SPHERE = "uniform-sphere"
    RADEMACHER = "rademacher"
    AXIS_SPIKE = "axis-spike"
    TWO_POINT_MIXTURE = "two-point-mixture"
    PURE_GAUSSIAN = "pure-gaussian"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("_", "-"))
        except ValueError:
            known = ", ".join(f.value for f in cls)
            raise ConfigurationError(
                f"unsupported family {value!r}; expected one of: {known}"
            ) from None


@dataclass(frozen=True)
class GeneratorConfig:
    """Recipe for a synthetic isotropic NGCA distribution.

    Parameters
    ----------
    ambient_dim : int
        Dimension ``n`` of the observations.
    nongauss_dim : int
        Dimension ``d`` of the planted non-gaussian subspace. Must satisfy
        ``1 <= d <= n``; ``0`` is accepted only for ``pure-gaussian``, whose
        planted subspace is always treated as empty.
    family : Family or str
        Distribution of the non-gaussian component.
    rotation_seed : int or None
        Seed for the hidden Haar rotation. ``None`` plants the subspace on
        the first ``d`` coordinate axes (no rotation).
    sample_seed : int
        Seed for the draws.
    mixture_mean : float
        Norm of the component means ``+-mu`` for ``two-point-mixture``.
        ``mu`` points along ``(1, ..., 1) / sqrt(d)`` and each component has
        covariance ``I - mu mu^T``, so the mixture is exactly isotropic. The
        mixture is gaussian in directions orthogonal to ``mu``.
    """

    ambient_dim: int
    nongauss_dim: int
    family: Family = Family.UNIFORM_CUBE
    rotation_seed: int | None = 0
    sample_seed: int = 0
    mixture_mean: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        n = check_positive_int(self.ambient_dim, "ambient_dim")
        d = check_positive_int(self.nongauss_dim, "nongauss_dim", minimum=0)
        if d > n:
            raise InvalidDimensionError(
                f"nongauss_dim={d} exceeds ambient_dim={n}"
            )
        if d == 0 and self.family is not Family.PURE_GAUSSIAN:
            raise InvalidDimensionError(
                "nongauss_dim=0 is only allowed for the pure-gaussian family"
            )
        if not 0.0 < self.mixture_mean < 1.0:
            raise ConfigurationError("mixture_mean must lie in (0, 1)")

    @property
    def effective_dim(self) -> int:
        """Dimension of the planted subspace used for scoring."""
        return 0 if self.family is Family.PURE_GAUSSIAN else self.nongauss_dim


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Orthonormal ``(n, d)`` basis of the planted non-gaussian subspace."""

    basis_E: np.ndarray
    rotation: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis_E.shape[1]


@dataclass(frozen=True, eq=False)
class PairedSample:
    """Two aligned samples ``(X_i, X'_i)`` of equal shape."""

    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        if self.first.shape != self.second.shape or self.first.ndim != 2:
            raise PairingError(
                f"paired halves must be 2-d arrays of equal shape, got "
                f"{self.first.shape} and {self.second.shape}"
            )

    @classmethod
    def from_arrays(cls, first, second) -> "PairedSample":
        first = check_samples(first, name="first")
        second = check_samples(second, name="second")
        return cls(first, second)

    @property
    def n_pairs(self) -> int:
        return self.first.shape[0]

    @property
    def n_features(self) -> int:
        return self.first.shape[1]

    def stacked(self) -> np.ndarray:
        """All ``2N`` points, first halves then second halves."""
        return np.vstack([self.first, self.second])


@dataclass(frozen=True, eq=False)
class WhiteningTransform:
    """Affine map ``x -> inv_sqrt_cov @ (x - mean)``."""

    mean: np.ndarray
    inv_sqrt_cov: np.ndarray
    eigen_floor: float = 1e-10
    floored: bool = field(default=False)

    @classmethod
    def identity(cls, n: int) -> "WhiteningTransform":
        return cls(np.zeros(n), np.eye(n), 0.0, False)

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]


def haar_orthogonal(n: int, seed=None) -> np.ndarray:
    """Draw an ``n x n`` orthogonal matrix from the Haar measure on O(n).

    Uses the QR factorisation of a standard gaussian matrix, with the signs
    of ``Q``'s columns fixed so that ``R`` has a positive diagonal; without
    that correction the output is not Haar distributed.
    """
    n = check_positive_int(n, "n")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _rotation(config: GeneratorConfig) -> np.ndarray:
    if config.rotation_seed is None:
        return np.eye(config.ambient_dim)
    seq = np.random.SeedSequence(config.rotation_seed, spawn_key=(_ROTATION_STREAM,))
    return haar_orthogonal(config.ambient_dim, np.random.Generator(np.random.Philox(seq)))


def _block_rng(sample_seed: int, block: int) -> np.random.Generator:
    seq = np.random.SeedSequence(sample_seed, spawn_key=(_SAMPLE_STREAM, block))
    return np.random.Generator(np.random.Philox(seq))


def _component(config: GeneratorConfig, rng: np.random.Generator, rows: int) -> np.ndarray:
    d = config.nongauss_dim
    family = config.family
    if family is Family.UNIFORM_CUBE:
        half_width = np.sqrt(3.0)
        return rng.uniform(-half_width, half_width, size=(rows, d))
    if family is Family.UNIFORM_SPHERE:
        g = rng.standard_normal((rows, d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return np.sqrt(d) * g / norms
    if family is Family.RADEMACHER:
        return rng.choice(np.array([-1.0, 1.0]), size=(rows, d))
    if family is Family.AXIS_SPIKE:
        radius = np.linalg.norm(rng.standard_normal((rows, d)), axis=1)
        axis = rng.integers(0, d, size=rows)
        sign = rng.choice(np.array([-1.0, 1.0]), size=rows)
        out = np.zeros((rows, d))
        out[np.arange(rows), axis] = sign * radius
        return out
    if family is Family.TWO_POINT_MIXTURE:
        m = config.mixture_mean
        u = np.full(d, 1.0 / np.sqrt(d))
        sign = rng.choice(np.array([-1.0, 1.0]), size=rows)
        z = rng.standard_normal((rows, d))
        # shrink the component along u so total covariance is exactly I
        z -= (1.0 - np.sqrt(1.0 - m * m)) * np.outer(z @ u, u)
        return np.outer(sign, m * u) + z
    raise ConfigurationError(f"unsupported family {family!r}")  # pragma: no cover


def _draw_block(config: GeneratorConfig, block: int) -> np.ndarray:
    rng = _block_rng(config.sample_seed, block)
    n, d = config.ambient_dim, config.nongauss_dim
    if config.family is Family.PURE_GAUSSIAN:
        return rng.standard_normal((GEN_BLOCK_ROWS, n))
    x_tilde = _component(config, rng, GEN_BLOCK_ROWS)
    g = rng.standard_normal((GEN_BLOCK_ROWS, n - d))
    return np.hstack([x_tilde, g])


def sample_ngca(config: GeneratorConfig, count: int, n_jobs: int | None = None):
    """Draw ``count`` i.i.d. rows from the configured NGCA distribution.

    Row ``i`` depends only on ``(config, i)``: rows are produced in fixed
    blocks, each from its own counter-based stream, so the output does not
    depend on ``n_jobs`` and a shorter draw is a prefix of a longer one.

    Returns
    -------
    X : ndarray of shape (count, n)
    truth : GroundTruth
    """
    count = check_positive_int(count, "count")
    Q = _rotation(config)
    n_blocks = -(-count // GEN_BLOCK_ROWS)
    blocks = _parallel.map_blocks(lambda b: _draw_block(config, b), n_blocks, n_jobs)
    raw = np.vstack(blocks)[:count]
    X = raw @ Q.T
    truth = GroundTruth(basis_E=Q[:, : config.effective_dim].copy(), rotation=Q)
    return X, truth


def fit_whitening(sample, eigen_floor: float = 1e-10) -> WhiteningTransform:
    """Fit the symmetric (ZCA) whitening map of a sample.

    The covariance uses the ``1/N`` normalisation, so the fitted sample is
    mapped to empirical covariance exactly ``I``. Eigenvalues below
    ``eigen_floor`` are raised to it. With ``eigen_floor=0`` a covariance
    eigenvalue that is zero to working precision raises
    :class:`SingularCovarianceError`.
    """
    X = check_samples(sample, min_rows=2)
    if eigen_floor < 0:
        raise ConfigurationError("eigen_floor must be nonnegative")
    mean = X.mean(axis=0)
    centred = X - mean
    cov = centred.T @ centred / X.shape[0]
    cov = (cov + cov.T) / 2.0
    vals, vecs = np.linalg.eigh(cov)
    floored = False
    if eigen_floor == 0:
        # numerically zero eigenvalues count as singular
        tol = max(vals.max(initial=0.0), 0.0) * X.shape[1] * np.finfo(float).eps
        if vals.min() <= tol:
            raise SingularCovarianceError(vals.min())
    elif np.any(vals < eigen_floor):
        floored = True
        vals = np.maximum(vals, eigen_floor)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    inv_sqrt = (inv_sqrt + inv_sqrt.T) / 2.0
    return WhiteningTransform(mean, inv_sqrt, float(eigen_floor), floored)


def apply_whitening(transform: WhiteningTransform, sample) -> np.ndarray:
    X = check_samples(sample)
    check_column_count(X, transform.n_features)
    return (X - transform.mean) @ transform.inv_sqrt_cov


def pair_samples(sample) -> PairedSample:
    """Split ``2N`` rows into ``N`` pairs: row ``i`` pairs with row ``N + i``."""
    X = check_samples(sample, min_rows=1)
    rows = X.shape[0]
    if rows % 2:
        raise PairingError(f"cannot pair an odd number of rows ({rows})")
    half = rows // 2
    return PairedSample(X[:half].copy(), X[half:].copy())


class Whitener(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`fit_whitening`.

    Parameters
    ----------
    eigen_floor : float, default=1e-10
        Lower clamp for covariance eigenvalues.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    inv_sqrt_cov_ : ndarray of shape (n_features, n_features)
    transform_ : WhiteningTransform
    """

    def __init__(self, eigen_floor: float = 1e-10):
        self.eigen_floor = eigen_floor

    def fit(self, X, y=None):
        t = fit_whitening(X, self.eigen_floor)
        self.transform_ = t
        self.mean_ = t.mean
        self.inv_sqrt_cov_ = t.inv_sqrt_cov
        self.n_features_in_ = t.n_features
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_whitening(self.transform_, X)

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        X = check_samples(X)
        check_column_count(X, self.n_features_in_)
        return X @ np.linalg.inv(self.inv_sqrt_cov_) + self.mean_
