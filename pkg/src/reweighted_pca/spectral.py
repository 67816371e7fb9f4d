"""Eigenvalue thresholding and subspace geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_orthonormal
from .exceptions import ConfigurationError, ShapeError
from .testmat import Kind, TestMatrixReport

__all__ = [
    "SubspaceEstimate",
    "threshold_subspace",
    "subspace_distance",
    "principal_angles",
    "containment_angles",
    "orthogonal_complement",
    "davis_kahan_bound",
    "eigengap",
]


@dataclass(frozen=True, eq=False)
class SubspaceEstimate:
    """Eigenvectors whose eigenvalues sit more than ``beta`` from the gaussian value."""

    basis: np.ndarray
    eigenvalues: np.ndarray
    source: Kind
    alpha: float
    beta: float
    gaussian_eigenvalue: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.dim == 0


def threshold_subspace(report: TestMatrixReport, beta: float) -> SubspaceEstimate:
    """Keep eigenvectors with ``|lambda - gaussian_eigenvalue| > beta`` (strict)."""
    beta = float(beta)
    if not beta > 0:
        raise ConfigurationError(f"beta must be positive, got {beta}")
    keep = np.abs(report.eigenvalues - report.gaussian_eigenvalue) > beta
    return SubspaceEstimate(
        basis=report.eigenvectors[:, keep].copy(),
        eigenvalues=report.eigenvalues[keep].copy(),
        source=report.kind,
        alpha=report.alpha,
        beta=beta,
        gaussian_eigenvalue=report.gaussian_eigenvalue,
    )


def _pair(F, F2, *, equal_dims=True):
    F = check_orthonormal(F, "F")
    F2 = check_orthonormal(F2, "F2")
    if F.shape[0] != F2.shape[0]:
        raise ShapeError(
            f"subspaces live in different ambient dimensions ({F.shape[0]} vs {F2.shape[0]})"
        )
    if equal_dims and F.shape[1] != F2.shape[1]:
        raise ShapeError(
            f"subspace dimensions differ ({F.shape[1]} vs {F2.shape[1]}); "
            "distance is defined for equal dimensions only"
        )
    return F, F2


def subspace_distance(F, F2) -> float:
    """Frobenius norm of the difference of the orthogonal projectors."""
    F, F2 = _pair(F, F2)
    return float(np.linalg.norm(F @ F.T - F2 @ F2.T, "fro"))


def _angles(F, F2):
    # cosines from F^T F2 and sines from the part of F2 outside span(F);
    # arctan2 keeps small angles accurate where arccos alone would not
    k = min(F.shape[1], F2.shape[1])
    if k == 0:
        return np.zeros(0)
    cos = np.linalg.svd(F.T @ F2, compute_uv=False)[:k]
    residual = F2 - F @ (F.T @ F2)
    sin = np.sort(np.linalg.svd(residual, compute_uv=False))[: F2.shape[1]]
    sin = sin[:k]
    return np.arctan2(np.clip(sin, 0.0, 1.0), np.clip(cos, 0.0, 1.0))


def principal_angles(F, F2) -> np.ndarray:
    """Principal angles in ascending order, each in ``[0, pi/2]``."""
    F, F2 = _pair(F, F2)
    return _angles(F, F2)


def containment_angles(inner, outer) -> np.ndarray:
    """Angles between a k-dimensional subspace and the closest k-subspace of a larger one.

    For ``k <= dim(outer)`` these are the principal angles between ``inner``
    and its best-matching ``k``-dimensional subspace inside ``outer``; all
    zero exactly when ``inner`` is contained in ``outer``.
    """
    inner, outer = _pair(inner, outer, equal_dims=False)
    k = inner.shape[1]
    if k > outer.shape[1]:
        raise ShapeError("inner subspace is larger than outer subspace")
    if k == 0:
        return np.zeros(0)
    cos = np.linalg.svd(outer.T @ inner, compute_uv=False)[:k]
    residual = inner - outer @ (outer.T @ inner)
    sin = np.sort(np.linalg.svd(residual, compute_uv=False))[:k]
    return np.arctan2(np.clip(sin, 0.0, 1.0), np.clip(cos, 0.0, 1.0))


def orthogonal_complement(F) -> np.ndarray:
    F = check_orthonormal(F, "F")
    n, k = F.shape
    if k == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(F, mode="complete")
    return q[:, k:]


def davis_kahan_bound(gap: float, perturbation: float, d: int) -> float:
    """Upper bound ``2 sqrt(2d) ||Sigma_hat - Sigma|| / gap`` on the subspace distance."""
    if not gap > 0:
        raise ConfigurationError(f"eigengap must be positive, got {gap}")
    if perturbation < 0:
        raise ConfigurationError("perturbation must be nonnegative")
    return 2.0 * math.sqrt(2.0 * d) * perturbation / gap


def eigengap(eigenvalues, top: int, bottom: int = 0) -> float:
    """``min(l_top - l_{top+1}, l_s - l_{s+1})`` with ``s = n - bottom``.

    ``eigenvalues`` must be in descending order; the selected eigenspace is
    the ``top`` largest plus the ``bottom`` smallest, with ``l_0 = +inf``
    and ``l_{n+1} = -inf``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if top < 0 or bottom < 0 or top + bottom > n:
        raise ConfigurationError("invalid top/bottom split")
    padded = np.concatenate([[np.inf], lam, [-np.inf]])
    s = n - bottom
    return float(min(padded[top] - padded[top + 1], padded[s] - padded[s + 1]))
