"""Reweighted test matrices and their gaussian reference values.

``Phi`` is the second-moment matrix of the sample reweighted by
``exp(-alpha ||x||^2)``; ``Psi`` is the symmetrised cross-moment of paired
points reweighted by ``exp(-alpha <x, x'>)``. For a standard gaussian both
are scalar multiples of the identity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _parallel
from ._linalg import symmetric_eigh
from ._validation import check_orthonormal, check_samples
from .exceptions import ConfigurationError, DegenerateWeightsError, DomainError, ShapeError
from .model import PairedSample

__all__ = [
    "Kind",
    "TestMatrixReport",
    "gaussian_phi_eigenvalue",
    "gaussian_psi_eigenvalue",
    "gaussian_eigenvalue",
    "gaussian_partition",
    "gaussian_neg_log_derivative",
    "estimate_phi",
    "estimate_psi",
    "estimate",
    "block_structure_diagnostic",
    "trace_identity_check",
    "trace_standard_error",
    "eigenvalue_standard_errors",
]

MAX_EXPONENT = 700.0


class Kind(str, enum.Enum):
    PHI = "phi"
    PSI = "psi"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown test matrix kind {value!r}") from None


def _check_domain(kind: Kind, alpha: float) -> float:
    alpha = float(alpha)
    if kind is Kind.PHI and not alpha > -0.5:
        raise DomainError(f"Phi requires alpha > -1/2, got {alpha}")
    if kind is Kind.PSI and not abs(alpha) < 1.0:
        raise DomainError(f"Psi requires |alpha| < 1, got {alpha}")
    return alpha


def gaussian_phi_eigenvalue(alpha: float) -> float:
    alpha = _check_domain(Kind.PHI, alpha)
    return 1.0 / (2.0 * alpha + 1.0)


def gaussian_psi_eigenvalue(alpha: float) -> float:
    alpha = _check_domain(Kind.PSI, alpha)
    return alpha / (alpha * alpha - 1.0)


def gaussian_eigenvalue(kind, alpha: float) -> float:
    kind = Kind.parse(kind)
    return gaussian_phi_eigenvalue(alpha) if kind is Kind.PHI else gaussian_psi_eigenvalue(alpha)


def gaussian_partition(kind, n: int, alpha: float) -> float:
    """Closed-form partition function of the standard gaussian in ``R^n``.

    ``Z_Phi = (2 alpha + 1)^(-n/2)`` and ``Z_Psi = (1 - alpha^2)^(-n/2)``.
    """
    kind = Kind.parse(kind)
    alpha = _check_domain(kind, alpha)
    base = 2.0 * alpha + 1.0 if kind is Kind.PHI else 1.0 - alpha * alpha
    return base ** (-n / 2.0)


def gaussian_neg_log_derivative(kind, n: int, alpha: float) -> float:
    """``-(log Z)'(alpha)`` for the gaussian, i.e. ``n`` times its eigenvalue."""
    return n * gaussian_eigenvalue(kind, alpha)


@dataclass(frozen=True, eq=False)
class TestMatrixReport:
    """An estimated test matrix with its spectrum and gaussian reference.

    ``partition_value`` is the per-sample normaliser (``Z_hat / M`` for Phi,
    ``Z_hat / 2N`` for Psi), an estimate of the population partition
    function. ``effective_count`` is Kish's effective sample size
    ``(sum w)^2 / sum w^2`` of the weights.
    """

    __test__ = False  # not a pytest class despite the name

    kind: Kind
    alpha: float
    matrix: np.ndarray
    partition_value: float
    gaussian_eigenvalue: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sample_count: int
    effective_count: float

    @property
    def n_features(self) -> int:
        return self.matrix.shape[0]


def _weights(exponent: np.ndarray, alpha: float) -> np.ndarray:
    top = float(exponent.max())
    if top > MAX_EXPONENT:
        raise DegenerateWeightsError(
            f"weight exponent reaches {top:.1f} > {MAX_EXPONENT:.0f} at alpha={alpha}; "
            "use a smaller |alpha|",
            alpha=alpha,
        )
    w = np.exp(exponent)
    if not np.any(w > 0):
        raise DegenerateWeightsError(
            f"all weights underflow to zero at alpha={alpha}; use a smaller alpha",
            alpha=alpha,
        )
    return w


def _report(kind, alpha, matrix, w, count) -> TestMatrixReport:
    vals, vecs = symmetric_eigh(matrix)
    total = float(w.sum())
    return TestMatrixReport(
        kind=kind,
        alpha=alpha,
        matrix=matrix,
        partition_value=total / w.size,
        gaussian_eigenvalue=gaussian_eigenvalue(kind, alpha),
        eigenvalues=vals,
        eigenvectors=vecs,
        sample_count=count,
        effective_count=total**2 / float(np.dot(w, w)),
    )


def _phi_parts(X: np.ndarray, alpha: float):
    sq = np.einsum("ij,ij->i", X, X)
    w = _weights(-alpha * sq, alpha)
    return sq, w


def _psi_parts(pairs: PairedSample, alpha: float):
    dots = np.einsum("ij,ij->i", pairs.first, pairs.second)
    w = _weights(-alpha * dots, alpha)
    return dots, w


def _as_rows(data) -> np.ndarray:
    if isinstance(data, PairedSample):
        return data.stacked()
    return check_samples(data)


def _as_pairs(data) -> PairedSample:
    if not isinstance(data, PairedSample):
        raise ShapeError("Psi needs a PairedSample")
    return data


def estimate_phi(sample, alpha: float) -> TestMatrixReport:
    """``sum_i w_i x_i x_i^T / sum_i w_i`` with ``w_i = exp(-alpha ||x_i||^2)``."""
    alpha = _check_domain(Kind.PHI, alpha)
    X = _as_rows(sample)
    _, w = _phi_parts(X, alpha)
    matrix = _parallel.weighted_cross(X, X, w) / w.sum()
    matrix = (matrix + matrix.T) / 2.0
    return _report(Kind.PHI, alpha, matrix, w, X.shape[0])


def estimate_psi(pairs: PairedSample, alpha: float) -> TestMatrixReport:
    """Symmetrised reweighted cross-moment of paired points.

    ``sum_i w_i (x_i x_i'^T + x_i' x_i^T) / (2 sum_i w_i)`` with
    ``w_i = exp(-alpha <x_i, x_i'>)``.
    """
    alpha = _check_domain(Kind.PSI, alpha)
    pairs = _as_pairs(pairs)
    _, w = _psi_parts(pairs, alpha)
    cross = _parallel.weighted_cross(pairs.first, pairs.second, w)
    matrix = (cross + cross.T) / (2.0 * w.sum())
    return _report(Kind.PSI, alpha, matrix, w, pairs.n_pairs)


def estimate(data, kind, alpha: float) -> TestMatrixReport:
    kind = Kind.parse(kind)
    if kind is Kind.PHI:
        return estimate_phi(data, alpha)
    return estimate_psi(_as_pairs(data), alpha)


def block_structure_diagnostic(report, basis_E) -> float:
    """Spectral norm of ``P_E M P_{E^perp}``; zero in the population.

    ``report`` may be a :class:`TestMatrixReport` or a bare symmetric matrix.
    """
    matrix = report.matrix if isinstance(report, TestMatrixReport) else np.asarray(report, float)
    B = check_orthonormal(basis_E, "basis_E")
    if B.shape[0] != matrix.shape[0]:
        raise ShapeError(f"basis has {B.shape[0]} rows, matrix is {matrix.shape[0]}-dimensional")
    if B.shape[1] == 0 or B.shape[1] == B.shape[0]:
        return 0.0
    P = B @ B.T
    off = P @ matrix @ (np.eye(matrix.shape[0]) - P)
    return float(np.linalg.norm(off, 2))


def _statistic_and_weights(data, kind: Kind, alpha: float):
    if kind is Kind.PHI:
        return _phi_parts(_as_rows(data), alpha)
    return _psi_parts(_as_pairs(data), alpha)


def _log_partition(data, kind: Kind, alpha: float) -> float:
    _, w = _statistic_and_weights(data, kind, alpha)
    return math.log(float(w.mean()))


def trace_identity_check(data, kind, alpha: float, finite_diff_step: float = 1e-4):
    """Trace of the estimated matrix and a centred difference of ``-log Z_hat``.

    Returns
    -------
    trace, neg_log_deriv : float
    """
    kind = Kind.parse(kind)
    alpha = _check_domain(kind, alpha)
    h = float(finite_diff_step)
    if not h > 0:
        raise ConfigurationError("finite_diff_step must be positive")
    try:
        _check_domain(kind, alpha - h)
        _check_domain(kind, alpha + h)
    except DomainError:
        raise DomainError(
            f"finite_diff_step={h} leaves the alpha domain around alpha={alpha}"
        ) from None
    trace = float(np.trace(estimate(data, kind, alpha).matrix))
    upper = _log_partition(data, kind, alpha + h)
    lower = _log_partition(data, kind, alpha - h)
    return trace, -(upper - lower) / (2.0 * h)


def _ratio_stderr(a: np.ndarray, w: np.ndarray) -> float:
    """Delta-method standard error of ``sum w a / sum w``."""
    total = w.sum()
    centre = np.dot(w, a) / total
    return float(math.sqrt(np.dot(w * w, (a - centre) ** 2)) / total)


def trace_standard_error(data, kind, alpha: float) -> float:
    """Plug-in standard error of the trace of the estimated test matrix."""
    kind = Kind.parse(kind)
    alpha = _check_domain(kind, alpha)
    stat, w = _statistic_and_weights(data, kind, alpha)
    return _ratio_stderr(stat, w)


def eigenvalue_standard_errors(data, report: TestMatrixReport) -> np.ndarray:
    """Plug-in standard error of ``v^T M_hat v`` for each reported eigenvector ``v``.

    The eigenvectors are held fixed, so this ignores eigenvector estimation
    noise; it is a noise scale, not a confidence interval.
    """
    V = report.eigenvectors
    if report.kind is Kind.PHI:
        X = _as_rows(data)
        _, w = _phi_parts(X, report.alpha)
        proj = X @ V
        stats = proj * proj
    else:
        pairs = _as_pairs(data)
        _, w = _psi_parts(pairs, report.alpha)
        stats = (pairs.first @ V) * (pairs.second @ V)
    return np.array([_ratio_stderr(stats[:, j], w) for j in range(V.shape[1])])
