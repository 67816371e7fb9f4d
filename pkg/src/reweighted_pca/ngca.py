"""Reweighted PCA: the end-to-end estimator and its planning calculators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_column_count, check_positive_int, check_samples
from .exceptions import ConfigurationError, DomainError
from .model import PairedSample, apply_whitening, fit_whitening, pair_samples
from .moments import MomentReport, empirical_moments
from .spectral import SubspaceEstimate, containment_angles, threshold_subspace
from .testmat import (
    Kind,
    TestMatrixReport,
    _check_domain,
    estimate_phi,
    estimate_psi,
    trace_identity_check,
    trace_standard_error,
)

__all__ = [
    "RunConfig",
    "TraceResidual",
    "Diagnostics",
    "NgcaResult",
    "PsiSampleSize",
    "run_reweighted_pca",
    "auto_beta",
    "combine_bases",
    "required_sample_size_phi",
    "required_sample_size_psi",
    "theoretical_eigenvalue_gap",
    "recovery_angles",
    "ReweightedPCA",
]

AUTO = "auto"
COMBINE_TOL = 1e-8
DIAGNOSTIC_ORDERS = (1, 2, 3, 4)
LOW_EFFECTIVE_COUNT = 1000.0

Beta = Union[float, str]


def _check_beta(value, name) -> Beta:
    if isinstance(value, str):
        if value.strip().lower() != AUTO:
            raise ConfigurationError(f"{name} must be a positive number or 'auto', got {value!r}")
        return AUTO
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return value


def _check_unit_interval(value, name) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ConfigurationError(f"{name} must lie in (0, 1), got {value}")
    return value


def _check_K(value, name="K") -> float:
    value = float(value)
    if not value >= 1.0 or not math.isfinite(value):
        raise ConfigurationError(f"{name} must be a finite number >= 1, got {value}")
    return value


def _check_constant(value, name) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one Reweighted PCA run.

    ``beta1``/``beta2`` accept ``"auto"``, which derives the threshold from
    the noise band of :func:`auto_beta` on every attempt. With
    ``auto_halving`` both alphas are halved together while both estimates
    stay empty, at most ``max_halvings`` times.
    """

    alpha1: float = 0.5
    alpha2: float = 0.5
    beta1: Beta = AUTO
    beta2: Beta = AUTO
    delta: float = 0.05
    auto_halving: bool = True
    max_halvings: int = 20
    K_bound: float = 2.0
    C: float = 1.0

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "alpha1", _check_domain(Kind.PHI, self.alpha1))
        set_(self, "alpha2", _check_domain(Kind.PSI, self.alpha2))
        set_(self, "beta1", _check_beta(self.beta1, "beta1"))
        set_(self, "beta2", _check_beta(self.beta2, "beta2"))
        set_(self, "delta", _check_unit_interval(self.delta, "delta"))
        set_(self, "auto_halving", bool(self.auto_halving))
        set_(self, "max_halvings", check_positive_int(self.max_halvings, "max_halvings"))
        set_(self, "K_bound", _check_K(self.K_bound, "K_bound"))
        set_(self, "C", _check_constant(self.C, "C"))

    def as_dict(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "delta": self.delta,
            "auto_halving": self.auto_halving,
            "max_halvings": self.max_halvings,
            "K_bound": self.K_bound,
            "C": self.C,
        }


@dataclass(frozen=True)
class TraceResidual:
    """Trace of a test matrix against the finite-difference ``-(log Z_hat)'``."""

    kind: Kind
    alpha: float
    trace: float
    neg_log_derivative: float
    stderr: float

    @property
    def residual(self) -> float:
        return self.trace - self.neg_log_derivative

    @property
    def standardized(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.residual == 0 else math.inf
        return abs(self.residual) / self.stderr


@dataclass(frozen=True)
class Diagnostics:
    moments: list[MomentReport]
    trace_residuals: dict[Kind, TraceResidual]
    alpha_history: list[tuple[float, float]]
    notes: list[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class NgcaResult:
    """Both subspace estimates, their orthonormalised union and diagnostics."""

    estimate_phi: SubspaceEstimate
    estimate_psi: SubspaceEstimate
    combined_basis: np.ndarray
    halvings_used: int
    diagnostics: Diagnostics
    report_phi: TestMatrixReport
    report_psi: TestMatrixReport
    config: RunConfig

    @property
    def found(self) -> bool:
        return self.combined_basis.shape[1] > 0


def auto_beta(
    report: TestMatrixReport,
    sample_count: float | None = None,
    delta: float = 0.05,
    K_bound: float = 2.0,
) -> float:
    """Noise band ``3 K^2 sqrt((n + ln(1/delta)) / sample_count)``.

    When ``sample_count`` is omitted it is chosen from the report: the row
    count for Phi with ``alpha >= 0`` (weights bounded by one), otherwise
    the effective sample size of the weights, since unbounded weights
    concentrate on fewer points than were drawn.
    """
    delta = _check_unit_interval(delta, "delta")
    K_bound = _check_K(K_bound, "K_bound")
    if sample_count is None:
        if report.kind is Kind.PHI and report.alpha >= 0:
            sample_count = report.sample_count
        else:
            sample_count = report.effective_count
    sample_count = float(sample_count)
    if not sample_count > 0:
        raise ConfigurationError(f"sample_count must be positive, got {sample_count}")
    n = report.n_features
    return 3.0 * K_bound**2 * math.sqrt((n + math.log(1.0 / delta)) / sample_count)


def combine_bases(*bases: np.ndarray, n_features: int | None = None, tol: float = COMBINE_TOL) -> np.ndarray:
    """Orthonormal basis of the span of several orthonormal bases.

    Column-pivoted QR of the concatenation; columns whose pivot falls below
    ``tol`` are linearly dependent on earlier ones and are dropped.
    """
    blocks = [np.asarray(b, dtype=float) for b in bases]
    if n_features is None:
        if not blocks:
            raise ConfigurationError("need at least one basis or n_features")
        n_features = blocks[0].shape[0]
    blocks = [b.reshape(n_features, -1) for b in blocks]
    stacked = np.hstack(blocks) if blocks else np.zeros((n_features, 0))
    if stacked.shape[1] == 0:
        return np.zeros((n_features, 0))
    q, r, _ = scipy.linalg.qr(stacked, mode="economic", pivoting=True)
    rank = int(np.sum(np.abs(np.diag(r)) >= tol))
    q = q[:, :rank]
    # same sign convention as the eigenvectors, for reproducible reports
    idx = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[idx, np.arange(rank)])
    signs[signs == 0] = 1.0
    return q * signs


def _threshold(report, beta, config, sample_count=None):
    if beta == AUTO:
        beta = auto_beta(report, sample_count, config.delta, config.K_bound)
    return threshold_subspace(report, beta)


def _trace_residual(pairs, kind, alpha, notes) -> TraceResidual | None:
    data = pairs if kind is Kind.PSI else pairs.stacked()
    try:
        trace, nld = trace_identity_check(data, kind, alpha)
    except DomainError as exc:
        notes.append(f"trace identity skipped for {kind.value}: {exc}")
        return None
    return TraceResidual(kind, alpha, trace, nld, trace_standard_error(data, kind, alpha))


def _advisories(config, report_phi, report_psi, notes):
    if abs(report_psi.alpha) >= 0.5:
        notes.append(
            f"alpha2={report_psi.alpha:g}: Psi weights have infinite variance under the "
            "gaussian, so its eigenvalues concentrate slowly"
        )
    if report_phi.alpha < 0:
        notes.append(f"alpha1={report_phi.alpha:g} < 0: Phi weights are unbounded")
    for report in (report_phi, report_psi):
        if report.effective_count < LOW_EFFECTIVE_COUNT:
            notes.append(
                f"{report.kind.value} effective sample size is only {report.effective_count:.0f}"
            )
    n = report_phi.n_features
    limit = 1.0 / (config.C * config.K_bound**2 * n)
    if abs(report_phi.alpha) > limit or abs(report_psi.alpha) > limit:
        notes.append(
            f"alphas exceed the heuristic range 1/(C K^2 n) = {limit:.3g}; "
            "the empirical noise band still governs selection"
        )


def run_reweighted_pca(pairs: PairedSample, config: RunConfig | None = None) -> NgcaResult:
    """Estimate the non-gaussian subspace from paired samples.

    Phi is computed over all ``2N`` points and Psi over the ``N`` pairs.
    Both spectra are thresholded at ``beta1``/``beta2``. With
    ``auto_halving``, while both estimates are empty the alphas are halved
    together and the run repeats; ``halvings_used`` counts the halvings.
    """
    if config is None:
        config = RunConfig()
    if not isinstance(pairs, PairedSample):
        raise ConfigurationError("run_reweighted_pca needs a PairedSample")
    X = pairs.stacked()
    alpha1, alpha2 = config.alpha1, config.alpha2
    history = []
    halvings = 0
    while True:
        history.append((alpha1, alpha2))
        report_phi = estimate_phi(X, alpha1)
        report_psi = estimate_psi(pairs, alpha2)
        est_phi = _threshold(report_phi, config.beta1, config)
        est_psi = _threshold(report_psi, config.beta2, config)
        empty = est_phi.is_trivial and est_psi.is_trivial
        if not (empty and config.auto_halving) or halvings >= config.max_halvings:
            break
        alpha1 /= 2.0
        alpha2 /= 2.0
        halvings += 1

    notes: list[str] = []
    _advisories(config, report_phi, report_psi, notes)
    residuals = {}
    for kind, alpha in ((Kind.PHI, alpha1), (Kind.PSI, alpha2)):
        res = _trace_residual(pairs, kind, alpha, notes)
        if res is not None:
            residuals[kind] = res
    diagnostics = Diagnostics(
        moments=[empirical_moments(pairs, r) for r in DIAGNOSTIC_ORDERS],
        trace_residuals=residuals,
        alpha_history=history,
        notes=notes,
    )
    combined = combine_bases(est_phi.basis, est_psi.basis, n_features=pairs.n_features)
    return NgcaResult(
        estimate_phi=est_phi,
        estimate_psi=est_psi,
        combined_basis=combined,
        halvings_used=halvings,
        diagnostics=diagnostics,
        report_phi=report_phi,
        report_psi=report_psi,
        config=config,
    )


def required_sample_size_phi(epsilon: float, delta: float, n: int, K: float = 1.0, C: float = 1.0) -> int:
    """Smallest ``N`` with ``N >= C K^2 (n + ln(1/delta)) / epsilon^2``."""
    epsilon = _check_unit_interval(epsilon, "epsilon")
    delta = _check_unit_interval(delta, "delta")
    n = check_positive_int(n, "n")
    K = _check_K(K)
    C = _check_constant(C, "C")
    return int(math.ceil(C * K * K * (n + math.log(1.0 / delta)) / epsilon**2))


class PsiSampleSize(NamedTuple):
    sample_size: int
    alpha_cap: float
    tau: float


def required_sample_size_psi(
    epsilon: float, delta: float, n: int, K: float = 1.0, C: float = 1.0
) -> PsiSampleSize:
    """Sample size for Psi plus the ``|alpha2|`` cap it implies.

    One pass: ``N`` as for Phi, then ``tau = sqrt(ln(N / min(delta, K epsilon)))``
    and ``cap = 1 / (C K^2 tau (n + tau))``.
    """
    N = required_sample_size_phi(epsilon, delta, n, K, C)
    tau = math.sqrt(math.log(N / min(delta, K * epsilon)))
    cap = 1.0 / (C * K * K * tau * (n + tau))
    return PsiSampleSize(N, cap, tau)


def theoretical_eigenvalue_gap(
    Delta: float, r: int, d: int, alpha: float, kind="phi", K: float = 1.0, C: float = 1.0
) -> float:
    """Lower bound ``Delta |alpha|^(r-1) / (2 d (r-1)!)`` on the outlier separation.

    The bound is only guaranteed for
    ``|alpha| <= Delta r / ((C K^2)^r (d^(r+1) + (r+1)!))``; outside that
    range a ``RuntimeWarning`` is issued and the value is still returned,
    since ``C`` is unknown and the check is heuristic.
    """
    Delta = _check_constant(Delta, "Delta")
    r = check_positive_int(r, "r", minimum=2)
    d = check_positive_int(d, "d")
    kind = Kind.parse(kind)
    alpha = _check_domain(kind, alpha)
    K = _check_K(K)
    C = _check_constant(C, "C")
    limit = Delta * r / ((C * K * K) ** r * (d ** (r + 1) + math.factorial(r + 1)))
    if abs(alpha) > limit:
        warnings.warn(
            f"|alpha|={abs(alpha):g} exceeds the guaranteed range {limit:.3g} "
            f"(heuristic, C={C:g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return Delta * abs(alpha) ** (r - 1) / (2.0 * d * math.factorial(r - 1))


def recovery_angles(basis, truth_basis) -> np.ndarray:
    """Angle of each estimated direction to the true subspace, ascending.

    For an estimate of dimension ``k <= d`` these are the principal angles
    between the estimate and its best-matching ``k``-subspace of the truth.
    When ``k > d`` at most ``d`` directions can be matched; the other
    ``k - d`` are orthogonal to the truth and are reported as ``pi/2``.
    """
    basis = np.asarray(basis, dtype=float)
    truth_basis = np.asarray(truth_basis, dtype=float)
    k, d = basis.shape[1], truth_basis.shape[1]
    if k <= d:
        return containment_angles(basis, truth_basis)
    matched = containment_angles(truth_basis, basis)
    return np.concatenate([matched, np.full(k - d, np.pi / 2)])


class ReweightedPCA(TransformerMixin, BaseEstimator):
    """Non-gaussian subspace estimator with a scikit-learn interface.

    ``fit`` splits the rows into pairs (row ``i`` with row ``N + i``) and
    runs :func:`run_reweighted_pca`; ``transform`` projects onto the
    combined basis.

    Parameters
    ----------
    alpha1, alpha2 : float, default=0.5
        Reweighting scales for Phi and Psi.
    beta1, beta2 : float or "auto", default="auto"
    delta : float, default=0.05
    auto_halving : bool, default=True
    max_halvings : int, default=20
    K_bound : float, default=2.0
    whiten : bool, default=False
        Whiten the input before estimation; the model assumes isotropic data.
    drop_last : bool, default=False
        Drop the last row when the row count is odd instead of raising.

    Attributes
    ----------
    components_ : ndarray of shape (n_components_, n_features_in_)
    n_components_ : int
    result_ : NgcaResult
    estimate_phi_, estimate_psi_ : SubspaceEstimate
    halvings_used_ : int
    whitener_ : WhiteningTransform or None
    n_features_in_ : int
    """

    def __init__(
        self,
        alpha1: float = 0.5,
        alpha2: float = 0.5,
        beta1: Beta = AUTO,
        beta2: Beta = AUTO,
        delta: float = 0.05,
        auto_halving: bool = True,
        max_halvings: int = 20,
        K_bound: float = 2.0,
        whiten: bool = False,
        drop_last: bool = False,
    ):
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.beta1 = beta1
        self.beta2 = beta2
        self.delta = delta
        self.auto_halving = auto_halving
        self.max_halvings = max_halvings
        self.K_bound = K_bound
        self.whiten = whiten
        self.drop_last = drop_last

    def _config(self) -> RunConfig:
        return RunConfig(
            alpha1=self.alpha1,
            alpha2=self.alpha2,
            beta1=self.beta1,
            beta2=self.beta2,
            delta=self.delta,
            auto_halving=self.auto_halving,
            max_halvings=self.max_halvings,
            K_bound=self.K_bound,
        )

    def fit(self, X, y=None):
        config = self._config()
        X = check_samples(X, min_rows=2)
        if self.drop_last and X.shape[0] % 2:
            X = X[:-1]
        self.whitener_ = fit_whitening(X) if self.whiten else None
        if self.whitener_ is not None:
            X = apply_whitening(self.whitener_, X)
        result = run_reweighted_pca(pair_samples(X), config)
        self.result_ = result
        self.estimate_phi_ = result.estimate_phi
        self.estimate_psi_ = result.estimate_psi
        self.halvings_used_ = result.halvings_used
        self.components_ = result.combined_basis.T.copy()
        self.n_components_ = self.components_.shape[0]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_samples(X)
        check_column_count(X, self.n_features_in_)
        if self.whitener_ is not None:
            X = apply_whitening(self.whitener_, X)
        return X @ self.components_.T
