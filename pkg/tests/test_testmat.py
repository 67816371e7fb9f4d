from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reweighted_pca import (
    DegenerateWeightsError,
    DomainError,
    Kind,
    PairedSample,
    ShapeError,
    block_structure_diagnostic,
    estimate,
    estimate_phi,
    estimate_psi,
    gaussian_eigenvalue,
    gaussian_neg_log_derivative,
    gaussian_partition,
    gaussian_phi_eigenvalue,
    gaussian_psi_eigenvalue,
    pair_samples,
    trace_identity_check,
    trace_standard_error,
)
from reweighted_pca._linalg import RESIDUAL_RTOL, eigen_residual
from reweighted_pca.testmat import eigenvalue_standard_errors

from conftest import planted_pairs


def phi_quad(alpha):
    with mp.workdps(30):
        num = mp.quad(lambda x: x * x * mp.exp(-alpha * x * x) * mp.npdf(x), [-mp.inf, mp.inf])
        den = mp.quad(lambda x: mp.exp(-alpha * x * x) * mp.npdf(x), [-mp.inf, mp.inf])
        return float(num / den), float(den)


def psi_quad(alpha):
    # the inner integral over x' is the gaussian moment generating function
    with mp.workdps(30):
        inner = lambda x: mp.exp(alpha * alpha * x * x / 2) * mp.npdf(x)  # noqa: E731
        num = mp.quad(lambda x: -alpha * x * x * inner(x), [-mp.inf, mp.inf])
        den = mp.quad(inner, [-mp.inf, mp.inf])
        return float(num / den), float(den)


@pytest.mark.parametrize("alpha", [-0.4, -0.1, 0.0, 0.2, 0.5, 2.0])
def test_phi_gaussian_values_match_quadrature(alpha):
    lam, z1 = phi_quad(alpha)
    assert gaussian_phi_eigenvalue(alpha) == pytest.approx(lam, rel=1e-12)
    assert gaussian_partition("phi", 3, alpha) == pytest.approx(z1**3, rel=1e-12)


@pytest.mark.parametrize("alpha", [-0.5, -0.2, 0.3, 0.6])
def test_psi_gaussian_values_match_quadrature(alpha):
    lam, z1 = psi_quad(alpha)
    assert gaussian_psi_eigenvalue(alpha) == pytest.approx(lam, rel=1e-12)
    assert gaussian_partition("psi", 2, alpha) == pytest.approx(z1**2, rel=1e-12)


def test_reference_values():
    assert gaussian_phi_eigenvalue(0.2) == pytest.approx(1 / 1.4, rel=1e-15)
    assert gaussian_psi_eigenvalue(0.5) == pytest.approx(-2 / 3, rel=1e-15)
    assert gaussian_eigenvalue("psi", 0.0) == 0.0


@pytest.mark.parametrize("kind,alpha", [("phi", 0.3), ("phi", -0.2), ("psi", 0.4), ("psi", -0.7)])
def test_neg_log_derivative_matches_differentiated_partition(kind, alpha):
    n = 5
    with mp.workdps(30):
        if kind == "phi":
            logz = lambda a: -n / 2 * mp.log(2 * a + 1)  # noqa: E731
        else:
            logz = lambda a: -n / 2 * mp.log(1 - a * a)  # noqa: E731
        expected = -mp.diff(logz, alpha)
    assert gaussian_neg_log_derivative(kind, n, alpha) == pytest.approx(float(expected), rel=1e-12)


@pytest.mark.parametrize("kind,alpha", [("phi", -0.5), ("phi", -3), ("psi", 1.0), ("psi", -1.2)])
def test_domain_errors(kind, alpha):
    with pytest.raises(DomainError):
        gaussian_eigenvalue(kind, alpha)


def brute_phi(X, alpha):
    num = np.zeros((X.shape[1], X.shape[1]))
    den = 0.0
    for x in X:
        w = math.exp(-alpha * float(x @ x))
        num += w * np.outer(x, x)
        den += w
    return num / den


def brute_psi(A, B, alpha):
    num = np.zeros((A.shape[1], A.shape[1]))
    den = 0.0
    for x, y in zip(A, B):
        w = math.exp(-alpha * float(x @ y))
        num += w * (np.outer(x, y) + np.outer(y, x)) / 2
        den += w
    return num / den


def test_estimators_match_direct_sums(rng):
    X = rng.standard_normal((40, 3))
    np.testing.assert_allclose(estimate_phi(X, 0.3).matrix, brute_phi(X, 0.3), rtol=1e-13, atol=1e-14)
    pairs = pair_samples(X)
    np.testing.assert_allclose(
        estimate_psi(pairs, -0.4).matrix, brute_psi(pairs.first, pairs.second, -0.4), rtol=1e-13, atol=1e-14
    )


def test_phi_on_pairs_uses_all_rows(rng):
    X = rng.standard_normal((20, 2))
    a = estimate_phi(pair_samples(X), 0.1)
    b = estimate_phi(X, 0.1)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert a.sample_count == 20


def test_report_spectrum_contract(rng):
    X = rng.standard_normal((500, 5)) * [1, 1, 2, 1, 1]
    report = estimate(X, "phi", 0.2)
    assert report.kind is Kind.PHI
    assert np.all(np.diff(report.eigenvalues) <= 0)
    assert eigen_residual(report.matrix, report.eigenvalues, report.eigenvectors) <= RESIDUAL_RTOL
    idx = np.argmax(np.abs(report.eigenvectors), axis=0)
    assert np.all(report.eigenvectors[idx, np.arange(5)] > 0)


def test_effective_count_for_equal_weights():
    X = np.ones((10, 2))
    report = estimate_phi(X, 0.5)
    assert report.effective_count == pytest.approx(10.0, rel=1e-14)


def test_psi_requires_pairs(rng):
    with pytest.raises(ShapeError):
        estimate(rng.standard_normal((10, 2)), "psi", 0.1)


def test_degenerate_weights_report_alpha():
    X = np.full((4, 2), 30.0)
    with pytest.raises(DegenerateWeightsError) as info:
        estimate_phi(X, -0.45)
    assert info.value.alpha == -0.45
    with pytest.raises(DegenerateWeightsError, match="underflow"):
        estimate_phi(X, 5.0)


def test_phi_blind_to_axis_spike():
    # radial law matches the gaussian, so the population Phi is scalar
    pairs, _ = planted_pairs("axis-spike", 4, 4, 100000, seed=2)
    report = estimate_phi(pairs, 0.2)
    np.testing.assert_allclose(report.eigenvalues, 1 / 1.4, atol=0.02)


def test_block_diagnostic_on_constructed_matrices():
    Q = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))[0]
    B = Q[:, :2]
    M = Q @ np.diag([3.0, 2.0, 1.0, 1.0]) @ Q.T
    assert block_structure_diagnostic(M, B) == pytest.approx(0.0, abs=1e-14)
    coupling = np.zeros((4, 4))
    coupling[0, 2] = coupling[2, 0] = 0.25
    M2 = Q @ (np.diag([3.0, 2.0, 1.0, 1.0]) + coupling) @ Q.T
    assert block_structure_diagnostic(M2, B) == pytest.approx(0.25, rel=1e-12)
    assert block_structure_diagnostic(M2, np.zeros((4, 0))) == 0.0
    assert block_structure_diagnostic(M2, Q) == 0.0


@given(
    st.integers(0, 10_000),
    st.sampled_from(["phi", "psi"]),
    st.floats(-0.3, 0.3),
)
def test_trace_equals_negative_log_partition_derivative(seed, kind, alpha):
    # holds exactly for the empirical measure, up to finite-difference error
    X = np.random.default_rng(seed).standard_normal((200, 3))
    data = pair_samples(X) if kind == "psi" else X
    trace, nld = trace_identity_check(data, kind, alpha, finite_diff_step=1e-4)
    assert trace == pytest.approx(nld, rel=1e-6, abs=1e-6)


def test_trace_identity_rejects_step_outside_domain(rng):
    with pytest.raises(DomainError):
        trace_identity_check(rng.standard_normal((10, 2)), "phi", -0.49999, finite_diff_step=1e-4)


def test_trace_standard_error_matches_replication_spread():
    rng = np.random.default_rng(8)
    traces, ses = [], []
    for _ in range(300):
        X = rng.standard_normal((2000, 3))
        traces.append(np.trace(estimate_phi(X, 0.3).matrix))
        ses.append(trace_standard_error(X, "phi", 0.3))
    assert np.std(traces) == pytest.approx(np.mean(ses), rel=0.12)


def test_eigenvalue_standard_errors_scale_like_inverse_root_n(rng):
    pairs = pair_samples(rng.standard_normal((40000, 3)))
    small = PairedSample(pairs.first[:5000], pairs.second[:5000])
    big = eigenvalue_standard_errors(pairs, estimate_psi(pairs, 0.2))
    few = eigenvalue_standard_errors(small, estimate_psi(small, 0.2))
    np.testing.assert_allclose(few / big, math.sqrt(4), rtol=0.2)
