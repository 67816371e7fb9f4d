from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from reweighted_pca import (
    ConfigurationError,
    DegenerateWeightsError,
    DomainError,
    Kind,
    PairedSample,
    PairingError,
    ReweightedPCA,
    RunConfig,
    auto_beta,
    combine_bases,
    containment_angles,
    estimate_phi,
    estimate_psi,
    haar_orthogonal,
    pair_samples,
    recovery_angles,
    required_sample_size_phi,
    required_sample_size_psi,
    run_reweighted_pca,
    theoretical_eigenvalue_gap,
    threshold_subspace,
)

from conftest import planted_pairs


@pytest.mark.parametrize(
    "kwargs,error",
    [
        ({"alpha1": -0.5}, DomainError),
        ({"alpha2": 1.0}, DomainError),
        ({"beta1": 0.0}, ConfigurationError),
        ({"beta2": "sometimes"}, ConfigurationError),
        ({"delta": 1.0}, ConfigurationError),
        ({"max_halvings": 0}, Exception),
        ({"K_bound": 0.5}, ConfigurationError),
    ],
)
def test_run_config_validation(kwargs, error):
    with pytest.raises(error):
        RunConfig(**kwargs)


def test_run_config_defaults():
    config = RunConfig()
    assert (config.alpha1, config.alpha2) == (0.5, 0.5)
    assert config.beta1 == config.beta2 == "auto"
    assert config.max_halvings == 20 and config.K_bound == 2.0


def gaussian_report(n, count, kind="phi", alpha=0.2, seed=0):
    X = np.random.default_rng(seed).standard_normal((2 * count, n))
    if kind == "phi":
        return estimate_phi(X, alpha)
    return estimate_psi(pair_samples(X), alpha)


def test_auto_beta_formula():
    report = gaussian_report(6, 100)
    beta = auto_beta(report, sample_count=50000, delta=0.05, K_bound=1.0)
    assert beta == pytest.approx(3 * math.sqrt((6 + math.log(20)) / 50000), rel=1e-15)
    assert beta == pytest.approx(0.0402, abs=5e-5)
    assert auto_beta(report, 100000, 0.05, 1.0) == pytest.approx(beta / math.sqrt(2), rel=1e-14)
    assert auto_beta(report, 1e16, 0.05, 1.0) < 1e-6


def test_auto_beta_default_count_depends_on_weights():
    phi = gaussian_report(4, 500, "phi", 0.2)
    assert auto_beta(phi) == auto_beta(phi, sample_count=phi.sample_count)
    psi = gaussian_report(4, 500, "psi", 0.3)
    assert psi.effective_count < psi.sample_count
    assert auto_beta(psi) == auto_beta(psi, sample_count=psi.effective_count)
    negative = gaussian_report(4, 500, "phi", -0.2)
    assert auto_beta(negative) == auto_beta(negative, sample_count=negative.effective_count)


def test_required_sample_size_phi():
    assert required_sample_size_phi(0.1, 0.05, 10) == 1300
    base = (10 + math.log(20)) / 0.01
    assert required_sample_size_phi(0.05, 0.05, 10) == math.ceil(4 * base)
    assert required_sample_size_phi(0.1, 0.05, 10, K=2) == math.ceil(4 * base)
    with pytest.raises(ConfigurationError):
        required_sample_size_phi(0.1, 0.05, 10, K=0.5)


def test_required_sample_size_psi():
    N, cap, tau = required_sample_size_psi(0.1, 0.05, 10)
    assert N == 1300
    assert tau == pytest.approx(math.sqrt(math.log(26000)), rel=1e-15)
    assert tau == pytest.approx(3.19, abs=0.005)
    assert cap == pytest.approx(1 / (tau * (10 + tau)), rel=1e-15)
    assert cap == pytest.approx(0.0238, abs=5e-5)


@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_psi_cap_decreases_with_sample_size(eps_a, eps_b):
    small, large = sorted([eps_a, eps_b], reverse=True)
    a = required_sample_size_psi(small, 0.05, 6)
    b = required_sample_size_psi(large, 0.05, 6)
    assert b.sample_size >= a.sample_size
    if b.sample_size > a.sample_size and min(0.05, small) == min(0.05, large):
        assert b.alpha_cap < a.alpha_cap


def test_psi_cap_vanishes_as_K_grows():
    caps = [required_sample_size_psi(0.1, 0.05, 5, K=K).alpha_cap for K in (1, 10, 100, 1000)]
    assert caps == sorted(caps, reverse=True)
    assert caps[-1] < 1e-7


def test_theoretical_eigenvalue_gap():
    assert theoretical_eigenvalue_gap(1.2, 2, 1, 0.2) == pytest.approx(0.12, rel=1e-14)
    assert theoretical_eigenvalue_gap(1.2, 2, 1, 0.0) == 0.0
    one = theoretical_eigenvalue_gap(1.0, 3, 1, 0.01, "psi")
    assert theoretical_eigenvalue_gap(1.0, 3, 2, 0.01, "psi") == pytest.approx(one / 2, rel=1e-14)


def test_theoretical_gap_warns_outside_range():
    with pytest.warns(RuntimeWarning, match="range"):
        value = theoretical_eigenvalue_gap(1.0, 4, 3, 0.4)
    assert value == pytest.approx(0.4**3 / (6 * 6), rel=1e-14)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        theoretical_eigenvalue_gap(1.2, 2, 1, 0.2)


def test_combine_bases_spans_each_input():
    Q = haar_orthogonal(5, 3)
    A, B = Q[:, :2], Q[:, 1:3]
    C = combine_bases(A, B)
    assert C.shape == (5, 3)
    np.testing.assert_allclose(C.T @ C, np.eye(3), atol=1e-12)
    for part in (A, B):
        assert np.max(containment_angles(part, C)) < 1e-8
    assert combine_bases(np.zeros((5, 0)), np.zeros((5, 0))).shape == (5, 0)
    assert combine_bases(A, np.zeros((5, 0))).shape == (5, 2)


@given(st.integers(0, 2**31), st.integers(0, 3), st.integers(0, 3))
def test_combined_basis_contains_estimates(seed, ka, kb):
    Q = haar_orthogonal(6, seed)
    R = haar_orthogonal(6, seed + 1)
    C = combine_bases(Q[:, :ka], R[:, :kb])
    np.testing.assert_allclose(C.T @ C, np.eye(C.shape[1]), atol=1e-12)
    assert C.shape[1] == min(ka + kb, 6)
    for part in (Q[:, :ka], R[:, :kb]):
        if part.shape[1]:
            assert np.max(containment_angles(part, C)) <= 1e-8


def test_run_matches_algorithm_without_halving():
    pairs, _ = planted_pairs("uniform-cube", 6, 2, 50000, seed=1)
    config = RunConfig(alpha1=0.2, alpha2=0.25, beta1=0.03, beta2=0.05, auto_halving=False)
    result = run_reweighted_pca(pairs, config)
    phi = threshold_subspace(estimate_phi(pairs.stacked(), 0.2), 0.03)
    psi = threshold_subspace(estimate_psi(pairs, 0.25), 0.05)
    np.testing.assert_array_equal(result.estimate_phi.basis, phi.basis)
    np.testing.assert_array_equal(result.estimate_psi.basis, psi.basis)
    assert result.halvings_used == 0
    assert result.diagnostics.alpha_history == [(0.2, 0.25)]


def test_run_recovers_planted_cube():
    pairs, truth = planted_pairs("uniform-cube", 6, 2, 100000, seed=5)
    result = run_reweighted_pca(pairs, RunConfig(alpha1=0.2))
    assert not result.estimate_phi.is_trivial
    assert np.max(recovery_angles(result.estimate_phi.basis, truth.basis_E)) <= 0.2


def test_run_on_gaussian_exhausts_halvings():
    X = np.random.default_rng(2).standard_normal((100000, 6))
    result = run_reweighted_pca(pair_samples(X), RunConfig(max_halvings=5))
    assert result.estimate_phi.is_trivial and result.estimate_psi.is_trivial
    assert result.halvings_used == 5
    assert result.combined_basis.shape == (6, 0)
    assert len(result.diagnostics.alpha_history) == 6
    assert result.diagnostics.alpha_history[-1] == (0.5 / 32, 0.5 / 32)


def test_run_is_deterministic():
    pairs, _ = planted_pairs("rademacher", 5, 2, 20000, seed=9)
    a = run_reweighted_pca(pairs, RunConfig())
    b = run_reweighted_pca(pairs, RunConfig())
    np.testing.assert_array_equal(a.combined_basis, b.combined_basis)
    np.testing.assert_array_equal(a.report_psi.matrix, b.report_psi.matrix)
    assert a.halvings_used == b.halvings_used


def test_run_diagnostics():
    pairs, _ = planted_pairs("uniform-cube", 4, 1, 20000, seed=2)
    result = run_reweighted_pca(pairs, RunConfig(alpha1=0.2, alpha2=0.25, auto_halving=False))
    diag = result.diagnostics
    assert [m.order_r for m in diag.moments] == [1, 2, 3, 4]
    assert set(diag.trace_residuals) == {Kind.PHI, Kind.PSI}
    for res in diag.trace_residuals.values():
        assert res.standardized < 5
    assert any("heuristic range" in note for note in diag.notes)


def test_degenerate_weights_propagate_with_alpha():
    X = np.full((4, 2), 40.0)
    X[1] *= -1
    X[3] *= -1
    with pytest.raises(DegenerateWeightsError) as info:
        run_reweighted_pca(pair_samples(X), RunConfig(alpha1=0.1, alpha2=0.9))
    assert info.value.alpha in (0.1, 0.9)


def test_estimator_fit_transform():
    pairs, truth = planted_pairs("uniform-cube", 6, 2, 100000, seed=7)
    X = pairs.stacked()
    est = ReweightedPCA(alpha1=0.2).fit(X)
    assert est.n_components_ == est.components_.shape[0] >= 1
    assert est.n_features_in_ == 6
    Z = est.transform(X[:10])
    assert Z.shape == (10, est.n_components_)
    np.testing.assert_allclose(Z, X[:10] @ est.components_.T)
    assert np.max(recovery_angles(est.components_.T, truth.basis_E)) <= 0.25


def test_estimator_params_and_clone():
    est = ReweightedPCA(alpha1=0.3, whiten=True)
    params = clone(est).get_params()
    assert params["alpha1"] == 0.3 and params["whiten"] is True
    assert params["beta1"] == "auto"


def test_estimator_pairing_options():
    X = np.random.default_rng(0).standard_normal((1001, 3))
    with pytest.raises(PairingError):
        ReweightedPCA(max_halvings=1).fit(X)
    est = ReweightedPCA(max_halvings=1, drop_last=True, whiten=True).fit(X)
    assert est.whitener_ is not None
    assert est.result_.report_psi.sample_count == 500


def test_estimator_rejects_bad_config_at_fit():
    with pytest.raises(DomainError):
        ReweightedPCA(alpha2=2.0).fit(np.zeros((10, 2)))


def test_paired_sample_is_required():
    with pytest.raises(ConfigurationError):
        run_reweighted_pca(np.zeros((10, 2)))
    first = np.random.default_rng(1).standard_normal((300, 2))
    result = run_reweighted_pca(PairedSample(first, first[::-1].copy()), RunConfig(max_halvings=1))
    assert result.config.max_halvings == 1


def test_recovery_angles_penalise_extra_directions():
    Q = haar_orthogonal(5, 4)
    np.testing.assert_allclose(recovery_angles(Q[:, :1], Q[:, :2]), [0.0], atol=1e-12)
    angles = recovery_angles(Q[:, :3], Q[:, :2])
    np.testing.assert_allclose(angles, [0.0, 0.0, np.pi / 2], atol=1e-12)
    assert recovery_angles(np.zeros((5, 0)), Q[:, :2]).size == 0


@pytest.mark.slow
@pytest.mark.parametrize("n", [4, 8])
def test_auto_beta_rarely_fires_on_gaussian_data(n):
    hits = sum(
        run_reweighted_pca(planted_pairs("pure-gaussian", n, 0, 100000, seed=s)[0]).found
        for s in range(30)
    )
    assert hits <= 3
