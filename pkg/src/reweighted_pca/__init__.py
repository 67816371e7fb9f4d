"""Non-gaussian subspace estimation by reweighted PCA.

The hidden non-gaussian subspace of an isotropic sample is read off the
outlier eigenvalues of two reweighted second-moment matrices.
"""

from .exceptions import (
    ConfigurationError,
    DegenerateWeightsError,
    DomainError,
    InputFormatError,
    InvalidDimensionError,
    InvalidOrderError,
    NGCAError,
    PairingError,
    ShapeError,
    SingularCovarianceError,
)
from .model import (
    Family,
    GeneratorConfig,
    GroundTruth,
    PairedSample,
    Whitener,
    WhiteningTransform,
    apply_whitening,
    fit_whitening,
    haar_orthogonal,
    pair_samples,
    sample_ngca,
)
from .moments import (
    DirectionalDeviation,
    GaussianTestVerdict,
    MomentReport,
    directional_deviation,
    eccentricity_norm_sq,
    empirical_moments,
    first_gaussian_test,
    gaussian_abs_marginal_moment,
    gaussian_dot_moment,
    gaussian_marginal_moment,
    gaussian_norm_moment,
    spherical_dot_moment,
)
from .ngca import (
    NgcaResult,
    ReweightedPCA,
    RunConfig,
    auto_beta,
    combine_bases,
    recovery_angles,
    required_sample_size_phi,
    required_sample_size_psi,
    run_reweighted_pca,
    theoretical_eigenvalue_gap,
)
from .spectral import (
    SubspaceEstimate,
    containment_angles,
    davis_kahan_bound,
    eigengap,
    orthogonal_complement,
    principal_angles,
    subspace_distance,
    threshold_subspace,
)
from .testmat import (
    Kind,
    TestMatrixReport,
    block_structure_diagnostic,
    estimate,
    estimate_phi,
    estimate_psi,
    gaussian_eigenvalue,
    gaussian_neg_log_derivative,
    gaussian_partition,
    gaussian_phi_eigenvalue,
    gaussian_psi_eigenvalue,
    trace_identity_check,
    trace_standard_error,
)

__version__ = "0.1.0"

import types as _types

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
)
