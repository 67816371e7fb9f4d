"""Gaussian reference moments, empirical moment estimates and the first test.

The first gaussian test compares a distribution with the standard gaussian
through two scalar families only: the radial moments ``E ||X||^r`` and the
pairing moments ``E <X, X'>^r`` over independent copies. Moment tensors are
never materialised; everything reduces to these scalars.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ._validation import check_positive_int, check_samples
from .exceptions import InvalidOrderError
from .model import PairedSample

__all__ = [
    "MomentReport",
    "DirectionalDeviation",
    "GaussianTestVerdict",
    "gaussian_norm_moment",
    "gaussian_abs_marginal_moment",
    "gaussian_marginal_moment",
    "gaussian_dot_moment",
    "spherical_dot_moment",
    "empirical_moments",
    "eccentricity_norm_sq",
    "first_gaussian_test",
    "directional_deviation",
]

LOW_SAMPLE_PAIRS = 100


def _check_order(r, minimum=1) -> int:
    if isinstance(r, (bool, np.bool_)) or not isinstance(r, (int, np.integer)):
        raise InvalidOrderError(f"moment order must be an integer, got {r!r}")
    if r < minimum:
        raise InvalidOrderError(f"moment order must be >= {minimum}, got {r}")
    return int(r)


def _rising_even_product(n: int, k: int) -> int:
    """n (n + 2) ... (n + 2k - 2) as an exact integer."""
    out = 1
    for j in range(k):
        out *= n + 2 * j
    return out


def _double_factorial_odd(k: int) -> int:
    """1 * 3 * ... * (2k - 1)."""
    out = 1
    for j in range(1, 2 * k, 2):
        out *= j
    return out


def gaussian_norm_moment(n: int, r: int) -> float:
    """``E ||g_n||^r`` for a standard gaussian in ``R^n``.

    Even orders use the exact product ``n (n+2) ... (n+r-2)``; odd orders use
    ``2^(r/2) Gamma((n+r)/2) / Gamma(n/2)``.
    """
    n = check_positive_int(n, "n")
    r = _check_order(r, minimum=0)
    if r % 2 == 0:
        return float(_rising_even_product(n, r // 2))
    log_value = 0.5 * r * math.log(2.0) + math.lgamma((n + r) / 2) - math.lgamma(n / 2)
    return math.exp(log_value)


def gaussian_abs_marginal_moment(r: int) -> float:
    """``gamma_r = E |<g, v>|^r`` for a unit vector ``v``."""
    r = _check_order(r)
    if r % 2 == 0:
        return float(_double_factorial_odd(r // 2))
    # (r + 1) / 2 is an integer here, so the gamma factor is a factorial
    return 2.0 ** (r / 2) * math.factorial((r - 1) // 2) / math.sqrt(math.pi)


def gaussian_marginal_moment(r: int) -> float:
    """Signed marginal moment ``E <g, v>^r``: ``(r-1)!!`` for even r, else 0."""
    r = _check_order(r, minimum=0)
    return float(_double_factorial_odd(r // 2)) if r % 2 == 0 else 0.0


def spherical_dot_moment(n: int, r: int) -> float:
    """``E <theta, v>^r`` for ``theta`` uniform on the unit sphere of ``R^n``."""
    n = check_positive_int(n, "n")
    r = _check_order(r)
    if r % 2:
        return 0.0
    k = r // 2
    return float(Fraction(_double_factorial_odd(k), _rising_even_product(n, k)))


def gaussian_dot_moment(n: int, r: int) -> float:
    """``E <g, g'>^r`` for independent standard gaussians in ``R^n``.

    For even ``r = 2k`` this equals ``(E||g||^r)^2 E<theta,theta'>^r``, which
    simplifies to the integer ``(2k-1)!! n (n+2) ... (n+2k-2)``.
    """
    n = check_positive_int(n, "n")
    r = _check_order(r)
    if r % 2:
        return 0.0
    k = r // 2
    return float(_double_factorial_odd(k) * _rising_even_product(n, k))


@dataclass(frozen=True)
class MomentReport:
    order_r: int
    norm_moment: float
    dot_moment: float
    gaussian_norm_moment: float
    gaussian_dot_moment: float
    sample_count: int
    norm_stderr: float = 0.0
    dot_stderr: float = 0.0

    @property
    def norm_deviation(self) -> float:
        return abs(self.norm_moment - self.gaussian_norm_moment)

    @property
    def dot_deviation(self) -> float:
        return abs(self.dot_moment - self.gaussian_dot_moment)


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _pair_statistics(pairs: PairedSample, r: int):
    norms = np.linalg.norm(pairs.stacked(), axis=1) ** r
    dots = np.einsum("ij,ij->i", pairs.first, pairs.second) ** r
    return norms, dots


def empirical_moments(pairs: PairedSample, r: int) -> MomentReport:
    """Plug-in estimates of ``E ||X||^r`` (all 2N points) and ``E <X,X'>^r`` (N pairs)."""
    r = _check_order(r)
    norms, dots = _pair_statistics(pairs, r)
    n = pairs.n_features
    return MomentReport(
        order_r=r,
        norm_moment=float(norms.mean()),
        dot_moment=float(dots.mean()),
        gaussian_norm_moment=gaussian_norm_moment(n, r),
        gaussian_dot_moment=gaussian_dot_moment(n, r),
        sample_count=pairs.n_pairs,
        norm_stderr=_stderr(norms),
        dot_stderr=_stderr(dots),
    )


def eccentricity_norm_sq(pairs: PairedSample, r: int) -> float:
    """Squared norm of the r-th eccentricity tensor, from scalar moments only.

    Evaluates ``E<X,X'>^r - (E||X||^r)^2 E<theta,theta'>^r`` with plug-in
    means and clamps at zero: the population value is a squared norm, but
    sampling noise can push the estimate slightly negative.
    """
    report = empirical_moments(pairs, r)
    spherical = spherical_dot_moment(pairs.n_features, report.order_r)
    value = report.dot_moment - report.norm_moment**2 * spherical
    return max(value, 0.0)


@dataclass(frozen=True, eq=False)
class DirectionalDeviation:
    """Probed lower bound on ``sup_v |E<X,v>^r - E<g,v>^r|``.

    Only the listed directions are evaluated, so ``max_abs_deviation`` is a
    lower bound on the supremum over the sphere, never the supremum itself.
    """

    order_r: int
    directions: np.ndarray
    deviations: np.ndarray
    max_abs_deviation: float
    argmax_direction: np.ndarray

    is_lower_bound = True


def _probe_directions(n: int, probe_count: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    # nested: the first m probes do not depend on probe_count
    g = rng.standard_normal((probe_count, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return np.vstack([np.eye(n), g / norms])


def directional_deviation(sample, r: int, probe_count: int = 64, seed=0) -> DirectionalDeviation:
    """Marginal moment deviation on the coordinate axes plus random directions.

    Parameters
    ----------
    sample : array-like of shape (N, n)
    r : int
        Moment order.
    probe_count : int
        Number of uniformly random unit directions added to the ``n`` axes.
        For a fixed seed, adding probes never removes earlier ones, so the
        reported maximum is nondecreasing in ``probe_count``.
    seed : int or None
    """
    X = check_samples(sample)
    r = _check_order(r)
    probe_count = check_positive_int(probe_count, "probe_count", minimum=0)
    V = _probe_directions(X.shape[1], probe_count, seed)
    projected = X @ V.T
    moments = (projected**r).mean(axis=0)
    deviations = np.abs(moments - gaussian_marginal_moment(r))
    best = int(np.argmax(deviations))
    return DirectionalDeviation(
        order_r=r,
        directions=V,
        deviations=deviations,
        max_abs_deviation=float(deviations[best]),
        argmax_direction=V[best].copy(),
    )


@dataclass(frozen=True)
class GaussianTestVerdict:
    """One row of the first gaussian test.

    ``norm_flag``/``dot_flag`` use the data-driven noise band
    (``band * standard error``). ``norm_threshold``/``dot_threshold`` are the
    theoretical lower bounds ``c eta^2 / gamma_r`` and ``c eta^2``; since
    ``eta`` comes from a probed lower bound on the deviation, they are
    conservative and reported for reference only.
    """

    order_r: int
    norm_deviation: float
    dot_deviation: float
    norm_stderr: float
    dot_stderr: float
    norm_flag: bool
    dot_flag: bool
    eta: float
    gamma: float
    c: float
    norm_threshold: float
    dot_threshold: float
    bound_met: bool
    moments: MomentReport
    low_sample: bool = False

    @property
    def nongaussian(self) -> bool:
        return self.norm_flag or self.dot_flag


def first_gaussian_test(
    pairs: PairedSample,
    r_max: int,
    *,
    c: float = 0.1,
    eta: Mapping[int, float] | Sequence[float] | None = None,
    band: float = 3.0,
    probe_count: int = 64,
    seed=0,
) -> list[GaussianTestVerdict]:
    """Compare radial and pairing moments with the gaussian ones for r = 1..r_max.

    Parameters
    ----------
    pairs : PairedSample
    r_max : int
        Largest order tested, at least 2.
    c : float
        Constant in the reported theoretical thresholds.
    eta : mapping r -> eta_r, optional
        Caller-supplied deviation scale. When absent, ``eta_r`` is
        ``min(D_r, gamma_r)`` with ``D_r`` the probed lower bound from
        :func:`directional_deviation` on all ``2N`` points.
    band : float
        Multiple of the plug-in standard error a deviation must exceed to
        set a flag.
    """
    r_max = _check_order(r_max, minimum=2)
    low = pairs.n_pairs < LOW_SAMPLE_PAIRS
    if low:
        warnings.warn(
            f"only {pairs.n_pairs} pairs; first gaussian test verdicts are unreliable "
            f"below {LOW_SAMPLE_PAIRS}",
            RuntimeWarning,
            stacklevel=2,
        )
    if eta is not None and not isinstance(eta, Mapping):
        eta = {i + 1: float(v) for i, v in enumerate(eta)}
    stacked = pairs.stacked() if eta is None else None
    verdicts = []
    for r in range(1, r_max + 1):
        report = empirical_moments(pairs, r)
        gamma = gaussian_abs_marginal_moment(r)
        if eta is None:
            d_lower = directional_deviation(stacked, r, probe_count, seed).max_abs_deviation
        else:
            d_lower = float(eta[r])
        eta_r = min(d_lower, gamma)
        norm_threshold = c * eta_r**2 / gamma
        dot_threshold = c * eta_r**2
        norm_dev, dot_dev = report.norm_deviation, report.dot_deviation
        verdicts.append(
            GaussianTestVerdict(
                order_r=r,
                norm_deviation=norm_dev,
                dot_deviation=dot_dev,
                norm_stderr=report.norm_stderr,
                dot_stderr=report.dot_stderr,
                norm_flag=bool(norm_dev > band * report.norm_stderr),
                dot_flag=bool(dot_dev > band * report.dot_stderr),
                eta=eta_r,
                gamma=gamma,
                c=c,
                norm_threshold=norm_threshold,
                dot_threshold=dot_threshold,
                bound_met=bool(norm_dev >= norm_threshold or dot_dev >= dot_threshold),
                moments=report,
                low_sample=low,
            )
        )
    return verdicts
