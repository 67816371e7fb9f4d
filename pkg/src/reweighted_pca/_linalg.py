from __future__ import annotations

import numpy as np

RESIDUAL_RTOL = 1e-10


def symmetric_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Each eigenvector is sign-normalised so that its largest-magnitude entry
    is positive (first such entry on ties), which makes reports
    reproducible across LAPACK builds.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(vals, kind="stable")[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    if vecs.size:
        pivot = np.argmax(np.abs(vecs), axis=0)
        signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
        signs[signs == 0] = 1.0
        vecs = vecs * signs
    return vals, vecs


def eigen_residual(matrix, vals, vecs) -> float:
    """Largest ``||A v - lambda v||`` relative to ``||A||_2``."""
    scale = max(np.linalg.norm(matrix, 2), np.finfo(float).tiny)
    res = matrix @ vecs - vecs * vals
    return float(np.linalg.norm(res, axis=0).max(initial=0.0) / scale)
