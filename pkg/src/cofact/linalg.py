"""Small numerical linear algebra helpers shared by the solvers."""

from __future__ import annotations

import numpy as np


def orth_gaussian(rng: np.random.Generator, n: int, r: int) -> np.ndarray:
    """Orthonormal n-by-r frame from a seeded Gaussian draw.

    QR with the R diagonal forced nonnegative, so the result is a
    deterministic function of the generator state.
    """
    A = rng.standard_normal((n, r))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def thin_svd(B: np.ndarray, clip_rel: float = 1e-14):
    """Thin SVD with nonincreasing singular values and canonical signs.

    Singular values below ``clip_rel * sigma_max`` are clamped to exactly
    zero so downstream diagonal factors stay sparse.  Each left singular
    vector is oriented so its largest-magnitude entry is positive (the
    matching right vector is flipped too), which removes the per-column sign
    ambiguity of LAPACK outputs.
    Returns (P, sigma, Q) with ``B = P @ diag(sigma) @ Q.T``.
    """
    P, sigma, Qt = np.linalg.svd(B, full_matrices=False)
    Q = Qt.T
    if sigma.size and sigma[0] > 0:
        sigma = np.where(sigma < clip_rel * sigma[0], 0.0, sigma)
    for i in range(P.shape[1]):
        j = np.argmax(np.abs(P[:, i]))
        if P[j, i] < 0:
            P[:, i] = -P[:, i]
            Q[:, i] = -Q[:, i]
    return P, sigma, Q


def frob_prod(A: np.ndarray, B: np.ndarray) -> float:
    """||A @ B.T||_F computed from the r-by-r Gram matrices."""
    val = np.sum((A.T @ A) * (B.T @ B))
    return float(np.sqrt(max(val, 0.0)))


def frob_prod_diff(A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray) -> float:
    """||A @ B.T - C @ D.T||_F via r-by-r Gram algebra (no n-by-m product).

    Cancellation caps the accuracy near zero at about
    1e-8 * ||A B^T||; fine for step norms, not for identity checks.
    """
    val = (
        np.sum((A.T @ A) * (B.T @ B))
        - 2.0 * np.sum((A.T @ C) * (B.T @ D))
        + np.sum((C.T @ C) * (D.T @ D))
    )
    return float(np.sqrt(max(val, 0.0)))


def colspace_basis(B: np.ndarray, rank_rel: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of col(B) with rank cutoff ``rank_rel * sigma_max``."""
    if B.size == 0 or not np.any(B):
        return np.zeros((B.shape[0], 0))
    P, sigma, _ = np.linalg.svd(B, full_matrices=False)
    keep = sigma > rank_rel * sigma[0]
    return P[:, keep]


def colspace_gap(A: np.ndarray, B: np.ndarray, rank_rel: float = 1e-12) -> float:
    """||(I - proj_col(B)) A||_F; zero iff col(A) is contained in col(B)."""
    Q = colspace_basis(B, rank_rel)
    resid = A - Q @ (Q.T @ A)
    return float(np.linalg.norm(resid))


def nonzero_columns(W: np.ndarray, rel: float = 1e-10) -> np.ndarray:
    """Boolean mask of columns with norm above ``rel * max column norm``."""
    norms = np.linalg.norm(W, axis=0)
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        return np.zeros(W.shape[1], dtype=bool)
    return norms > rel * top


def column_rank(W: np.ndarray, rel: float = 1e-10) -> int:
    """Number of nonzero columns under the relative norm threshold."""
    return int(np.count_nonzero(nonzero_columns(W, rel)))
