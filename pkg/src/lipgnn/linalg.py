"""Dense symmetric eigendecomposition and thin SVD with checked contracts.

Matrices are plain float64 ``numpy`` arrays. The default backend is LAPACK
(through numpy); a cyclic Jacobi solver is kept as an independent route for
cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_RTOL = 1e-12
JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class ThinSVD:
    """Factorization ``A = U diag(s) V^T``.

    ``right_vectors`` holds V itself (columns), not its transpose.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def check_symmetric(s: np.ndarray, name: str = "matrix") -> None:
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"{name} must be square, got shape {s.shape}")
    scale = max(1.0, float(np.linalg.norm(s)))
    asym = float(np.linalg.norm(s - s.T))
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(
            f"{name} is not symmetric: ||S - S^T||_F = {asym:.3e} exceeds "
            f"{SYMMETRY_RTOL:g} * {scale:.3e}"
        )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive, for determinism.
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def jacobi_eigh(s: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int | None = None):
    """Cyclic Jacobi eigenvalue iteration for a symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius mass falls below
    ``tol * ||S||_F`` or after ``100 * n`` sweeps.

    Returns:
        (eigenvalues, eigenvectors), unsorted.
    """
    a = np.array(s, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if max_sweeps is None:
        max_sweeps = 100 * max(n, 1)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - sn * aq
                a[:, q] = sn * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - sn * aq
                a[q, :] = sn * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    return np.diag(a).copy(), v


def symmetric_eig(s, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix.

    Args:
        s: square symmetric matrix.
        method: ``"lapack"`` (default) or ``"jacobi"``.

    Returns:
        EigenDecomposition with ascending eigenvalues.

    Raises:
        ValueError: if ``s`` is not square, not finite, or not symmetric.
    """
    m = as_matrix(s, "shift operator")
    check_symmetric(m, "shift operator")
    if method == "lapack":
        w, v = np.linalg.eigh(m)
    elif method == "jacobi":
        w, v = jacobi_eigh(m)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], _fix_signs(v[:, order]))


def thin_svd(a) -> ThinSVD:
    """Thin SVD of a tall or square matrix, singular values descending.

    Raises:
        ValueError: for wide input. A Vandermonde matrix with more taps than
            sample points has no useful thin SVD here.
    """
    m = as_matrix(a, "matrix")
    rows, cols = m.shape
    if rows < cols:
        raise ValueError(
            f"thin_svd needs rows >= cols, got {rows}x{cols}; "
            "use fewer taps or more eigenvalue samples"
        )
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    v = vt.T
    # Sign convention on V, mirrored on U.
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(cols)])
    signs[signs == 0] = 1.0
    return ThinSVD(u * signs, s, v * signs)
