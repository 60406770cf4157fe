"""Dense matrix kernels: thin SVD, symmetric eigendecomposition, pseudo-inverse, projectors.

Matrices are plain 2-D ``numpy.ndarray`` of float64. Every public function
rejects non-finite input with :class:`~annrr.exceptions.ContractError`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from annrr.exceptions import ContractError, NumericalError


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by all modules.

    Parameters
    ----------
    svd_rtol : float
        Relative Frobenius reconstruction error accepted from the SVD kernel.
    sym_rtol : float
        Relative asymmetry ``||M - M^T||_F / ||M||_F`` accepted by :func:`sym_eig`.
    pinv_rtol : float
        Singular values below ``pinv_rtol * d_1`` are inverted to zero.
    rank_rtol : float
        Singular values above ``rank_rtol * d_1`` count towards the rank.
    weight_order_atol : float
        Slack allowed when validating non-decreasing weights.
    """

    svd_rtol: float = 1e-10
    sym_rtol: float = 1e-8
    pinv_rtol: float = 1e-12
    rank_rtol: float = 1e-10
    weight_order_atol: float = 1e-12

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT_TOL = Tolerances()


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array, raising ContractError otherwise."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ContractError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{name} contains NaN or Inf entries")
    return a


def _canonical_signs(u: np.ndarray) -> np.ndarray:
    """Sign per column that makes the first non-negligible entry positive."""
    signs = np.ones(u.shape[1])
    for j in range(u.shape[1]):
        col = u[:, j]
        scale = np.max(np.abs(col)) if col.size else 0.0
        if scale == 0.0:
            continue
        idx = np.flatnonzero(np.abs(col) > 1e-8 * scale)[0]
        if col[idx] < 0:
            signs[j] = -1.0
    return signs


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD ``m = u @ diag(d) @ v.T`` with ``d`` non-increasing."""

    u: np.ndarray
    d: np.ndarray
    v: np.ndarray

    def reconstruct(self, d: np.ndarray | None = None) -> np.ndarray:
        """Rebuild the matrix, optionally with replacement singular values."""
        dd = self.d if d is None else np.asarray(d, dtype=np.float64)
        return (self.u * dd) @ self.v.T

    @property
    def rank_count(self) -> int:
        return int(np.count_nonzero(self.d))


def thin_svd(m, tol: Tolerances = DEFAULT_TOL) -> SvdFactorization:
    """Thin SVD with canonical singular-vector signs.

    Backed by LAPACK ``gesdd`` through numpy. The first non-negligible entry of
    every left singular vector is made positive (the paired right vector is
    flipped with it) so repeated calls are bit-reproducible.

    Raises
    ------
    NumericalError
        If the LAPACK kernel fails to converge or the reconstruction check fails.
    """
    a = as_matrix(m)
    try:
        u, d, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        try:
            import scipy.linalg

            u, d, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError):
            raise NumericalError(f"SVD did not converge: {exc}") from exc
    signs = _canonical_signs(u)
    u = u * signs
    v = vt.T * signs
    d = np.maximum(d, 0.0)
    norm = np.linalg.norm(a)
    if norm > 0:
        err = np.linalg.norm(a - (u * d) @ v.T)
        # LAPACK accuracy is ~ eps * sqrt(size); allow for that on tiny tolerances
        limit = max(tol.svd_rtol, 1e3 * np.finfo(float).eps * np.sqrt(a.size)) * norm
        if err > limit:
            raise NumericalError(f"SVD reconstruction error {err:.3e} exceeds {limit:.3e}")
    return SvdFactorization(u=u, d=d, v=v)


def singular_values(m) -> np.ndarray:
    """Singular values only, non-increasing.

    Uses the same LAPACK call as :func:`thin_svd` (vectors included) so that a
    threshold set to a singular value reported here compares exactly equal to
    the value seen by the thresholding operators.
    """
    a = as_matrix(m)
    try:
        _, d, _ = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return np.maximum(d, 0.0)


def sym_eig(m, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues non-increasing.

    Returns
    -------
    eigenvalues : ndarray of shape (k,)
    eigenvectors : ndarray of shape (k, k)
        Orthonormal columns with canonical signs.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ContractError(f"sym_eig needs a square matrix, got {a.shape}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > tol.sym_rtol * max(scale, np.finfo(float).tiny):
        raise ContractError("sym_eig input is not symmetric")
    try:
        vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    vecs = vecs * _canonical_signs(vecs)
    return vals, vecs


def pseudo_inverse(m, rel_tol: float | None = None, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``rel_tol * d_1`` are treated as zero."""
    rel_tol = tol.pinv_rtol if rel_tol is None else rel_tol
    if not 0 < rel_tol < 1:
        raise ContractError("rel_tol must lie in (0, 1)")
    f = thin_svd(m, tol)
    if f.d.size == 0 or f.d[0] == 0.0:
        return np.zeros((f.v.shape[0], f.u.shape[0]))
    keep = f.d > rel_tol * f.d[0]
    inv_d = np.zeros_like(f.d)
    inv_d[keep] = 1.0 / f.d[keep]
    return (f.v * inv_d) @ f.u.T


def matrix_rank(m, rel_tol: float | None = None, tol: Tolerances = DEFAULT_TOL) -> int:
    """Number of singular values above ``rel_tol * d_1`` (0 for the zero matrix)."""
    rel_tol = tol.rank_rtol if rel_tol is None else rel_tol
    d = singular_values(m)
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.count_nonzero(d > rel_tol * d[0]))


def projector(x, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector ``X (X^T X)^- X^T`` onto the column space of ``x``.

    Computed as ``U_r U_r^T`` from the thin SVD, which is the same matrix and
    avoids squaring the condition number.
    """
    f = thin_svd(x, tol)
    r = _numerical_rank(f.d, tol.rank_rtol)
    ur = f.u[:, :r]
    return ur @ ur.T


def _numerical_rank(d: np.ndarray, rel_tol: float) -> int:
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.count_nonzero(d > rel_tol * d[0]))
