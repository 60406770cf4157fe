"""Hard, soft and adaptive soft SVD-thresholding, and the adaptive nuclear norm.

Infinite weights (from zero reference singular values) are stored as
``numpy.inf``. For any positive penalty level they force the matching
singular value of the solution to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from annrr.exceptions import ContractError, WeightOrderError
from annrr.linalg import DEFAULT_TOL, SvdFactorization, Tolerances, singular_values, thin_svd


@dataclass(frozen=True)
class WeightVector:
    """Non-negative penalty weights, one per singular value.

    Attributes
    ----------
    w : ndarray
        Weights; ``inf`` marks a singular value that must be thresholded to zero.
    gamma : float or None
        Power used when the weights are ``d(reference) ** -gamma``; ``None`` for
        user-supplied weights.
    """

    w: np.ndarray
    gamma: float | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise ContractError("weights must be non-negative numbers")
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return self.w.size

    @property
    def infinite(self) -> np.ndarray:
        return np.isinf(self.w)

    def check_order(self, tol: Tolerances = DEFAULT_TOL) -> None:
        """Raise WeightOrderError unless ``w_1 <= w_2 <= ... <= w_h``."""
        w = self.w
        if w.size < 2:
            return
        prev, nxt = w[:-1], w[1:]
        slack = tol.weight_order_atol * np.maximum(1.0, np.where(np.isinf(prev), 0.0, np.abs(prev)))
        with np.errstate(invalid="ignore"):
            bad = ~((nxt >= prev - slack) | np.isinf(nxt))
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise WeightOrderError(
                f"weights must be non-decreasing; w[{k}]={float(w[k])!r} > w[{k + 1}]={float(w[k + 1])!r}"
            )


def _as_weights(w) -> WeightVector:
    return w if isinstance(w, WeightVector) else WeightVector(np.asarray(w, dtype=np.float64))


def soft_threshold_values(d: np.ndarray, lam: float, w) -> np.ndarray:
    """``(d_i - lam * w_i)_+`` with infinite weights mapped to zero when ``lam > 0``."""
    d = np.asarray(d, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if lam == 0:
        return d.copy()
    with np.errstate(invalid="ignore"):
        g = d - lam * w
    g[np.isinf(w)] = 0.0
    return np.maximum(g, 0.0)


def _svd(y, tol):
    return y if isinstance(y, SvdFactorization) else thin_svd(y, tol)


def hsvt(y, lam: float, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Hard SVD-thresholding: keep ``d_i`` only where ``d_i > lam`` (strict)."""
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    f = _svd(y, tol)
    return f.reconstruct(np.where(f.d > lam, f.d, 0.0))


def ssvt(y, lam: float, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Soft SVD-thresholding: ``U diag((d_i - lam)_+) V^T``."""
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    f = _svd(y, tol)
    return f.reconstruct(np.maximum(f.d - lam, 0.0))


def asvt(y, lam: float, w, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Adaptive soft SVD-thresholding ``U diag((d_i - lam w_i)_+) V^T``.

    This is the global minimizer of ``0.5 ||Y - C||_F^2 + lam * sum_i w_i d_i(C)``
    whenever the weights are non-decreasing, which is enforced here.
    """
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    wv = _as_weights(w)
    f = _svd(y, tol)
    if len(wv) != f.d.size:
        raise ContractError(f"need {f.d.size} weights, got {len(wv)}")
    wv.check_order(tol)
    return f.reconstruct(soft_threshold_values(f.d, lam, wv.w))


def adaptive_nuclear_norm(c, w) -> float:
    """``sum_i w_i d_i(c)``; terms with a zero singular value contribute nothing."""
    wv = _as_weights(w)
    d = singular_values(c)
    if len(wv) != d.size:
        raise ContractError(f"need {d.size} weights, got {len(wv)}")
    active = d > 0
    return float(np.sum(wv.w[active] * d[active]))


def power_weights(d, gamma: float, rank_rtol: float = DEFAULT_TOL.rank_rtol) -> WeightVector:
    """Weights ``d_i ** -gamma`` from non-increasing singular values ``d``.

    Values at or below ``rank_rtol * d_1`` are treated as exact zeros and get
    an infinite weight. ``gamma == 0`` gives unit weights throughout.
    """
    if gamma < 0:
        raise ContractError("gamma must be non-negative")
    d = np.asarray(d, dtype=np.float64)
    if gamma == 0:
        return WeightVector(np.ones_like(d), gamma=0.0)
    d1 = d[0] if d.size else 0.0
    zero = d <= rank_rtol * d1
    w = np.full_like(d, np.inf)
    w[~zero] = d[~zero] ** (-gamma)
    return WeightVector(w, gamma=float(gamma))


def adaptive_weights(reference, gamma: float, tol: Tolerances = DEFAULT_TOL) -> WeightVector:
    """Power weights ``d(reference) ** -gamma``; order is non-decreasing by construction."""
    return power_weights(singular_values(reference), gamma, tol.rank_rtol)
