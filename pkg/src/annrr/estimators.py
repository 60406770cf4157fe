"""Reduced-rank regression estimators: OLS, RSC, NNP, ANN, RoRR and RoANN.

All closed-form estimators share one spectral object, the SVD of the
least-squares fitted values ``PY = X C_ls``. An estimator is then a vector
of shrinkage factors ``f`` applied in that frame::

    C_hat = C_ls V diag(f) V^T,     X C_hat = U diag(d * f) V^T

RSC uses ``f_i = 1{d_i > sqrt(2 lam)}``, ANN uses ``f_i = (d_i - lam w_i)_+ / d_i``,
and RoANN divides the ANN factors by ``1 + lam2``. RoRR runs RSC on the
ridge-augmented problem. NNP has no closed form and is solved by proximal
gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from annrr.exceptions import ContractError
from annrr.linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    pseudo_inverse,
    singular_values,
    sym_eig,
    thin_svd,
)
from annrr.thresholding import WeightVector, power_weights, soft_threshold_values

METHODS = ("ols", "rsc", "nnp", "ann", "rorr", "roann")

# eigenvalues of a Gram matrix carry ~eps * d_1^2 error, i.e. ~sqrt(eps) * d_1 in d
_EIG_ROUTE_RTOL = 1e-7


@dataclass(frozen=True)
class EstimatorConfig:
    """Method tag plus hyperparameters.

    ``lam2`` is read only by ``rorr``/``roann``; ``gamma`` and ``weights`` only by
    ``ann``/``roann``. Explicit ``weights`` switch ANN to the fixed-weight
    variant and ``gamma`` is then ignored.
    """

    method: str
    lam: float = 0.0
    lam2: float = 0.0
    gamma: float = 2.0
    weights: WeightVector | None = None
    nnp_max_iter: int = 5000
    nnp_tol: float = 1e-7
    nnp_accelerate: bool = False

    def __post_init__(self):
        method = self.method.lower()
        if method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}; choose from {METHODS}")
        object.__setattr__(self, "method", method)
        if self.lam < 0 or self.lam2 < 0 or self.gamma < 0:
            raise ContractError("lam, lam2 and gamma must be non-negative")
        if self.nnp_max_iter < 1 or self.nnp_tol <= 0:
            raise ContractError("nnp_max_iter must be >= 1 and nnp_tol > 0")
        if self.weights is not None and not isinstance(self.weights, WeightVector):
            object.__setattr__(self, "weights", WeightVector(self.weights))

    @property
    def label(self) -> str:
        if self.method in ("ann", "roann") and self.weights is None:
            g = self.gamma
            return f"{self.method}{int(g) if float(g).is_integer() else g}"
        return self.method

    @property
    def uses_lam2(self) -> bool:
        return self.method in ("rorr", "roann")

    def with_(self, **changes) -> "EstimatorConfig":
        return replace(self, **changes)

    @classmethod
    def from_label(cls, label: str, **kwargs) -> "EstimatorConfig":
        """Parse shorthand such as ``ann2``, ``roann1``, ``rsc`` or ``nnp``."""
        text = label.strip().lower()
        for base in ("roann", "ann"):
            if text.startswith(base) and text != base:
                try:
                    gamma = float(text[len(base):])
                except ValueError:
                    raise ContractError(f"cannot parse method label {label!r}") from None
                return cls(method=base, gamma=gamma, **kwargs)
        return cls(method=text, **kwargs)

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "label": self.label,
            "lambda": self.lam,
            "lambda2": self.lam2,
            "gamma": self.gamma,
            "weights": None if self.weights is None else [float(w) for w in self.weights.w],
            "nnp_max_iter": self.nnp_max_iter,
            "nnp_tol": self.nnp_tol,
            "nnp_accelerate": self.nnp_accelerate,
        }


@dataclass
class FitResult:
    """Output of every estimator.

    ``objective`` is the method's own penalized criterion evaluated at the
    returned coefficients. ``converged`` is only ever False for NNP.
    """

    method: str
    coefficients: np.ndarray
    fitted: np.ndarray
    estimated_rank: int
    singular_values_fitted: np.ndarray
    lambda_used: float
    objective: float
    lambda2_used: float | None = None
    gamma: float | None = None
    weights: np.ndarray | None = None
    iterations: int | None = None
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "method": self.method,
            "estimated_rank": int(self.estimated_rank),
            "singular_values_fitted": [float(v) for v in self.singular_values_fitted],
            "lambda_used": float(self.lambda_used),
            "lambda2_used": None if self.lambda2_used is None else float(self.lambda2_used),
            "gamma": None if self.gamma is None else float(self.gamma),
            "weights": None if self.weights is None else [float(v) for v in self.weights],
            "iterations": self.iterations,
            "converged": bool(self.converged),
            "objective": float(self.objective),
            "shape": list(self.coefficients.shape),
        }
        rec.update({k: _plain(v) for k, v in self.diagnostics.items()})
        return rec


def _plain(v):
    if isinstance(v, np.ndarray):
        return [float(t) for t in v.ravel()]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _check_xy(y, x) -> tuple[np.ndarray, np.ndarray]:
    y = as_matrix(y, "Y")
    x = as_matrix(x, "X")
    if y.shape[0] != x.shape[0]:
        raise ContractError(f"Y has {y.shape[0]} rows but X has {x.shape[0]}")
    return y, x


def _zero_small(d: np.ndarray, rtol: float) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64).copy()
    if d.size and d[0] > 0:
        d[d <= rtol * d[0]] = 0.0
    else:
        d[:] = 0.0
    return d


@dataclass(frozen=True)
class Spectrum:
    """Least-squares coefficients and the right singular frame of their fit.

    ``d`` and ``v`` are the singular values and right singular vectors of
    ``X* @ coef`` where ``X*`` is the (possibly ridge-augmented) design.
    Singular values below the rank tolerance are stored as exact zeros.
    """

    coef: np.ndarray
    d: np.ndarray
    v: np.ndarray

    def coefficients(self, factors: np.ndarray) -> np.ndarray:
        return (self.coef @ self.v * factors) @ self.v.T

    def coefficient_stack(self, factor_rows: np.ndarray) -> np.ndarray:
        """Coefficient matrices for many factor vectors at once, shape (L, p, q)."""
        b = self.coef @ self.v
        return np.einsum("ph,lh,qh->lpq", b, factor_rows, self.v, optimize=True)


def ls_spectrum(y, x, route: str = "svd", tol: Tolerances = DEFAULT_TOL) -> Spectrum:
    """LS estimator ``C_ls = (X^T X)^- X^T Y`` and the SVD frame of ``PY``.

    ``route="svd"`` takes the thin SVD of ``PY`` directly; ``route="eig"`` uses
    the eigendecomposition ``V D^2 V^T`` of ``Y^T P Y``. Both give the same
    frame; the SVD route resolves small singular values more accurately.
    """
    y, x = _check_xy(y, x)
    coef = pseudo_inverse(x, tol=tol) @ y
    py = x @ coef
    h = min(py.shape)
    if route == "svd":
        f = thin_svd(py, tol)
        return Spectrum(coef=coef, d=_zero_small(f.d, tol.rank_rtol), v=f.v)
    if route == "eig":
        vals, vecs = sym_eig(py.T @ py, tol)
        d = np.sqrt(np.maximum(vals[:h], 0.0))
        return Spectrum(coef=coef, d=_zero_small(d, max(tol.rank_rtol, _EIG_ROUTE_RTOL)), v=vecs[:, :h])
    raise ContractError(f"route must be 'svd' or 'eig', got {route!r}")


def ridge_gram_inverse(x, lam2: float, method: str = "auto") -> np.ndarray:
    """``(X^T X + lam2 I)^{-1}``, by direct solve or by the Woodbury identity.

    Woodbury: ``I/lam2 - X^T (I + X X^T / lam2)^{-1} X / lam2^2``, which only
    inverts an n x n matrix. ``method="auto"`` picks it when ``p > 2n``.
    """
    x = as_matrix(x, "X")
    if lam2 <= 0:
        raise ContractError("ridge inverse needs lam2 > 0")
    n, p = x.shape
    if method == "auto":
        method = "woodbury" if p > 2 * n else "direct"
    if method == "direct":
        return np.linalg.solve(x.T @ x + lam2 * np.eye(p), np.eye(p))
    if method == "woodbury":
        inner = np.eye(n) + (x @ x.T) / lam2
        return np.eye(p) / lam2 - x.T @ np.linalg.solve(inner, x) / lam2**2
    raise ContractError(f"unknown gram inverse method {method!r}")


def ridge_spectrum(y, x, lam2: float, gram: str = "auto", tol: Tolerances = DEFAULT_TOL) -> Spectrum:
    """Spectrum of the ridge-augmented problem ``Y* = [Y; 0]``, ``X* = [X; sqrt(lam2) I]``.

    ``C* = (X^T X + lam2 I)^{-1} X^T Y`` and ``Y*^T P* Y* = (X^T Y)^T C*`` is a
    q x q matrix whose eigendecomposition gives the frame.
    """
    y, x = _check_xy(y, x)
    xty = x.T @ y
    coef = ridge_gram_inverse(x, lam2, gram) @ xty
    gram_q = xty.T @ coef
    vals, vecs = sym_eig(0.5 * (gram_q + gram_q.T), tol)
    h = min(x.shape[1], y.shape[1])
    d = np.sqrt(np.maximum(vals[:h], 0.0))
    return Spectrum(coef=coef, d=_zero_small(d, max(tol.rank_rtol, _EIG_ROUTE_RTOL)), v=vecs[:, :h])


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def hard_factors(d: np.ndarray, lam: float) -> np.ndarray:
    """RSC shrinkage factors ``1{d_i > sqrt(2 lam)}`` (zero singular values stay zero)."""
    return ((d > math.sqrt(2.0 * lam)) & (d > 0)).astype(np.float64)


def align_weights(w: WeightVector, h: int) -> np.ndarray:
    """Pad with infinite weights or truncate so there is one weight per singular value."""
    arr = w.w
    if arr.size >= h:
        return arr[:h].copy()
    return np.concatenate([arr, np.full(h - arr.size, np.inf)])


def ann_weights(spectrum: Spectrum, gamma: float, weights: WeightVector | None, tol: Tolerances) -> np.ndarray:
    if weights is not None:
        weights.check_order(tol)
        return align_weights(weights, spectrum.d.size)
    return power_weights(spectrum.d, gamma, tol.rank_rtol).w


def adaptive_factors(d: np.ndarray, lam: float, w: np.ndarray) -> np.ndarray:
    """ANN shrinkage factors ``(d_i - lam w_i)_+ / d_i``."""
    g = soft_threshold_values(d, lam, w)
    g[d == 0] = 0.0
    return _safe_ratio(g, d)


def estimate_rank(py_singular_values, lam: float, gamma: float) -> int:
    """Rank of the power-weight ANN solution, ``max{r : d_r > lam^(1/(gamma+1))}``.

    Returns 0 when no singular value clears the threshold.
    """
    if lam < 0 or gamma < 0:
        raise ContractError("lam and gamma must be non-negative")
    d = np.asarray(py_singular_values, dtype=np.float64)
    # d_r > lam^(1/(gamma+1)) compared in the power form, exact at lam = d_r^(gamma+1)
    above = np.flatnonzero(d ** (gamma + 1.0) > lam)
    return int(above[-1] + 1) if above.size else 0


def _rss(y, fitted) -> float:
    return float(np.sum((y - fitted) ** 2))


def _result(method, y, x, coef, g, lam, objective, **kw) -> FitResult:
    return FitResult(
        method=method,
        coefficients=coef,
        fitted=x @ coef,
        estimated_rank=int(np.count_nonzero(g > 0)),
        singular_values_fitted=g,
        lambda_used=float(lam),
        objective=float(objective),
        **kw,
    )


def ols_fit(y, x, tol: Tolerances = DEFAULT_TOL) -> FitResult:
    """Minimum-norm least squares ``C = (X^T X)^- X^T Y``."""
    y, x = _check_xy(y, x)
    spectrum = ls_spectrum(y, x, tol=tol)
    fitted = x @ spectrum.coef
    return FitResult(
        method="ols",
        coefficients=spectrum.coef,
        fitted=fitted,
        estimated_rank=int(np.count_nonzero(spectrum.d)),
        singular_values_fitted=spectrum.d.copy(),
        lambda_used=0.0,
        objective=0.5 * _rss(y, fitted),
    )


def rsc_fit(y, x, lam: float, route: str = "svd", tol: Tolerances = DEFAULT_TOL) -> FitResult:
    """Rank selection criterion: minimizes ``0.5 ||Y - XC||_F^2 + lam r(C)``.

    The fit is the hard-thresholded SVD of ``PY`` at level ``sqrt(2 lam)``.
    """
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    y, x = _check_xy(y, x)
    spectrum = ls_spectrum(y, x, route=route, tol=tol)
    f = hard_factors(spectrum.d, lam)
    coef = spectrum.coefficients(f)
    g = spectrum.d * f
    res = _result("rsc", y, x, coef, g, lam, 0.0)
    res.objective = 0.5 * _rss(y, res.fitted) + lam * res.estimated_rank
    return res


def ann_objective(y, x, coef, lam: float, w: np.ndarray) -> float:
    """``0.5 ||Y - XC||_F^2 + lam * sum_i w_i d_i(XC)``; infinite weight on a nonzero d gives inf."""
    fitted = x @ coef
    d = singular_values(fitted)
    w = np.asarray(w)[: d.size]
    d = d[: w.size]
    tiny = 1e-12 * max(d[0], 1.0) if d.size else 0.0
    active = d > tiny
    pen = float(np.sum(w[active] * d[active])) if lam > 0 else 0.0
    return 0.5 * _rss(y, fitted) + lam * pen


def ann_fit(
    y,
    x,
    lam: float,
    gamma: float = 2.0,
    weights: WeightVector | Sequence[float] | None = None,
    route: str = "svd",
    tol: Tolerances = DEFAULT_TOL,
) -> FitResult:
    """Adaptive nuclear norm estimator.

    Minimizes ``0.5 ||Y - XC||_F^2 + lam * sum_i w_i d_i(XC)`` by adaptively
    soft-thresholding the SVD of ``PY``. Without explicit ``weights`` the weights
    are ``d(PY) ** -gamma``; explicit weights must be non-decreasing.
    """
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    y, x = _check_xy(y, x)
    if weights is not None and not isinstance(weights, WeightVector):
        weights = WeightVector(weights)
    spectrum = ls_spectrum(y, x, route=route, tol=tol)
    w = ann_weights(spectrum, gamma, weights, tol)
    f = adaptive_factors(spectrum.d, lam, w)
    coef = spectrum.coefficients(f)
    g = spectrum.d * f
    res = _result(
        "ann", y, x, coef, g, lam, 0.0,
        gamma=None if weights is not None else float(gamma),
        weights=w,
    )
    pen = float(np.sum(w[g > 0] * g[g > 0])) if lam > 0 else 0.0
    res.objective = 0.5 * _rss(y, res.fitted) + lam * pen
    if weights is None:
        res.diagnostics["rank_formula"] = estimate_rank(spectrum.d, lam, gamma)
    return res


def roann_fit(
    y,
    x,
    lam: float,
    lam2: float,
    gamma: float = 2.0,
    weights: WeightVector | Sequence[float] | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> FitResult:
    """ANN with an extra ridge penalty on ``d(XC)``; the solution is ANN shrunk by ``1/(1+lam2)``."""
    if lam2 < 0:
        raise ContractError("lambda2 must be non-negative")
    base = ann_fit(y, x, lam, gamma, weights, tol=tol)
    y, x = _check_xy(y, x)
    scale = 1.0 + lam2
    coef = base.coefficients / scale
    g = base.singular_values_fitted / scale
    res = _result("roann", y, x, coef, g, lam, 0.0, lambda2_used=float(lam2), gamma=base.gamma, weights=base.weights)
    w = base.weights
    pen = float(np.sum(w[g > 0] * g[g > 0])) if lam > 0 else 0.0
    res.objective = 0.5 * _rss(y, res.fitted) + lam * pen + 0.5 * lam2 * float(np.sum(g**2))
    return res


def rorr_fit(
    y, x, lam: float, lam2: float, gram: str = "auto", tol: Tolerances = DEFAULT_TOL
) -> FitResult:
    """Reduced-rank ridge regression.

    Minimizes ``0.5 ||Y - XC||_F^2 + lam r(C) + 0.5 lam2 ||C||_F^2`` as an RSC
    problem on the augmented data. ``lam2 == 0`` is exactly :func:`rsc_fit`.
    """
    if lam < 0 or lam2 < 0:
        raise ContractError("lambda and lambda2 must be non-negative")
    y, x = _check_xy(y, x)
    if lam2 == 0:
        res = rsc_fit(y, x, lam, tol=tol)
        res.method = "rorr"
        res.lambda2_used = 0.0
        return res
    spectrum = ridge_spectrum(y, x, lam2, gram, tol)
    f = hard_factors(spectrum.d, lam)
    coef = spectrum.coefficients(f)
    fitted = x @ coef
    g = _zero_small(singular_values(fitted), tol.rank_rtol)
    r = int(np.count_nonzero(f))
    objective = 0.5 * _rss(y, fitted) + lam * r + 0.5 * lam2 * float(np.sum(coef**2))
    res = FitResult(
        method="rorr",
        coefficients=coef,
        fitted=fitted,
        estimated_rank=int(np.count_nonzero(g)),
        singular_values_fitted=g,
        lambda_used=float(lam),
        objective=objective,
        lambda2_used=float(lam2),
    )
    res.diagnostics["augmented_singular_values"] = spectrum.d * f
    return res


def nnp_objective(y, x, coef, lam: float) -> float:
    return 0.5 * _rss(y, x @ coef) + lam * float(np.sum(singular_values(coef)))


def nnp_kkt_residual(y, x, coef, lam: float, tol: Tolerances = DEFAULT_TOL) -> float:
    """Distance of ``G = X^T (Y - XC)`` from ``lam * subdiff ||C||_*``.

    On the solution's singular subspaces ``U1^T G V1`` must equal ``lam I``; on
    the complement the spectral norm of the projected ``G`` must not exceed
    ``lam``. Returns the larger violation.
    """
    g = x.T @ (y - x @ coef)
    f = thin_svd(coef, tol)
    r = int(np.count_nonzero(f.d > 1e-9 * max(f.d[0], 1e-300))) if f.d.size and f.d[0] > 0 else 0
    u1, v1 = f.u[:, :r], f.v[:, :r]
    on = 0.0
    if r:
        on = float(np.max(np.abs(u1.T @ g @ v1 - lam * np.eye(r))))
    off_mat = g - u1 @ (u1.T @ g)
    off_mat = off_mat - (off_mat @ v1) @ v1.T
    off = max(0.0, float(singular_values(off_mat)[0]) - lam) if off_mat.size else 0.0
    return max(on, off)


def nnp_fit(
    y,
    x,
    lam: float,
    max_iter: int = 5000,
    tol: float = 1e-7,
    accelerate: bool = False,
    init: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOL,
) -> FitResult:
    """Nuclear-norm penalized least squares ``0.5 ||Y - XC||_F^2 + lam ||C||_*``.

    Proximal gradient with fixed step ``1 / d_1(X)^2``; each step soft-thresholds
    the SVD of the gradient update. Stops when the relative objective change
    drops below ``tol`` and the gradient-mapping bound on the optimality
    residual is at most ``10 * tol * lam``; otherwise returns after ``max_iter``
    steps with ``converged=False``. ``accelerate`` switches on Nesterov momentum.
    """
    if lam < 0:
        raise ContractError("lambda must be non-negative")
    y, x = _check_xy(y, x)
    p, q = x.shape[1], y.shape[1]
    step_l = float(singular_values(x)[0]) ** 2
    c = np.zeros((p, q)) if init is None else np.array(init, dtype=np.float64)
    if step_l == 0.0:
        c = np.zeros((p, q))
        obj = nnp_objective(y, x, c, lam)
        res = _result("nnp", y, x, c, np.zeros(min(p, q)), lam, obj, iterations=0)
        return res
    xty = x.T @ y
    xtx = x.T @ x
    kkt_scale = lam if lam > 0 else float(singular_values(xty)[0])
    obj = nnp_objective(y, x, c, lam)
    z = c
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z_prev = z
        grad = xtx @ z - xty
        f = thin_svd(z - grad / step_l, tolerances)
        c_new = f.reconstruct(np.maximum(f.d - lam / step_l, 0.0))
        obj_new = 0.5 * _rss(y, x @ c_new) + lam * float(np.sum(np.maximum(f.d - lam / step_l, 0.0)))
        if accelerate:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            # restart momentum when the objective goes up
            if obj_new > obj:
                z, t_new = c_new, 1.0
            else:
                z = c_new + ((t - 1.0) / t_new) * (c_new - c)
            t = t_new
        else:
            z = c_new
        change = abs(obj - obj_new) / max(abs(obj), np.finfo(float).tiny)
        # 2 L ||C_new - Z||_2 bounds the distance of -grad(C_new) from lam * subdiff
        certificate = 2.0 * step_l * float(singular_values(c_new - z_prev)[0])
        c, obj = c_new, obj_new
        if change < tol and certificate <= 10.0 * tol * kkt_scale:
            converged = True
            break
    g = _zero_small(singular_values(x @ c), tolerances.rank_rtol)
    res = FitResult(
        method="nnp",
        coefficients=c,
        fitted=x @ c,
        estimated_rank=int(np.count_nonzero(g)),
        singular_values_fitted=g,
        lambda_used=float(lam),
        objective=nnp_objective(y, x, c, lam),
        iterations=it,
        converged=converged,
    )
    return res


def fit(y, x, config: EstimatorConfig, tol: Tolerances = DEFAULT_TOL) -> FitResult:
    """Dispatch on ``config.method``."""
    m = config.method
    if m == "ols":
        return ols_fit(y, x, tol)
    if m == "rsc":
        return rsc_fit(y, x, config.lam, tol=tol)
    if m == "ann":
        return ann_fit(y, x, config.lam, config.gamma, config.weights, tol=tol)
    if m == "roann":
        return roann_fit(y, x, config.lam, config.lam2, config.gamma, config.weights, tol)
    if m == "rorr":
        return rorr_fit(y, x, config.lam, config.lam2, tol=tol)
    return nnp_fit(
        y, x, config.lam, config.nnp_max_iter, config.nnp_tol, config.nnp_accelerate, tolerances=tol
    )


def _method_spectrum(y, x, config: EstimatorConfig, tol: Tolerances) -> Spectrum:
    if config.method == "rorr" and config.lam2 > 0:
        return ridge_spectrum(y, x, config.lam2, tol=tol)
    return ls_spectrum(y, x, tol=tol)


def lambda_max(y, x, config: EstimatorConfig, tol: Tolerances = DEFAULT_TOL) -> float:
    """Smallest penalty level at which the method returns the zero matrix.

    ANN with power weights: ``d_1(PY) ** (gamma + 1)``; RSC/RoRR: ``d_1^2 / 2``;
    NNP: ``d_1(X^T Y)``. Returns 1.0 for OLS and for an all-zero fit so that a
    grid can still be built.
    """
    y, x = _check_xy(y, x)
    m = config.method
    if m == "ols":
        return 1.0
    if m == "nnp":
        val = float(singular_values(x.T @ y)[0])
        return val if val > 0 else 1.0
    spectrum = _method_spectrum(y, x, config, tol)
    d1 = float(spectrum.d[0]) if spectrum.d.size else 0.0
    if d1 == 0.0:
        return 1.0
    if m in ("rsc", "rorr"):
        return 0.5 * d1 * d1
    w = ann_weights(spectrum, config.gamma, config.weights, tol)
    pos = (spectrum.d > 0) & (w > 0) & np.isfinite(w)
    if not np.any(pos):
        return 1.0
    return float(np.max(spectrum.d[pos] / w[pos]))


def coefficient_path(
    y, x, config: EstimatorConfig, lambdas: Sequence[float], tol: Tolerances = DEFAULT_TOL
) -> np.ndarray:
    """Coefficient matrices for every ``lam`` in ``lambdas``, shape (L, p, q).

    Closed-form methods reuse one spectral decomposition for the whole path;
    NNP is solved from the largest ``lam`` down with warm starts.
    """
    y, x = _check_xy(y, x)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    m = config.method
    if m == "nnp":
        out = np.empty((lambdas.size, x.shape[1], y.shape[1]))
        init = None
        for i in np.argsort(-lambdas, kind="stable"):
            res = nnp_fit(
                y, x, float(lambdas[i]), config.nnp_max_iter, config.nnp_tol,
                config.nnp_accelerate, init=init, tolerances=tol,
            )
            out[i] = res.coefficients
            init = res.coefficients
        return out
    spectrum = _method_spectrum(y, x, config, tol)
    if m == "ols":
        return np.broadcast_to(spectrum.coef, (lambdas.size,) + spectrum.coef.shape).copy()
    if m in ("rsc", "rorr"):
        rows = np.array([hard_factors(spectrum.d, lam) for lam in lambdas])
    else:
        w = ann_weights(spectrum, config.gamma, config.weights, tol)
        rows = np.array([adaptive_factors(spectrum.d, lam, w) for lam in lambdas])
        if m == "roann":
            rows = rows / (1.0 + config.lam2)
    return spectrum.coefficient_stack(rows.reshape(lambdas.size, spectrum.d.size))
