"""Penalty selection: log-spaced grids, K-fold cross-validation, oracle tuning.

Both selectors search in two stages. Stage 1 scans a log-equispaced grid; stage 2
rescans the bracket spanned by the stage-1 winner's two grid neighbours. For
methods with a ridge term the second penalty is chosen from a small fixed grid.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from annrr.estimators import EstimatorConfig, coefficient_path, lambda_max
from annrr.exceptions import ContractError, NumericalError
from annrr.linalg import as_matrix

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 100
DEFAULT_MIN_RATIO = 1e-4
DEFAULT_LAMBDA2_GRID = (0.0, 0.01, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class LambdaGrid:
    """Ascending penalty values; ``stage`` is 1 for the coarse scan, 2 for the refinement."""

    values: np.ndarray
    stage: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size == 0:
            raise ContractError("grid must not be empty")
        if np.any(v < 0) or np.any(np.diff(v) <= 0):
            raise ContractError("grid values must be non-negative and strictly increasing")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def build_grid(
    lambda_max: float, size: int = DEFAULT_GRID_SIZE, lambda_min_ratio: float = DEFAULT_MIN_RATIO
) -> LambdaGrid:
    """``size`` values from ``lambda_max * lambda_min_ratio`` up to ``lambda_max``, log-equispaced."""
    if not lambda_max > 0:
        raise ContractError("lambda_max must be positive")
    if size < 2:
        raise ContractError("grid size must be at least 2")
    if not 0 < lambda_min_ratio < 1:
        raise ContractError("lambda_min_ratio must lie in (0, 1)")
    expo = (size - 1 - np.arange(size)) / (size - 1)
    return LambdaGrid(lambda_max * lambda_min_ratio**expo, stage=1)


def refine_grid(grid: LambdaGrid, winner: int, size: int = DEFAULT_GRID_SIZE) -> LambdaGrid:
    """Stage-2 grid over ``[grid[winner-1], grid[winner+1]]`` (clamped to the grid ends).

    The stage-1 winner itself is always included so refinement cannot do worse.
    """
    v = grid.values
    lo = v[max(winner - 1, 0)]
    hi = v[min(winner + 1, v.size - 1)]
    if lo == hi:
        return LambdaGrid(np.array([v[winner]]), stage=2)
    if lo > 0:
        pts = np.geomspace(lo, hi, size)
    else:
        pts = np.linspace(lo, hi, size)
    pts = np.union1d(pts, [v[winner]])
    return LambdaGrid(pts, stage=2)


def _argmin_prefer_large(errors: np.ndarray) -> int:
    """Index of the minimum; ties go to the largest index (largest penalty)."""
    finite = np.where(np.isfinite(errors), errors, np.inf)
    best = np.min(finite)
    if not np.isfinite(best):
        raise NumericalError("no valid error in the grid")
    return int(np.flatnonzero(finite == best)[-1])


def fold_assignment(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Split ``range(n)`` into ``k`` folds by a Philox-seeded shuffle; sizes differ by at most 1."""
    if k < 2 or k > n:
        raise ContractError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.Generator(np.random.Philox(seed)).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def prediction_errors(coefs: np.ndarray, x_eval: np.ndarray, target: np.ndarray) -> np.ndarray:
    """``||target - x_eval @ C_l||_F^2 / target.size`` for each stacked ``C_l``."""
    preds = np.matmul(x_eval, coefs)
    return np.sum((target - preds) ** 2, axis=(1, 2)) / target.size


@dataclass
class CvReport:
    """Cross-validation outcome.

    ``cv_errors`` belong to the stage-1 ``grid``; ``stage2_errors`` to
    ``stage2_grid``. Errors are mean squared held-out prediction errors;
    ``cve`` divides the best one by the null-model error (zero coefficients).
    """

    method: str
    grid: LambdaGrid
    cv_errors: np.ndarray
    best_lambda: float
    best_error: float
    fold_count: int
    fold_assignment_seed: int
    null_error: float
    stage2_grid: LambdaGrid | None = None
    stage2_errors: np.ndarray | None = None
    best_lambda2: float | None = None
    lambda2_summary: list = field(default_factory=list)
    invalid_cells: int = 0
    warnings: list = field(default_factory=list)

    @property
    def cve(self) -> float:
        return self.best_error / self.null_error if self.null_error > 0 else float("nan")

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "fold_count": self.fold_count,
            "fold_assignment_seed": self.fold_assignment_seed,
            "grid": [float(v) for v in self.grid.values],
            "cv_errors": [_num(v) for v in self.cv_errors],
            "stage2_grid": None if self.stage2_grid is None else [float(v) for v in self.stage2_grid.values],
            "stage2_errors": None if self.stage2_errors is None else [_num(v) for v in self.stage2_errors],
            "best_lambda": float(self.best_lambda),
            "best_lambda2": None if self.best_lambda2 is None else float(self.best_lambda2),
            "best_error": float(self.best_error),
            "null_error": float(self.null_error),
            "cve": _num(self.cve),
            "lambda2_summary": self.lambda2_summary,
            "invalid_cells": self.invalid_cells,
            "warnings": list(self.warnings),
        }


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _lambda2_values(config: EstimatorConfig, lambda2_grid) -> list[float]:
    if not config.uses_lam2:
        return [config.lam2]
    return [float(v) for v in (DEFAULT_LAMBDA2_GRID if lambda2_grid is None else lambda2_grid)]


def _stage1_grid(y, x, config, lambdas, grid_size, ratio) -> LambdaGrid:
    if lambdas is not None:
        return LambdaGrid(np.asarray(lambdas, dtype=np.float64))
    if config.method == "ols":
        return LambdaGrid(np.array([0.0]))
    return build_grid(lambda_max(y, x, config), grid_size, ratio)


class _FoldEvaluator:
    """Held-out errors of one method on fixed folds, for any list of penalties."""

    def __init__(self, y, x, config, folds, threads):
        self.y, self.x, self.config = y, x, config
        self.folds = folds
        self.threads = threads
        self.invalid = 0
        self.warnings: list[str] = []

    def _one_fold(self, test, lambdas):
        train = np.setdiff1d(np.arange(self.y.shape[0]), test)
        try:
            coefs = coefficient_path(self.y[train], self.x[train], self.config, lambdas)
            errs = prediction_errors(coefs, self.x[test], self.y[test])
        except (NumericalError, np.linalg.LinAlgError, ContractError) as exc:
            return np.full(len(lambdas), np.nan), str(exc)
        bad = ~np.isfinite(errs)
        errs[bad] = np.nan
        return errs, None

    def errors(self, lambdas: np.ndarray) -> np.ndarray:
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                out = list(pool.map(lambda t: self._one_fold(t, lambdas), self.folds))
        else:
            out = [self._one_fold(t, lambdas) for t in self.folds]
        table = np.vstack([e for e, _ in out])
        for k, (_, msg) in enumerate(out):
            if msg is not None:
                self.warnings.append(f"fold {k}: degenerate training fit ({msg})")
        n_bad = int(np.count_nonzero(np.isnan(table)))
        if n_bad:
            self.invalid += n_bad
            logger.warning("%d invalid (lambda, fold) cells excluded", n_bad)
        with np.errstate(invalid="ignore"):
            valid = ~np.isnan(table)
            counts = valid.sum(axis=0)
            sums = np.where(valid, table, 0.0).sum(axis=0)
            return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def cross_validate(
    y,
    x,
    config: EstimatorConfig,
    k: int = 10,
    seed: int = 0,
    grid_size: int = DEFAULT_GRID_SIZE,
    lambda_min_ratio: float = DEFAULT_MIN_RATIO,
    lambdas: Sequence[float] | None = None,
    lambda2_grid: Sequence[float] | None = None,
    refine: bool = True,
    threads: int = 1,
) -> CvReport:
    """Two-stage K-fold cross-validation of the penalty level.

    Folds are fixed across the whole grid. Each (lambda, fold) cell fits on the
    training rows and scores ``||Y_test - X_test C||_F^2 / (n_test q)``; the
    per-lambda error is the mean over folds. Ties go to the larger lambda.
    """
    y = as_matrix(y, "Y")
    x = as_matrix(x, "X")
    if y.shape[0] != x.shape[0]:
        raise ContractError("Y and X need the same number of rows")
    folds = fold_assignment(y.shape[0], k, seed)
    null_error = float(np.mean([np.sum(y[t] ** 2) / y[t].size for t in folds]))

    candidates = []
    for lam2 in _lambda2_values(config, lambda2_grid):
        cfg = config.with_(lam2=lam2)
        ev = _FoldEvaluator(y, x, cfg, folds, threads)
        grid = _stage1_grid(y, x, cfg, lambdas, grid_size, lambda_min_ratio)
        errs = ev.errors(grid.values)
        win = _argmin_prefer_large(errs)
        best_lam, best_err = float(grid.values[win]), float(errs[win])
        g2 = e2 = None
        if refine and len(grid) > 1:
            g2 = refine_grid(grid, win, grid_size)
            e2 = ev.errors(g2.values)
            w2 = _argmin_prefer_large(e2)
            if e2[w2] <= best_err:
                best_lam, best_err = float(g2.values[w2]), float(e2[w2])
        candidates.append((best_err, lam2, best_lam, grid, errs, g2, e2, ev))

    summary = [{"lambda2": c[1], "best_lambda": c[2], "best_error": c[0]} for c in candidates]
    errs2 = np.array([c[0] for c in candidates])
    pick = candidates[_argmin_prefer_large(errs2)]
    best_err, lam2, best_lam, grid, errs, g2, e2, ev = pick
    return CvReport(
        method=config.label,
        grid=grid,
        cv_errors=errs,
        best_lambda=best_lam,
        best_error=best_err,
        fold_count=k,
        fold_assignment_seed=seed,
        null_error=null_error,
        stage2_grid=g2,
        stage2_errors=e2,
        best_lambda2=lam2 if config.uses_lam2 else None,
        lambda2_summary=summary if config.uses_lam2 else [],
        invalid_cells=sum(c[7].invalid for c in candidates),
        warnings=[w for c in candidates for w in c[7].warnings],
    )


@dataclass(frozen=True)
class TuneResult:
    """Penalty chosen on a validation set and its validation error."""

    best_lambda: float
    valid_error: float
    best_lambda2: float | None = None


def oracle_tune(
    y,
    x,
    config: EstimatorConfig,
    y_valid,
    x_valid,
    c_true: np.ndarray | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
    lambda_min_ratio: float = DEFAULT_MIN_RATIO,
    lambdas: Sequence[float] | None = None,
    lambda2_grid: Sequence[float] | None = None,
    refine: bool = True,
) -> TuneResult:
    """Pick the penalty that predicts a large independent validation set best.

    With the true coefficients the score is ``||X_v C_true - X_v C_hat||_F^2``
    (noise-free prediction error); otherwise ``||Y_v - X_v C_hat||_F^2``. Both are
    divided by ``n_v * q``. Two-stage search as in :func:`cross_validate`.
    """
    y = as_matrix(y, "Y")
    x = as_matrix(x, "X")
    x_valid = as_matrix(x_valid, "X_valid")
    if x_valid.shape[1] != x.shape[1]:
        raise ContractError("validation design has the wrong number of columns")
    target = x_valid @ c_true if c_true is not None else as_matrix(y_valid, "Y_valid")
    if target.shape != (x_valid.shape[0], y.shape[1]):
        raise ContractError("validation response has the wrong shape")

    best = None
    for lam2 in _lambda2_values(config, lambda2_grid):
        cfg = config.with_(lam2=lam2)
        grid = _stage1_grid(y, x, cfg, lambdas, grid_size, lambda_min_ratio)

        def score(vals, cfg=cfg):
            return prediction_errors(coefficient_path(y, x, cfg, vals), x_valid, target)

        errs = score(grid.values)
        win = _argmin_prefer_large(errs)
        lam, err = float(grid.values[win]), float(errs[win])
        if refine and len(grid) > 1:
            g2 = refine_grid(grid, win, grid_size)
            e2 = score(g2.values)
            w2 = _argmin_prefer_large(e2)
            if e2[w2] <= err:
                lam, err = float(g2.values[w2]), float(e2[w2])
        if best is None or err <= best.valid_error:
            best = TuneResult(lam, err, lam2 if config.uses_lam2 else None)
    return best
