"""Simulation harness for the Model I / Model II reduced-rank regression experiments.

Every replication draws from its own Philox stream spawned from the scenario
seed, so results do not depend on how replications are scheduled.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from annrr.estimators import EstimatorConfig, fit
from annrr.exceptions import ContractError, NumericalError
from annrr.linalg import matrix_rank
from annrr.tuning import DEFAULT_GRID_SIZE, DEFAULT_MIN_RATIO, cross_validate, oracle_tune

VALIDATION_FACTOR = 10


@dataclass(frozen=True)
class SimulationScenario:
    """Parameters of one experiment cell.

    ``r_x`` is only used by Model II (Model I designs are full rank).
    """

    model: int = 1
    n: int = 100
    p: int = 25
    q: int = 25
    r_star: int = 10
    r_x: int | None = None
    rho: float = 0.5
    b: float = 0.1
    sigma: float = 1.0
    replications: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.model not in (1, 2):
            raise ContractError("model must be 1 or 2")
        for name in ("n", "p", "q", "r_star", "replications"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be a positive integer")
        if not 0 <= self.rho < 1:
            raise ContractError("rho must lie in [0, 1)")
        if self.b <= 0 or self.sigma < 0:
            raise ContractError("b must be positive and sigma non-negative")
        if self.r_star > min(self.p, self.q):
            raise ContractError("invariant violated: r_star <= min(p, q)")
        if self.model == 2:
            if self.r_x is None or self.r_x < 1:
                raise ContractError("model II needs a positive r_x")
            if self.r_x > min(self.n, self.p):
                raise ContractError("invariant violated: r_x <= min(n, p)")
            if self.r_star > self.r_x:
                raise ContractError("invariant violated: r_star <= r_x")

    @property
    def design_rank(self) -> int:
        return self.r_x if self.model == 2 else min(self.n, self.p)

    def to_record(self) -> dict:
        return asdict(self)


def model1_scenario(rho: float, b: float, replications: int = 100, seed: int = 0) -> SimulationScenario:
    """Model I: n=100, p=q=25, r*=10."""
    return SimulationScenario(1, 100, 25, 25, 10, None, rho, b, 1.0, replications, seed)


def model2_scenario(rho: float, b: float, replications: int = 100, seed: int = 0) -> SimulationScenario:
    """Model II default dimensions: n=20, p=100, q=25, r*=5, r_x=10."""
    return SimulationScenario(2, 20, 100, 25, 5, 10, rho, b, 1.0, replications, seed)


def replication_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent Philox generators, one per replication."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def ar1_cholesky(p: int, rho: float) -> np.ndarray:
    """Lower Cholesky factor of ``Gamma_ij = rho^|i-j|`` (identity when ``rho == 0``)."""
    if rho == 0:
        return np.eye(p)
    idx = np.arange(p)
    gamma = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(gamma)


def gen_coefficients(p: int, q: int, r_star: int, b: float, rng: np.random.Generator) -> np.ndarray:
    """``b * C0 @ C1.T`` with standard normal ``C0`` (p x r*) and ``C1`` (q x r*)."""
    if r_star > min(p, q):
        raise ContractError("r_star must not exceed min(p, q)")
    c0 = rng.standard_normal((p, r_star))
    c1 = rng.standard_normal((q, r_star))
    return b * (c0 @ c1.T)


def gen_design_model1(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. ``N(0, Gamma)`` with AR(1) covariance ``Gamma_ij = rho^|i-j|``."""
    if not 0 <= rho < 1:
        raise ContractError("rho must lie in [0, 1)")
    z = rng.standard_normal((n, p))
    return z if rho == 0 else z @ ar1_cholesky(p, rho).T


def gen_design_model2(
    n: int, p: int, r_x: int, rho: float, rng: np.random.Generator, x2: np.ndarray | None = None
) -> np.ndarray:
    """Rank-``r_x`` design ``X1 @ X2 @ Gamma^(1/2)`` with standard normal factors.

    Passing ``x2`` reuses a right factor, which keeps the row space of an
    earlier draw (needed for validation sets on the same design law).
    """
    if r_x > min(n, p):
        raise ContractError("r_x must not exceed min(n, p)")
    x1 = rng.standard_normal((n, r_x))
    if x2 is None:
        x2 = rng.standard_normal((r_x, p))
    x0 = x1 @ x2
    return x0 if rho == 0 else x0 @ ar1_cholesky(p, rho).T


def smse_estimation(c_true, c_hat) -> float:
    """``100 ||C - C_hat||_F^2 / (p q)``."""
    c_true, c_hat = np.asarray(c_true, float), np.asarray(c_hat, float)
    if c_true.shape != c_hat.shape:
        raise ContractError("coefficient shapes differ")
    return 100.0 * float(np.sum((c_true - c_hat) ** 2)) / c_true.size


def smse_prediction(x, c_true, c_hat) -> float:
    """``100 ||XC - X C_hat||_F^2 / (n q)``."""
    x = np.asarray(x, float)
    diff = x @ (np.asarray(c_true, float) - np.asarray(c_hat, float))
    return 100.0 * float(np.sum(diff**2)) / diff.size


@dataclass(frozen=True)
class Replicate:
    """One simulated data set."""

    x: np.ndarray
    c: np.ndarray
    y: np.ndarray
    x_valid: np.ndarray | None = None
    y_valid: np.ndarray | None = None


def draw_replicate(s: SimulationScenario, rng: np.random.Generator, with_validation: bool = False) -> Replicate:
    """Draw C, X, E (and optionally a 10x larger validation set) in that order.

    For Model II the validation design shares the training design's right
    factor ``X2`` and draws a fresh left factor.
    """
    c = gen_coefficients(s.p, s.q, s.r_star, s.b, rng)
    if s.model == 1:
        x = gen_design_model1(s.n, s.p, s.rho, rng)
    else:
        x1 = rng.standard_normal((s.n, s.r_x))
        x2 = rng.standard_normal((s.r_x, s.p))
        chol_t = ar1_cholesky(s.p, s.rho).T
        x = x1 @ x2 if s.rho == 0 else x1 @ x2 @ chol_t
    y = x @ c + s.sigma * rng.standard_normal((s.n, s.q))
    if not with_validation:
        return Replicate(x, c, y)
    nv = VALIDATION_FACTOR * s.n
    if s.model == 1:
        xv = gen_design_model1(nv, s.p, s.rho, rng)
    else:
        # same right factor: C is only identifiable on the training row space
        xv = gen_design_model2(nv, s.p, s.r_x, s.rho, rng, x2=x2)
    yv = xv @ c + s.sigma * rng.standard_normal((nv, s.q))
    return Replicate(x, c, y, xv, yv)


@dataclass(frozen=True)
class ExperimentRow:
    """Summary of one method over all replications of a scenario."""

    label: str
    tuning: str
    model: int
    rho: float
    b: float
    est_smse_mean: float
    est_smse_sd: float
    pred_smse_mean: float
    pred_smse_sd: float
    mean_rank: float
    pct_exact_rank: float
    mean_seconds: float
    replications: int
    failures: int

    def to_record(self, timing: bool = False) -> dict:
        rec = asdict(self)
        if not timing:
            rec.pop("mean_seconds")
        return rec


def _tuned_fit(rep: Replicate, cfg: EstimatorConfig, tuning: str, seed: int, cv_folds: int,
               grid_size: int, ratio: float):
    if cfg.method == "ols":
        return fit(rep.y, rep.x, cfg)
    if tuning == "oracle":
        t = oracle_tune(rep.y, rep.x, cfg, rep.y_valid, rep.x_valid, c_true=rep.c,
                        grid_size=grid_size, lambda_min_ratio=ratio)
        lam, lam2 = t.best_lambda, t.best_lambda2
    elif tuning == "cv":
        rpt = cross_validate(rep.y, rep.x, cfg, k=cv_folds, seed=seed,
                             grid_size=grid_size, lambda_min_ratio=ratio)
        lam, lam2 = rpt.best_lambda, rpt.best_lambda2
    else:
        raise ContractError(f"tuning must be 'oracle' or 'cv', got {tuning!r}")
    return fit(rep.y, rep.x, cfg.with_(lam=lam, lam2=cfg.lam2 if lam2 is None else lam2))


def run_replication(
    s: SimulationScenario,
    index: int,
    rng: np.random.Generator,
    methods: Sequence[EstimatorConfig],
    tuning: str = "oracle",
    cv_folds: int = 10,
    grid_size: int = DEFAULT_GRID_SIZE,
    lambda_min_ratio: float = DEFAULT_MIN_RATIO,
) -> dict:
    """Metrics of every method on one replicate: label -> (est, pred, rank, seconds) or None."""
    rep = draw_replicate(s, rng, with_validation=(tuning == "oracle"))
    cv_seed = int(rng.integers(0, 2**31 - 1))
    out = {}
    for cfg in methods:
        t0 = time.perf_counter()
        try:
            res = _tuned_fit(rep, cfg, tuning, cv_seed, cv_folds, grid_size, lambda_min_ratio)
        except (NumericalError, np.linalg.LinAlgError):
            out[cfg.label] = None
            continue
        dt = time.perf_counter() - t0
        out[cfg.label] = (
            smse_estimation(rep.c, res.coefficients),
            smse_prediction(rep.x, rep.c, res.coefficients),
            res.estimated_rank,
            dt,
        )
    return out


def summarize(s: SimulationScenario, label: str, tuning: str, results: list) -> ExperimentRow:
    ok = [r[label] for r in results if r.get(label) is not None]
    failures = len(results) - len(ok)
    if not ok:
        nan = float("nan")
        return ExperimentRow(label, tuning, s.model, s.rho, s.b, nan, nan, nan, nan, nan, nan, nan,
                             len(results), failures)
    arr = np.array([(e, p, r, t) for e, p, r, t in ok], dtype=float)
    ddof = 1 if len(ok) > 1 else 0
    return ExperimentRow(
        label=label,
        tuning=tuning,
        model=s.model,
        rho=s.rho,
        b=s.b,
        est_smse_mean=float(arr[:, 0].mean()),
        est_smse_sd=float(arr[:, 0].std(ddof=ddof)),
        pred_smse_mean=float(arr[:, 1].mean()),
        pred_smse_sd=float(arr[:, 1].std(ddof=ddof)),
        mean_rank=float(arr[:, 2].mean()),
        pct_exact_rank=100.0 * float(np.count_nonzero(arr[:, 2] == s.r_star)) / len(ok),
        mean_seconds=float(arr[:, 3].mean()),
        replications=len(results),
        failures=failures,
    )


def run_experiment(
    s: SimulationScenario,
    methods: Sequence[EstimatorConfig],
    tuning: str = "oracle",
    cv_folds: int = 10,
    threads: int = 1,
    grid_size: int = DEFAULT_GRID_SIZE,
    lambda_min_ratio: float = DEFAULT_MIN_RATIO,
) -> list[ExperimentRow]:
    """Replicate the scenario, tune and fit each method, and summarize per method."""
    s.validate()
    if not methods:
        raise ContractError("need at least one method")
    rngs = replication_rngs(s.seed, s.replications)

    def task(i):
        return run_replication(s, i, rngs[i], methods, tuning, cv_folds, grid_size, lambda_min_ratio)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(s.replications)))
    else:
        results = [task(i) for i in range(s.replications)]
    return [summarize(s, cfg.label, tuning, results) for cfg in methods]


def format_table(rows: Sequence[ExperimentRow], timing: bool = True) -> str:
    """Plain-text table, one block per (rho, b) cell, mirroring the published layout."""
    lines = []
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.rho, r.b), []).append(r)
    for (rho, b), group in cells.items():
        lines.append(f"rho={rho:g}  b={b:g}")
        head = f"  {'method':<10}{'Est':>16}{'Pred':>18}{'Rank':>16}"
        if timing:
            head += f"{'Time(s)':>10}"
        lines.append(head)
        for r in group:
            name = f"{r.label}^{'O' if r.tuning == 'oracle' else 'C'}"
            line = (
                f"  {name:<10}{r.est_smse_mean:>9.2f} ({r.est_smse_sd:.2g})"
                f"{r.pred_smse_mean:>11.2f} ({r.pred_smse_sd:.2g})"
                f"{r.mean_rank:>9.2f}, {r.pct_exact_rank:.1f}"
            )
            if timing:
                line += f"{r.mean_seconds:>10.3f}"
            if r.failures:
                line += f"  [{r.failures} failed]"
            lines.append(line)
    return "\n".join(lines)


def assert_rank(m: np.ndarray, expected: int) -> bool:
    return matrix_rank(m) == expected
