"""Command-line entry point: ``annrr {approx,fit,simulate,check,replay}``.

Exit codes: 0 success (a non-converged NNP fit still counts), 1 a theory
check failed, 2 bad input data or contract violation, 3 bad configuration or
mis-ordered weights.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from annrr import __version__
from annrr.estimators import EstimatorConfig, fit
from annrr.exceptions import ConfigurationError, ContractError, NumericalError, WeightOrderError
from annrr.io import RunManifest, file_digest, read_matrix, read_record, write_matrix, write_record
from annrr.linalg import singular_values
from annrr.simulation import SimulationScenario, format_table, run_experiment
from annrr.thresholding import WeightVector, adaptive_weights, asvt, hsvt, ssvt
from annrr.tuning import DEFAULT_GRID_SIZE, DEFAULT_MIN_RATIO, cross_validate
from annrr import theory

THREADS_ENV = "ANNRR_THREADS"
SUITES = ("optimality", "convexity", "rank-consistency", "noise-spectrum", "prediction-bound")

# Scenario defaults per simulation model (n, p, q, r*, and r_x for model 2).
MODEL_DEFAULTS = {
    1: {"n": 100, "p": 25, "q": 25, "rstar": 10, "rx": None},
    2: {"n": 20, "p": 100, "q": 25, "rstar": 5, "rx": 10},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: configuration error: {message}\n")


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be at least 1")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    threads = _Parser(add_help=False)
    threads.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                         help=f"worker threads for folds/replications (default: ${THREADS_ENV} or 1)")
    parser = _Parser(prog="annrr", description="Singular-value penalized low-rank estimators.",
                     parents=[threads])
    parser.add_argument("--version", action="version", version=f"annrr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("approx", parents=[threads], help="threshold the singular values of a matrix")
    p.add_argument("input")
    p.add_argument("--method", choices=("hsvt", "ssvt", "asvt"), required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, default=None, help="asvt: weights d(input)^-gamma (default 2)")
    g.add_argument("--weights", default=None, help="asvt: CSV file with one non-decreasing weight per singular value")
    p.add_argument("--header", action="store_true", help="input has a header line")
    p.add_argument("--out", required=True, help="output CSV path; a .record.json and .manifest.json go beside it")

    p = sub.add_parser("fit", parents=[threads], help="fit a regression estimator, tuning by CV unless --lambda is given")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--method", required=True, help="ols, rsc, nnp, ann, rorr, roann or shorthand ann0/ann1/ann2")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None, help="ridge level; searched by CV when omitted")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--weights", default=None, help="CSV file of fixed ANN weights")
    p.add_argument("--cv-folds", type=int, default=10)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--lambda-min-ratio", type=float, default=DEFAULT_MIN_RATIO)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nnp-max-iter", type=int, default=5000)
    p.add_argument("--nnp-tol", type=float, default=1e-7)
    p.add_argument("--accelerate", action="store_true", help="NNP: Nesterov momentum with restart")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", parents=[threads], help="run Model I/II simulation cells")
    p.add_argument("--model", type=int, choices=(1, 2), default=1)
    for name in ("n", "p", "q", "rstar", "rx"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--rho", type=_float_list, default=[0.5], help="comma-separated list")
    p.add_argument("--b", type=_float_list, default=[0.1], help="comma-separated list")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", type=_str_list, default=["ann2", "rsc"])
    p.add_argument("--tuning", choices=("oracle", "cv"), default="oracle")
    p.add_argument("--cv-folds", type=int, default=10)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--lambda-min-ratio", type=float, default=DEFAULT_MIN_RATIO)
    p.add_argument("--timing", action="store_true", help="add mean seconds per fit to the text table")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("check", parents=[threads], help="Monte Carlo checks of the theoretical claims")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--trials", type=int, default=None, help="override every check's default trial count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--h", type=int, default=4, help="convexity: number of singular values")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("replay", parents=[threads], help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output location (default: the one recorded)")
    return parser


# ---------------------------------------------------------------- helpers


def _manifest(args, inputs: list[str], started: float, outputs: list[Path]) -> RunManifest:
    config = {k: v for k, v in vars(args).items() if k != "threads"}
    return RunManifest(
        command=args.command,
        config=config,
        seed=getattr(args, "seed", None),
        version=__version__,
        inputs={str(Path(p)): file_digest(p) for p in inputs},
        wall_time_seconds=round(time.perf_counter() - started, 6),
        outputs=sorted(str(o) for o in outputs),
    )


def _load_weights(path) -> WeightVector:
    return WeightVector(read_matrix(path).ravel())


def _estimator_config(args) -> EstimatorConfig:
    label = args.method.strip().lower()
    extra = dict(nnp_max_iter=args.nnp_max_iter, nnp_tol=args.nnp_tol, nnp_accelerate=args.accelerate)
    if args.lambda2 is not None:
        extra["lam2"] = args.lambda2
    if args.weights is not None:
        extra["weights"] = _load_weights(args.weights)
    cfg = EstimatorConfig.from_label(label, **extra)
    if args.gamma is not None:
        if label not in ("ann", "roann"):
            raise ConfigurationError("--gamma only applies to ann/roann (shorthand labels fix it)")
        cfg = cfg.with_(gamma=args.gamma)
    if args.weights is not None and cfg.method not in ("ann", "roann"):
        raise ConfigurationError("--weights only applies to ann/roann")
    if args.lambda2 is not None and not cfg.uses_lam2:
        raise ConfigurationError("--lambda2 only applies to rorr/roann")
    return cfg


# ---------------------------------------------------------------- commands


def cmd_approx(args, threads: int) -> int:
    started = time.perf_counter()
    y = read_matrix(args.input, header=args.header)
    if args.lam < 0:
        raise ConfigurationError("--lambda must be non-negative")
    if args.method != "asvt" and (args.gamma is not None or args.weights is not None):
        raise ConfigurationError("--gamma/--weights only apply to asvt")
    weights = None
    if args.method == "hsvt":
        out = hsvt(y, args.lam)
    elif args.method == "ssvt":
        out = ssvt(y, args.lam)
    else:
        weights = (_load_weights(args.weights) if args.weights is not None
                   else adaptive_weights(y, 2.0 if args.gamma is None else args.gamma))
        out = asvt(y, args.lam, weights)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    d_out = singular_values(out)
    record = {
        "method": args.method,
        "lambda": args.lam,
        "weights": None if weights is None else weights.w,
        "singular_values_input": singular_values(y),
        "singular_values_output": d_out,
        "rank": int(np.count_nonzero(d_out > 1e-10 * max(d_out[0], 1e-300))) if d_out.size else 0,
        "shape": list(out.shape),
    }
    stem = out_path.with_suffix("")
    written = [write_matrix(out_path, out), write_record(f"{stem}.record.json", record)]
    inputs = [args.input] + ([args.weights] if args.weights else [])
    write_record(f"{stem}.manifest.json", _manifest(args, inputs, started, written).to_record())
    print(f"{args.method}: rank {record['rank']}, wrote {out_path}")
    return 0


def cmd_fit(args, threads: int) -> int:
    started = time.perf_counter()
    y = read_matrix(args.y, header=args.header)
    x = read_matrix(args.x, header=args.header)
    if y.shape[0] != x.shape[0]:
        raise ContractError(f"row counts differ: Y has {y.shape[0]}, X has {x.shape[0]}")
    cfg = _estimator_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    cv_record = None
    if args.lam is not None:
        cfg = cfg.with_(lam=args.lam)
    elif cfg.method != "ols":
        if args.cv_folds < 2:
            raise ConfigurationError("--cv-folds must be at least 2")
        rpt = cross_validate(
            y, x, cfg, k=args.cv_folds, seed=args.seed, grid_size=args.grid_size,
            lambda_min_ratio=args.lambda_min_ratio,
            lambda2_grid=None if args.lambda2 is None else [args.lambda2], threads=threads,
        )
        cfg = cfg.with_(lam=rpt.best_lambda, lam2=cfg.lam2 if rpt.best_lambda2 is None else rpt.best_lambda2)
        cv_record = rpt.to_record()
    res = fit(y, x, cfg)
    written.append(write_matrix(out / "coefficients.csv", res.coefficients))
    written.append(write_matrix(out / "fitted.csv", res.fitted))
    written.append(write_record(out / "fit.json", {"config": cfg.to_record(), "result": res.to_record()}))
    if cv_record is not None:
        written.append(write_record(out / "cv.json", cv_record))
    inputs = [args.y, args.x] + ([args.weights] if args.weights else [])
    write_record(out / "manifest.json", _manifest(args, inputs, started, written).to_record())
    flag = "" if res.converged else " (NOT converged)"
    print(f"{cfg.label}: lambda={res.lambda_used:.6g} rank={res.estimated_rank}{flag}")
    return 0


def cmd_simulate(args, threads: int) -> int:
    started = time.perf_counter()
    base = MODEL_DEFAULTS[args.model]
    for key, value in base.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    configs = [EstimatorConfig.from_label(m) for m in args.methods]
    if not configs:
        raise ConfigurationError("--methods must name at least one method")
    rows = []
    scenarios = []
    for rho in args.rho:
        for b in args.b:
            s = SimulationScenario(model=args.model, n=args.n, p=args.p, q=args.q, r_star=args.rstar,
                                   r_x=args.rx, rho=rho, b=b, sigma=args.sigma,
                                   replications=args.reps, seed=args.seed)
            s.validate()
            scenarios.append(s)
    for s in scenarios:
        rows.extend(run_experiment(s, configs, tuning=args.tuning, cv_folds=args.cv_folds, threads=threads,
                                   grid_size=args.grid_size, lambda_min_ratio=args.lambda_min_ratio))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = format_table(rows, timing=args.timing)
    written = [
        write_record(out / "results.json", {"scenarios": [s.to_record() for s in scenarios],
                                            "rows": [r.to_record() for r in rows]}),
    ]
    (out / "table.txt").write_text(table + "\n")
    written.append(out / "table.txt")
    write_record(out / "manifest.json", _manifest(args, [], started, written).to_record())
    print(table)
    return 0


def _theory_config(args, trials: int) -> theory.TheoryCheckConfig:
    cfg = theory.TheoryCheckConfig(delta=args.delta, theta=args.theta, a=args.a, M=args.M, gamma=args.gamma,
                                   trials=args.trials or trials, seed=args.seed)
    cfg.validate()
    return cfg


def run_suite(args) -> list[theory.CheckReport]:
    suites = SUITES if args.suite == "all" else (args.suite,)
    _theory_config(args, 1)
    if args.sigma < 0:
        raise ConfigurationError("--sigma must be non-negative")
    reports = []
    for name in suites:
        if name == "optimality":
            reports.append(theory.check_asvt_optimality(instances=args.trials or 1000, seed=args.seed))
            reports.append(theory.check_svt_solutions(instances=args.trials or 200, seed=args.seed))
        elif name == "convexity":
            if args.h < 2:
                raise ConfigurationError("--h must be at least 2")
            reports.append(theory.check_convexity_dichotomy(h=args.h, trials=args.trials or 10_000, seed=args.seed))
        elif name == "rank-consistency":
            s = theory.default_rank_scenario()
            s = SimulationScenario(**{**s.to_record(), "sigma": args.sigma})
            reports.append(theory.check_rank_consistency(s, _theory_config(args, 200)))
        elif name == "noise-spectrum":
            reports.append(theory.check_noise_spectrum(sigma=args.sigma, trials=args.trials or 500, seed=args.seed))
        elif name == "prediction-bound":
            s = theory.default_bound_scenario()
            s = SimulationScenario(**{**s.to_record(), "sigma": args.sigma})
            cfg = _theory_config(args, 200)
            reports.append(theory.check_prediction_bound(s, cfg))
            reports.append(theory.check_prediction_bound(s, cfg, fixed_weights=np.ones(min(s.n, s.q))))
    return reports


def cmd_check(args, threads: int) -> int:
    started = time.perf_counter()
    reports = run_suite(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_record(out / "checks.json", {"reports": [r.to_record() for r in reports]})]
    write_record(out / "manifest.json", _manifest(args, [], started, written).to_record())
    for r in reports:
        print(f"{r.status:<5} {r.name}: empirical={r.empirical:.6g} ({r.claimed})")
    return 1 if any(r.status == theory.FAIL for r in reports) else 0


COMMANDS = {"approx": cmd_approx, "fit": cmd_fit, "simulate": cmd_simulate, "check": cmd_check}


def cmd_replay(args, threads: int) -> int:
    manifest = RunManifest.from_record(read_record(args.manifest))
    if manifest.version != __version__:
        print(f"warning: manifest written by annrr {manifest.version}, running {__version__}", file=sys.stderr)
    manifest.verify_inputs()
    replayed = argparse.Namespace(**manifest.config)
    if args.out is not None:
        replayed.out = args.out
    if manifest.command not in COMMANDS:
        raise ConfigurationError(f"manifest names unknown command {manifest.command!r}")
    return COMMANDS[manifest.command](replayed, threads)


COMMANDS["replay"] = cmd_replay


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and flag errors
        return exc.code if isinstance(exc.code, int) else 3
    try:
        threads = args.threads if "threads" in args else _default_threads()
        if threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        return COMMANDS[args.command](args, threads)
    except (WeightOrderError, ConfigurationError) as exc:
        print(f"annrr: configuration error: {exc}", file=sys.stderr)
        return 3
    except ContractError as exc:
        print(f"annrr: input error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"annrr: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
