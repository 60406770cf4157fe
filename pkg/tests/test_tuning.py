import numpy as np
import pytest

from annrr import ContractError, EstimatorConfig, fit
from annrr.estimators import lambda_max
from annrr.linalg import projector, singular_values
from annrr.tuning import (
    DEFAULT_LAMBDA2_GRID, LambdaGrid, build_grid, cross_validate, fold_assignment, oracle_tune, refine_grid,
)

from conftest import low_rank, make_rng


@pytest.fixture
def data():
    r = make_rng(12)
    x = r.standard_normal((40, 6))
    c = low_rank(r, 6, 5, 2)
    y = x @ c + 0.3 * r.standard_normal((40, 5))
    return y, x, c


def test_build_grid_examples():
    np.testing.assert_allclose(build_grid(1.0, 3, 0.01).values, [0.01, 0.1, 1.0], rtol=1e-14)
    g = build_grid(7.5, 100, 1e-4).values
    assert g.size == 100 and g[-1] == 7.5
    gaps = np.diff(np.log(g))
    assert np.max(np.abs(gaps - gaps[0])) <= 1e-12


def test_grid_top_is_the_null_solution():
    r = make_rng(3)
    y = np.diag([5.0, 2.0, 1.0])
    x = np.eye(3)
    cfg = EstimatorConfig("ann", gamma=1.0)
    top = build_grid(lambda_max(y, x, cfg)).values[-1]
    assert top == pytest.approx(25.0)
    assert np.all(fit(y, x, cfg.with_(lam=top)).coefficients == 0.0)
    for m in ("rsc", "nnp", "rorr", "roann"):
        y2 = r.standard_normal((10, 3))
        x2 = r.standard_normal((10, 4))
        cfg = EstimatorConfig(m, lam2=0.5)
        res = fit(y2, x2, cfg.with_(lam=lambda_max(y2, x2, cfg)))
        assert np.linalg.norm(res.coefficients) <= 1e-8, m


def test_grid_validation():
    with pytest.raises(ContractError):
        LambdaGrid(np.array([1.0, 1.0]))
    with pytest.raises(ContractError):
        LambdaGrid(np.array([-1.0, 1.0]))
    with pytest.raises(ContractError):
        build_grid(0.0)
    with pytest.raises(ContractError):
        build_grid(1.0, 10, 2.0)


def test_refine_grid_brackets_winner():
    g = build_grid(1.0, 10, 1e-3)
    r = refine_grid(g, 4, 100)
    assert r.values[0] == g.values[3] and r.values[-1] == g.values[5]
    assert g.values[4] in r.values and len(r) == 101
    edge = refine_grid(g, 9, 50)
    assert edge.values[0] == g.values[8] and edge.values[-1] == g.values[9]
    lin = refine_grid(LambdaGrid(np.array([0.0, 1.0, 2.0])), 0, 5)
    np.testing.assert_allclose(lin.values, np.linspace(0.0, 1.0, 5))


def test_fold_assignment_properties():
    folds = fold_assignment(23, 5, 4)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1
    again = fold_assignment(23, 5, 4)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    assert not all(np.array_equal(a, b) for a, b in zip(folds, fold_assignment(23, 5, 5)))
    with pytest.raises(ContractError):
        fold_assignment(5, 6, 0)


@pytest.mark.parametrize("method", ["rsc", "ann", "nnp"])
def test_leave_one_out_matches_explicit_loop(method):
    r = make_rng(21)
    x = r.standard_normal((6, 3))
    y = x @ low_rank(r, 3, 2, 1) + 0.2 * r.standard_normal((6, 2))
    cfg = EstimatorConfig(method, nnp_tol=1e-10)
    lams = np.array([0.01, 0.3, 1.0, 4.0])
    rpt = cross_validate(y, x, cfg, k=6, seed=0, lambdas=lams, refine=False)
    expected = []
    for lam in lams:
        errs = []
        for i in range(6):
            keep = np.arange(6) != i
            c = fit(y[keep], x[keep], cfg.with_(lam=lam)).coefficients
            errs.append(float(np.sum((y[i] - x[i] @ c) ** 2)) / 2)
        expected.append(np.mean(errs))
    np.testing.assert_allclose(rpt.cv_errors, expected, rtol=1e-6)
    expected = np.array(expected)
    ties = np.flatnonzero(expected <= expected.min() * (1 + 1e-9))
    assert rpt.best_lambda == lams[ties[-1]]


def test_noiseless_cv_recovers_rank():
    r = make_rng(5)
    x = r.standard_normal((50, 8))
    c = low_rank(r, 8, 6, 3)
    y = x @ c
    rpt = cross_validate(y, x, EstimatorConfig("ann"), k=10, seed=1)
    res = fit(y, x, EstimatorConfig("ann", lam=rpt.best_lambda))
    assert res.estimated_rank == 3
    # the winner is the bottom of the grid; what remains is the ANN shrinkage bias there
    assert rpt.best_lambda == rpt.grid.values[0]
    assert rpt.best_error < 1e-5 * rpt.null_error


def test_single_lambda_is_returned():
    r = make_rng(1)
    x = r.standard_normal((12, 3))
    y = r.standard_normal((12, 2))
    rpt = cross_validate(y, x, EstimatorConfig("rsc"), k=3, lambdas=[0.42])
    assert rpt.best_lambda == 0.42


def test_ties_go_to_the_larger_lambda():
    r = make_rng(1)
    x = r.standard_normal((12, 3))
    y = r.standard_normal((12, 2))
    # every penalty above the null threshold gives the same zero fit
    top = lambda_max(y, x, EstimatorConfig("rsc")) * 1e3
    rpt = cross_validate(y, x, EstimatorConfig("rsc"), k=3, lambdas=[top, 2 * top, 3 * top], refine=False)
    assert rpt.best_lambda == 3 * top


def test_stage_two_never_worsens_and_is_reproducible(data):
    y, x, _ = data
    for m in ("rsc", "ann", "rorr"):
        a = cross_validate(y, x, EstimatorConfig(m), k=5, seed=3, grid_size=30)
        assert a.best_error <= np.nanmin(a.cv_errors) + 1e-12
        assert len(a.cv_errors) == len(a.grid)
        b = cross_validate(y, x, EstimatorConfig(m), k=5, seed=3, grid_size=30)
        assert a.to_record() == b.to_record()


def test_threads_do_not_change_results(data):
    y, x, _ = data
    a = cross_validate(y, x, EstimatorConfig("nnp"), k=5, seed=3, grid_size=15, threads=1)
    b = cross_validate(y, x, EstimatorConfig("nnp"), k=5, seed=3, grid_size=15, threads=4)
    assert a.to_record() == b.to_record()


def test_null_endpoint_error_is_the_cve_baseline(data):
    y, x, _ = data
    huge = 1e6 * lambda_max(y, x, EstimatorConfig("ann"))
    rpt = cross_validate(y, x, EstimatorConfig("ann"), k=5, lambdas=[huge], refine=False)
    folds = fold_assignment(40, 5, 0)
    baseline = np.mean([np.sum(y[t] ** 2) / y[t].size for t in folds])
    assert rpt.cv_errors[0] == pytest.approx(baseline, rel=1e-12)
    assert rpt.cve == pytest.approx(1.0)


def test_ridge_methods_search_lambda2(data):
    y, x, _ = data
    rpt = cross_validate(y, x, EstimatorConfig("roann"), k=4, grid_size=10)
    assert [s["lambda2"] for s in rpt.lambda2_summary] == list(DEFAULT_LAMBDA2_GRID)
    assert rpt.best_lambda2 in DEFAULT_LAMBDA2_GRID
    assert rpt.best_error == min(s["best_error"] for s in rpt.lambda2_summary)
    fixed = cross_validate(y, x, EstimatorConfig("rorr"), k=4, grid_size=10, lambda2_grid=[0.5])
    assert fixed.best_lambda2 == 0.5


def test_oracle_tune_in_sample_picks_least_squares(data):
    y, x, _ = data
    res = oracle_tune(y, x, EstimatorConfig("rsc"), y, x, lambdas=[0.0, 1.0, 10.0, 100.0])
    assert res.best_lambda == 0.0
    single = oracle_tune(y, x, EstimatorConfig("ann"), y, x, lambdas=[3.0])
    assert single.best_lambda == 3.0


def test_oracle_tune_with_truth_scores_noise_free_error(data):
    y, x, c = data
    r = make_rng(8)
    xv = r.standard_normal((400, 6))
    res = oracle_tune(y, x, EstimatorConfig("ann"), None, xv, c_true=c, grid_size=40)
    chat = fit(y, x, EstimatorConfig("ann", lam=res.best_lambda)).coefficients
    assert res.valid_error == pytest.approx(np.sum((xv @ c - xv @ chat) ** 2) / (400 * 5), rel=1e-10)
    assert fit(y, x, EstimatorConfig("ann", lam=res.best_lambda)).estimated_rank == 2


def test_oracle_tune_rejects_bad_validation_shapes(data):
    y, x, _ = data
    with pytest.raises(ContractError):
        oracle_tune(y, x, EstimatorConfig("ann"), y, x[:, :3])
    with pytest.raises(ContractError):
        oracle_tune(y, x, EstimatorConfig("ann"), y[:, :2], x)
