import math

import numpy as np
import pandas as pd
import pytest

from dcmsg.dataset import COLUMNS, ChoiceDataset, SyntheticConfig, generate_synthetic
from dcmsg.estimation import (
    EstimationOptions,
    estimate_mnl,
    mnl_loglik,
    mnl_scores,
    null_loglik,
)
from dcmsg.modelspec import BOXCOX, MNL, ModelSpecification, design_matrix
from dcmsg.optimize import finite_difference_gradient

FULL = ModelSpecification(MNL, asc=True)


def test_loglik_at_zero_is_null(small_ds):
    dm = design_matrix(FULL, small_ds)
    ll, _ = mnl_loglik(np.zeros(dm.n_params), dm)
    assert ll == pytest.approx(small_ds.n_rows * math.log(1 / 3), abs=1e-10)
    assert null_loglik(small_ds.n_rows) == pytest.approx(ll, abs=1e-10)


def test_gradient_matches_finite_differences(small_ds, rng):
    dm = design_matrix(FULL, small_ds)
    for _ in range(10):
        x = rng.normal(scale=0.05, size=dm.n_params)
        _, grad = mnl_loglik(x, dm)
        fd = finite_difference_gradient(lambda p: mnl_loglik(p, dm)[0], x)
        denom = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(grad - fd) / denom) < 1e-6


def test_boxcox_gradient_matches_finite_differences(small_ds, rng):
    spec = ModelSpecification(MNL, asc=True,
                              transform=(1, 1, 1, BOXCOX, 1, 1))
    dm = design_matrix(spec, small_ds)
    for _ in range(5):
        x = rng.normal(scale=0.05, size=dm.n_params)
        x[-1] = rng.uniform(0.3, 1.5)   # lambda inside its box
        _, grad = mnl_loglik(x, dm)
        fd = finite_difference_gradient(lambda p: mnl_loglik(p, dm)[0], x)
        denom = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(grad - fd) / denom) < 1e-6


def test_scores_sum_to_gradient(small_ds, rng):
    dm = design_matrix(FULL, small_ds)
    x = rng.normal(scale=0.05, size=dm.n_params)
    _, grad = mnl_loglik(x, dm)
    assert np.allclose(mnl_scores(x, dm).sum(axis=0), grad, atol=1e-10)


def test_parameter_recovery(medium_ds):
    res = estimate_mnl(FULL, medium_ds)
    assert res.converged and not res.misspecified
    truth = {"b_noise": -0.5, "b_cost": -0.01}
    for name, value in zip(res.param_names, res.estimates):
        target = truth.get(name, 0.0)
        se = res.robust_se[res.param_names.index(name)]
        assert abs(value - target) < 3 * se, name


def test_ll_init_equals_null_for_linear_start(small_ds):
    res = estimate_mnl(FULL, small_ds)
    assert res.ll_init == pytest.approx(res.ll_null, abs=1e-9)
    assert res.ll_final > res.ll_init
    assert res.gradient_norm < 1e-6


def _asc_only_dataset(n_a=50, n_b=30, n_c=20):
    n = n_a + n_b + n_c
    df = pd.DataFrame({c: [0.0] * n for c in COLUMNS})
    df["ID"] = np.arange(1, n + 1)
    df["TaskID"] = 1
    for alt in "ABC":
        df[f"stores_{alt}"] = [2, 5, 10, 15][ord(alt) % 4]
        df[f"noise_{alt}"] = {"A": 1, "B": 2, "C": 3}[alt]
    df["Choice"] = [1] * n_a + [2] * n_b + [3] * n_c
    return ChoiceDataset(df=df)


def test_asc_only_closed_form():
    ds = _asc_only_dataset()
    spec = ModelSpecification(MNL, asc=True, include=(False,) * 6)
    res = estimate_mnl(spec, ds)
    est = dict(zip(res.param_names, res.estimates))
    assert est["asc_B"] == pytest.approx(math.log(0.3 / 0.5), abs=1e-4)
    assert est["asc_C"] == pytest.approx(math.log(0.2 / 0.5), abs=1e-4)


def test_collinear_spec_flagged_misspecified(small_ds):
    df = small_ds.df.copy()
    for alt in "ABC":   # transport duplicates stores -> collinear design
        df[f"transport_{alt}"] = df[f"stores_{alt}"]
    res = estimate_mnl(FULL, ChoiceDataset(df=df))
    assert res.singular_hessian
    assert res.misspecified
    assert np.isnan(res.robust_se).all()


def test_boxcox_estimation_runs(small_ds):
    spec = ModelSpecification(MNL, asc=True, transform=(1, 1, 1, BOXCOX, 1, 1))
    res = estimate_mnl(spec, small_ds)
    lam = res.estimates[res.param_names.index("lambda_noise")]
    assert -2.0 <= lam <= 3.0
    linear = estimate_mnl(FULL, small_ds)
    assert res.ll_final >= linear.ll_final - 1e-6


def test_interaction_estimation(small_ds):
    spec = ModelSpecification(MNL, asc=True, interaction=(0, 0, 0, 2, 0, 0))
    res = estimate_mnl(spec, small_ds)
    assert "b_noise_x_age2" in res.param_names
    assert "b_noise_x_age3" in res.param_names
    assert res.converged


def test_result_round_trips_to_dict(small_ds):
    res = estimate_mnl(FULL, small_ds)
    payload = res.to_dict()
    assert "wall_time" not in payload
    assert payload["n_params"] == len(payload["estimates"])
    again = estimate_mnl(FULL, small_ds)
    assert again.to_dict() == payload    # bit-for-bit determinism
