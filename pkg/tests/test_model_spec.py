import pytest

from dcmsg.errors import IncompleteData, InvalidSpec
from dcmsg.modelspec import (
    BOXCOX,
    DIST_LOGNORMAL,
    DIST_NORMAL,
    LC,
    LINEAR,
    LOG,
    MMNL,
    MNL,
    ModelSpecification,
    canonical_key,
    design_matrix,
    validate_spec,
)


def violated(spec):
    return {v.constraint for v in validate_spec(spec)}


def test_json_round_trip():
    spec = ModelSpecification(MNL, asc=True,
                              transform=(LINEAR, BOXCOX, LINEAR, LOG, LINEAR, LINEAR),
                              interaction=(0, 1, 0, 0, 2, 0),
                              alt_specific=(False, False, True, False, False, False))
    payload = spec.to_json()
    assert payload["model"] == 1
    assert payload["t_2"] == 2 and payload["t_4"] == 3
    assert payload["int_2"] == 1 and payload["int_5"] == 2
    assert payload["s_3"] == 1
    assert ModelSpecification.from_json(payload) == spec


def test_from_json_rejects_garbage():
    with pytest.raises(InvalidSpec):
        ModelSpecification.from_json({"model": "x"})


def test_mnl_is_flexible():
    assert violated(ModelSpecification(MNL, asc=False,
                                       include=(True, False, True, True, True, True))) == set()


def test_log_of_cost_rejected():
    spec = ModelSpecification(MNL, transform=(1, 1, 1, 1, 1, LOG))
    assert "log of nonpositive attribute" in violated(spec)


def test_mmnl_constraints():
    ok = ModelSpecification(MMNL, asc=True, dist=(0, 0, 0, 1, 0, 2))
    assert violated(ok) == set()
    assert "at least one random parameter" in violated(
        ModelSpecification(MMNL, asc=True))
    assert "max two random parameters" in violated(
        ModelSpecification(MMNL, asc=True, dist=(1, 1, 1, 0, 0, 0)))
    assert "random attribute may not interact" in violated(
        ModelSpecification(MMNL, asc=True, dist=(0, 0, 0, 1, 0, 0),
                           interaction=(0, 0, 0, 1, 0, 0)))
    assert "ASCs required" in violated(
        ModelSpecification(MMNL, asc=False, dist=(0, 0, 0, 1, 0, 0)))
    assert "linear attributes required" in violated(
        ModelSpecification(MMNL, asc=True, dist=(0, 0, 0, 1, 0, 0),
                           transform=(2, 1, 1, 1, 1, 1)))


def test_lc_constraints():
    ok = ModelSpecification(LC, asc=True, n_class=2,
                            membership=(1, 0, 0, 0, 0, 0))
    assert violated(ok) == set()
    assert "up to three latent classes" in violated(
        ModelSpecification(LC, asc=True, n_class=4))
    assert "no interactions in LC" in violated(
        ModelSpecification(LC, asc=True, n_class=2,
                           interaction=(1, 0, 0, 0, 0, 0)))
    assert "no random parameters in LC" in violated(
        ModelSpecification(LC, asc=True, n_class=2, dist=(1, 0, 0, 0, 0, 0)))


def test_canonical_key_stable_and_guarded():
    spec = ModelSpecification(MMNL, asc=True, dist=(0, 0, 0, 1, 0, 0))
    payload = spec.to_json()
    shuffled = dict(reversed(list(payload.items())))
    assert canonical_key(spec) == canonical_key(
        ModelSpecification.from_json(shuffled))
    with pytest.raises(InvalidSpec):
        canonical_key(ModelSpecification(LC, asc=True, n_class=9))


def test_param_count_mnl_full(small_ds):
    dm = design_matrix(ModelSpecification(MNL, asc=True), small_ds)
    assert dm.param_names == ["asc_B", "asc_C", "b_stores", "b_transport",
                              "b_city", "b_noise", "b_green", "b_cost"]


def test_param_count_alt_specific(small_ds):
    spec = ModelSpecification(MNL, asc=True,
                              alt_specific=(False,) * 5 + (True,))
    dm = design_matrix(spec, small_ds)
    assert len(dm.param_names) == 10
    assert "b_cost_A" in dm.param_names and "b_cost_C" in dm.param_names


def test_param_count_boxcox_and_interaction(small_ds):
    spec = ModelSpecification(MNL, asc=True,
                              transform=(1, 1, 1, BOXCOX, 1, 1),
                              interaction=(0, 0, 0, 0, 0, 1))
    dm = design_matrix(spec, small_ds)
    assert "lambda_noise" in dm.param_names
    assert "b_cost_x_woman" in dm.param_names
    idx, lo, hi = next(b for b in dm.bounds
                       if b[0] == dm.param_names.index("lambda_noise"))
    assert (lo, hi) == (-2.0, 3.0)


def test_param_count_lc_18(small_ds):
    spec = ModelSpecification(LC, asc=True, n_class=2,
                              membership=(1, 0, 0, 0, 0, 0))
    dm = design_matrix(spec, small_ds)
    # 8 utility params per class + constant and Woman in the membership logit
    assert len(dm.param_names) == 18
    assert "pi_const_c2" in dm.param_names
    assert "pi_woman_c2" in dm.param_names


def test_membership_dummy_coding(small_ds):
    spec = ModelSpecification(LC, asc=True, n_class=2,
                              membership=(0, 1, 0, 0, 1, 0))
    dm = design_matrix(spec, small_ds)
    # Age enters as two dummies (bands 2 and 3), Carowner as one
    names = [n for n in dm.param_names if n.startswith("pi_")]
    assert names == ["pi_const_c2", "pi_age2_c2", "pi_age3_c2",
                     "pi_carowner_c2"]


def test_mmnl_sigma_parameters(small_ds):
    spec = ModelSpecification(MMNL, asc=True, dist=(0, 0, 0, 1, 0, 2))
    dm = design_matrix(spec, small_ds)
    assert "sigma_noise" in dm.param_names and "sigma_cost" in dm.param_names
    cost = next(rc for rc in dm.random_coefs if rc.name == "Cost")
    assert cost.lognormal and cost.sign == -1.0
    green_spec = ModelSpecification(MMNL, asc=True, dist=(0, 0, 0, 0, 2, 0))
    green = design_matrix(green_spec, small_ds).random_coefs[0]
    assert green.sign == 1.0


def test_design_rejects_missing(missing_ds):
    with pytest.raises(IncompleteData):
        design_matrix(ModelSpecification(MNL, asc=True), missing_ds)


def test_design_rejects_unidentified(small_ds):
    import pandas as pd
    from dcmsg.dataset import ChoiceDataset
    df = small_ds.df.copy()
    for alt in "ABC":   # identical across alternatives -> differences vanish
        df[f"noise_{alt}"] = 2.0
    with pytest.raises(InvalidSpec):
        design_matrix(ModelSpecification(MNL, asc=True), ChoiceDataset(df=df))
