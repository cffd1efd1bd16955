import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xhacking import zoo
from xhacking.shapley import (EFFICIENCY_TOL, ExplainError, ExplainerConfig, ShapMatrix, ShapVector,
                              all_coalitions, exact_shapley, explain_set, kernel_shap, kernel_weight,
                              sample_coalitions)


def linear(w, b=0.0):
    w = np.asarray(w, dtype=float)
    return lambda X: np.atleast_2d(X) @ w + b


def test_kernel_weight_values():
    # M=3: size 1 and 2 coalitions both weigh 2 / (3 * 1 * 2)
    assert kernel_weight(3, 1) == pytest.approx(1 / 3)
    assert kernel_weight(4, 2) == pytest.approx(3 / (6 * 2 * 2))


def test_all_coalitions_enumerates_proper_subsets():
    masks, w = all_coalitions(4)
    assert len(masks) == 14
    assert len({tuple(m) for m in masks}) == 14
    assert np.all((masks.sum(axis=1) > 0) & (masks.sum(axis=1) < 4))
    assert np.all(w > 0)


def test_linear_model_has_closed_form(rng):
    w = np.array([1.5, -2.0, 0.5, 3.0])
    B = rng.normal(size=(30, 4))
    x = rng.normal(size=4)
    phi = kernel_shap(linear(w, 0.3), x, B)
    np.testing.assert_allclose(phi.values, w * (x - B.mean(axis=0)), atol=1e-10)


def test_interaction_splits_evenly():
    # f = x0 * x1 with a zero background: the product is shared half and half
    f = lambda X: np.atleast_2d(X)[:, 0] * np.atleast_2d(X)[:, 1]
    phi = kernel_shap(f, [2.0, 3.0], np.zeros((1, 2)))
    np.testing.assert_allclose(phi.values, [3.0, 3.0])


def test_dummy_feature_gets_zero(rng):
    f = lambda X: np.tanh(np.atleast_2d(X)[:, 0] - np.atleast_2d(X)[:, 2])
    phi = kernel_shap(f, rng.normal(size=4), rng.normal(size=(10, 4)))
    assert abs(phi.values[1]) < 1e-12 and abs(phi.values[3]) < 1e-12


def test_single_feature():
    phi = kernel_shap(linear([2.0]), [1.0], np.zeros((3, 1)))
    np.testing.assert_allclose(phi.values, [2.0])


def test_efficiency_is_enforced():
    with pytest.raises(ExplainError):
        ShapVector(np.array([1.0, 1.0]), 0.0, 3.0)
    with pytest.raises(ExplainError):
        ShapMatrix(np.ones((2, 2)), np.zeros(2), np.array([2.0, 2.5]), ("a", "b"))


@given(m=st.integers(2, 6), seed=st.integers(0, 2**31 - 1))
def test_exact_mode_matches_oracle(m, seed):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(m, m))
    f = lambda X: np.tanh(np.atleast_2d(X) @ W).prod(axis=1) + np.atleast_2d(X)[:, 0] ** 2
    x, B = rng.normal(size=m), rng.normal(size=(rng.integers(1, 8), m))
    got = kernel_shap(f, x, B)
    ref = exact_shapley(f, x, B)
    np.testing.assert_allclose(got.values, ref.values, atol=1e-8)
    assert abs(got.values.sum() + got.base_value - got.instance_output) <= EFFICIENCY_TOL


def test_sampled_mode_approaches_exact(rng):
    m = 12
    W = rng.normal(size=(m, 3))
    f = lambda X: np.sin(np.atleast_2d(X) @ W).sum(axis=1)
    x, B = rng.normal(size=m), rng.normal(size=(5, m))
    ref = kernel_shap(f, x, B, ExplainerConfig("exact"))
    approx = kernel_shap(f, x, B, ExplainerConfig("sampled", coalition_budget=3000, seed=3))
    assert np.abs(approx.values - ref.values).max() < 0.05 * np.abs(ref.values).max()
    assert abs(approx.values.sum() - ref.values.sum()) < 1e-9


def test_sampled_coalitions_are_paired_and_weighted():
    masks, w = sample_coalitions(8, 200, np.random.default_rng(0))
    assert len(masks) <= 200
    present = {tuple(r) for r in masks}
    assert len(present) == len(masks)
    assert all(tuple(~r) in present for r in masks)
    # sizes 1 and 7 (16 rows) and 2 and 6 (56 rows) fit and are enumerated at kernel weight
    sizes = masks.sum(axis=1)
    assert (sizes == 2).sum() == 28
    np.testing.assert_allclose(w[sizes == 2], kernel_weight(8, 2))
    # the sampled remainder carries exactly the remaining kernel mass
    mid = (sizes >= 3) & (sizes <= 5)
    expected = sum(math.comb(8, k) * kernel_weight(8, k) for k in (3, 4, 5))
    assert w[mid].sum() == pytest.approx(expected)


def test_sampled_budget_covering_lattice_is_exact():
    masks, w = sample_coalitions(4, 14, np.random.default_rng(0))
    ref_masks, ref_w = all_coalitions(4)
    np.testing.assert_array_equal(masks, ref_masks)
    np.testing.assert_array_equal(w, ref_w)


def test_config_checks():
    with pytest.raises(ExplainError):
        ExplainerConfig("exact").check(17)
    with pytest.raises(ExplainError):
        ExplainerConfig("sampled", coalition_budget=10).check(6)
    with pytest.raises(ValueError):
        ExplainerConfig("lime")
    assert ExplainerConfig.auto(3).mode == "exact"
    assert ExplainerConfig.auto(40).mode == "sampled"


def test_explain_set_matches_per_row(small_split, small_sample):
    model = zoo.train(zoo.PipelineConfig(1, "gradient-boosted-trees", "none", {"n_estimators": 20}), small_split.train)
    shap = explain_set(model, small_split, small_sample)
    assert shap.values.shape == (small_sample.eval_size, 3)
    B = small_split.train.matrix[list(small_sample.background_rows)]
    for i in (0, 7):
        x = small_split.test.matrix[small_sample.eval_rows[i]]
        ref = exact_shapley(model.predict_proba, x, B)
        np.testing.assert_allclose(shap.values[i], ref.values, atol=1e-9)


def test_explain_set_worker_invariant(small_split, small_sample):
    model = zoo.train(zoo.PipelineConfig(1, "random-forest", "none", {"n_estimators": 10}), small_split.train)
    a = explain_set(model, small_split, small_sample, workers=1)
    b = explain_set(model, small_split, small_sample, workers=3)
    np.testing.assert_array_equal(a.values, b.values)
    cfg = ExplainerConfig("sampled", coalition_budget=6, seed=1)
    c = explain_set(model, small_split, small_sample, cfg, workers=1)
    d = explain_set(model, small_split, small_sample, cfg, workers=2)
    np.testing.assert_array_equal(c.values, d.values)


def test_shap_csv(tmp_path, small_split, small_sample):
    model = zoo.train(zoo.PipelineConfig(1, "logistic-regression"), small_split.train)
    shap = explain_set(model, small_split, small_sample)
    shap.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "eval_row,f0,f1,f2,base_value"
    assert len(lines) == small_sample.eval_size + 1


def test_oracle_weights_sum_to_one():
    m = 5
    total = sum(math.comb(m - 1, s) * math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m)
                for s in range(m))
    assert total == pytest.approx(1.0)
