import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xhacking.shapley import ShapMatrix
from xhacking.summary import (ImportanceSummary, SlopeSummary, SlopeUndefined, dependence_slope, importance,
                              ols_line, relative_change, slope_sign, slope_summary, topple_check)
from xhacking.tabular import Dataset, ExplainSample, SplitDataset

finite = st.floats(-1e3, 1e3, allow_nan=False)
shap_arrays = st.integers(1, 6).flatmap(
    lambda m: arrays(np.float64, st.tuples(st.integers(1, 12), st.just(m)), elements=finite))


def summary(shares):
    shares = np.asarray(shares, dtype=float)
    return importance(shares[None, :])


def test_importance_example():
    s = importance(np.array([[1.0, -2.0], [-1.0, 2.0]]))
    np.testing.assert_allclose(s.mean_abs, [1, 2])
    np.testing.assert_allclose(s.shares, [1 / 3, 2 / 3])
    np.testing.assert_array_equal(s.ranks, [2, 1])
    assert not s.degenerate


def test_importance_all_zero_is_degenerate():
    s = importance(np.zeros((4, 3)))
    np.testing.assert_array_equal(s.shares, 0)
    assert s.degenerate
    np.testing.assert_array_equal(s.ranks, [1, 2, 3])


def test_importance_single_row():
    row = np.array([0.5, -0.25, 2.0])
    np.testing.assert_allclose(importance(row[None, :]).mean_abs, np.abs(row))


def test_ties_go_to_lower_index():
    np.testing.assert_array_equal(importance(np.array([[1.0, 3.0, 1.0, 3.0]])).ranks, [3, 1, 4, 2])


def test_importance_accepts_shap_matrix():
    m = ShapMatrix.from_array([[1.0, -3.0]], ("a", "b"))
    np.testing.assert_array_equal(importance(m).ranks, [2, 1])


def test_importance_round_trip():
    s = importance(np.array([[1.0, -2.0, 0.5]]))
    back = ImportanceSummary.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.shares, s.shares)
    np.testing.assert_array_equal(back.ranks, s.ranks)


@given(shap_arrays)
def test_shares_and_ranks_coherent(V):
    s = importance(V)
    m = V.shape[1]
    assert sorted(s.ranks.tolist()) == list(range(1, m + 1))
    if not s.degenerate:
        assert abs(s.shares.sum() - 1) < 1e-9
    order = sorted(range(m), key=lambda j: (-s.shares[j], j))
    assert [int(s.ranks[j]) for j in order] == list(range(1, m + 1))


def test_relative_change_examples():
    a = summary([0.5, 0.5])
    np.testing.assert_array_equal(relative_change(a, a), [0, 0])
    np.testing.assert_allclose(relative_change(a, summary([1.0, 0.0])), [-0.5, 0.5])


def test_relative_change_errors():
    with pytest.raises(ValueError):
        relative_change(summary([1, 2]), summary([1, 2, 3]))
    with pytest.raises(ValueError):
        relative_change(summary([1, 2]), summary([0, 0]))


@given(shap_arrays, st.data())
def test_relative_change_conserves_and_antisymmetric(V, data):
    W = data.draw(arrays(np.float64, V.shape, elements=finite))
    a, b = importance(V), importance(W)
    assume(not a.degenerate and not b.degenerate)
    d = relative_change(a, b)
    assert abs(d.sum()) < 1e-9
    np.testing.assert_array_equal(d, -relative_change(b, a))


def test_ols_examples():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    assert ols_line(x, x) == pytest.approx((1.0, 0.0))
    assert ols_line(x, np.full(4, 2.5)) == pytest.approx((0.0, 2.5))
    slope, intercept = ols_line(x, [0.0, 2.0, 4.0, 5.0])
    assert slope == pytest.approx(1.7, abs=1e-12) and intercept == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(SlopeUndefined):
        ols_line([1.0, 1.0], [0.0, 1.0])


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=30))
def test_ols_matches_sums_formula(points):
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    n = len(x)
    sxx = float(np.sum(x * x) - x.sum() ** 2 / n)
    assume(np.ptp(x) > 1e-3 and sxx > 1e-6 * max(1.0, float(np.sum(x * x))))
    sxy = float(np.sum(x * y) - x.sum() * y.sum() / n)
    slope, intercept = ols_line(x, y)
    scale = max(1.0, abs(sxy / sxx))
    assert abs(slope - sxy / sxx) <= 1e-9 * scale * max(1.0, float(np.abs(x).max()) ** 2)
    assert abs(intercept - (y.mean() - slope * x.mean())) <= 1e-6 * max(1.0, float(np.abs(y).max()))


def _toy_split(x_test):
    x_test = np.asarray(x_test, dtype=float)
    n = len(x_test)
    test = Dataset(np.column_stack([x_test, np.zeros(n)]), np.arange(n) % 2, ("x", "z"), "t")
    train = Dataset(np.zeros((2, 2)), [0, 1], ("x", "z"), "t")
    return SplitDataset(train, test, 0.5, 0), ExplainSample((0,), tuple(range(n)))


def test_dependence_slope_uses_eval_rows():
    split, sample = _toy_split([0, 1, 2, 3])
    shap = ShapMatrix.from_array(np.column_stack([[0.0, 2.0, 4.0, 5.0], [0.0, 0.0, 0.0, 0.0]]), ("x", "z"))
    s, b = dependence_slope(shap, split, sample, 0)
    assert s == pytest.approx(1.7) and b == pytest.approx(0.2)
    with pytest.raises(SlopeUndefined):
        dependence_slope(shap, split, sample, 1)
    summ = slope_summary(shap, split, sample)
    assert summ.signs.tolist() == [1, 0] and np.isnan(summ.slopes[1])
    back = SlopeSummary.from_dict(summ.to_dict())
    assert np.isnan(back.slopes[1]) and back.slopes[0] == summ.slopes[0]


def test_slope_sign_zero_band():
    assert slope_sign(5e-5) == 0 and slope_sign(-2e-4) == -1 and slope_sign(2e-4) == 1
    assert slope_sign(float("nan")) == 0
    assert slope_sign(0.5, zero_band=1.0) == 0


def test_topple_examples():
    base = summary([3.0, 2.0, 1.0, 0.5])
    assert not topple_check(base, summary([3.0, 2.0, 1.0, 0.5]), 0, 3)
    assert topple_check(base, summary([0.1, 2.0, 1.0, 0.5]), 0, 3)
    for j in range(4):
        assert not topple_check(base, summary([0.1, 2.0, 1.0, 0.5]), j, 4)
    assert not topple_check(base, summary([0.0, 0.0, 0.0, 0.0]), 0, 1)
    with pytest.raises(ValueError):
        topple_check(base, base, 0, 0)


@given(shap_arrays, st.floats(1e-3, 1e3), st.data())
def test_scale_covariance(V, c, data):
    m = V.shape[1]
    a, b = importance(V), importance(c * V)
    # scaling is monotone, so ranks only move if two magnitudes collapse into a tie
    assume(np.unique(a.mean_abs).size == m and np.unique(b.mean_abs).size == m)
    np.testing.assert_array_equal(a.ranks, b.ranks)
    j = data.draw(st.integers(0, m - 1))
    k = data.draw(st.integers(1, m))
    base = importance(np.ones((1, m)))
    assert topple_check(base, a, j, k) == topple_check(base, b, j, k)
    if V.shape[0] > 1:
        x = np.arange(V.shape[0], dtype=float)
        s1, _ = ols_line(x, V[:, 0])
        s2, _ = ols_line(x, c * V[:, 0])
        assert s2 == pytest.approx(c * s1, rel=1e-9, abs=1e-9)
