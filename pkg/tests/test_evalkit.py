import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costconv.evalkit import (
    EvalError,
    assign_bucket,
    bonferroni,
    classification_metrics,
    default_penalty_matrix,
    evaluate,
    fit_buckets,
    kfold_split,
    mape,
    paired_ttest,
    penalty_error,
    read_penalty_matrix,
    significance_table,
    t_two_sided_p,
    write_penalty_matrix,
    write_report_csv,
)

from .oracles import equal_dollar_sweep, mape_scalar, t_statistic

# reference t and two-sided p computed with mpmath at 40 digits
T_REFERENCES = [
    ([0.61, 0.55, 0.72, 0.58, 0.66, 0.49, 0.70, 0.63],
     [0.80, 0.71, 0.77, 0.69, 0.90, 0.62, 0.85, 0.74],
     -7.0391064495320098, 0.00020434515411950764),
    ([1.2, 0.9, 1.4, 1.1, 1.0], [1.1, 1.0, 1.2, 1.15, 0.92],
     0.85185185185185185, 0.44229326406130193),
    ([3.0, 2.5, 2.8, 3.3, 2.9, 3.1, 2.7, 3.0, 2.6, 3.2, 2.95, 3.05, 2.85, 3.15, 2.75, 3.0, 2.9, 3.1, 2.8, 3.2],
     [2.0, 2.6, 1.9, 2.2, 2.4, 2.1, 2.3, 2.5, 1.8, 2.7, 2.05, 2.35, 2.15, 2.45, 1.95, 2.25, 2.55, 2.0, 2.3, 2.2],
     10.52646164849308, 2.2886540113611172e-9),
]

# two-sided critical values from a printed t table
T_TABLE = [(4, 2.7764451051977987, 0.05), (9, 2.2621571627409915, 0.05), (19, 2.8609346064649, 0.01),
           (19, 2.093024054408263, 0.05), (1, 12.706204736174696, 0.05)]


# -- MAPE ------------------------------------------------------------------


@pytest.mark.parametrize("a,p,want", [([100], [101], 0.0), ([0], [3], 2.0), ([99], [51], 0.49)])
def test_mape_examples(a, p, want):
    assert mape(a, p) == pytest.approx(want, abs=1e-15)


def test_mape_denominator_mode():
    assert mape([100], [100], "denominator") == 0.0
    assert mape([0], [3], "denominator") == 3.0


def test_mape_errors():
    with pytest.raises(EvalError):
        mape([], [])
    with pytest.raises(EvalError):
        mape([1, 2], [1])


@given(st.lists(st.tuples(st.floats(0, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=30))
def test_mape_matches_scalar_and_is_order_free(pairs):
    a, p = map(list, zip(*pairs))
    assert mape(a, p) == pytest.approx(mape_scalar(a, p), rel=1e-12, abs=1e-12)
    assert mape(a[::-1], p[::-1]) == pytest.approx(mape(a, p), rel=1e-12, abs=1e-12)


# -- buckets ---------------------------------------------------------------


def test_equal_costs_one_per_bucket():
    s = fit_buckets([10] * 5)
    assert sorted(s.membership.tolist()) == [1, 2, 3, 4, 5]


def test_skewed_population():
    s = fit_buckets([1, 1, 1, 1, 16])
    assert s.membership.tolist() == [1, 1, 1, 1, 2]
    assert assign_bucket(16, s) == 2 and assign_bucket(1, s) == 1


def test_doubling_keeps_membership():
    c = np.random.default_rng(0).lognormal(6, 1.5, 300)
    np.testing.assert_array_equal(fit_buckets(c).membership, fit_buckets(2 * c).membership)


def test_degenerate_population():
    with pytest.raises(EvalError, match="degenerate"):
        fit_buckets([0] * 10)
    with pytest.raises(EvalError):
        fit_buckets([1, 2, 3])


def test_assign_tie_rule():
    s = fit_buckets(np.arange(1, 101))
    c1, c2, _, c4 = s.cutoffs
    assert assign_bucket(c1 - 0.5, s) == 1
    assert assign_bucket(c2, s) == 2
    assert assign_bucket(c2 + 1e-9, s) == 3
    assert assign_bucket(c4 + 1, s) == 5
    np.testing.assert_array_equal(assign_bucket([0, c2, 1e9], s), [1, 2, 5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 500), min_size=5, max_size=60).filter(lambda c: sum(c) > 0))
def test_membership_matches_sweep_oracle(costs):
    s = fit_buckets(costs)
    assert s.membership.tolist() == equal_dollar_sweep(costs)
    assert np.all(np.diff(s.cutoffs) >= 0)


def test_dollar_balance_smooth_population():
    for seed in range(10):
        c = np.random.default_rng(seed).gamma(2.0, 500.0, 600)
        s = fit_buckets(c)
        sums = np.array([c[s.membership == b].sum() for b in range(1, 6)])
        assert np.all(np.abs(sums - c.sum() / 5) <= c.max())


# -- classification and penalty ---------------------------------------------


def test_identical_lists_are_perfect():
    b = [1, 2, 3, 4, 5, 3]
    m = classification_metrics(b, b)
    assert m.accuracy == 1 and m.recall == [1.0] * 5 and m.precision == [1.0] * 5


def test_all_predicted_lowest():
    m = classification_metrics([1, 2, 3, 4, 5] * 4, [1] * 20)
    assert m.accuracy == 0.2
    assert m.recall == [1.0, 0.0, 0.0, 0.0, 0.0]
    assert m.precision == [0.2, None, None, None, None]


def test_single_element():
    assert classification_metrics([3], [4]).accuracy == 0.0
    with pytest.raises(EvalError):
        classification_metrics([1, 2], [1])


@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5)), min_size=1, max_size=50))
def test_confusion_identities(pairs):
    a, p = zip(*pairs)
    m = classification_metrics(a, p)
    correct = sum(x == y for x, y in pairs)
    assert sum(n * r for n, r in zip(m.actual_counts, m.recall) if r is not None) == pytest.approx(correct)
    assert sum(n * q for n, q in zip(m.predicted_counts, m.precision) if q is not None) == pytest.approx(correct)


def test_penalty_examples():
    P = np.abs(np.subtract.outer(np.arange(5), np.arange(5))).astype(float)
    overall, per = penalty_error([1, 5], [2, 3], P)
    assert overall == 1.5 and per == [1.0, None, None, None, 2.0]
    assert penalty_error([1, 5], [2, 3], 2 * P)[0] == 3.0
    assert penalty_error([1, 2, 3], [1, 2, 3])[0] == 0.0


def test_default_penalty_doubles_underestimates():
    P = default_penalty_matrix()
    assert P[4, 0] == 8 and P[0, 4] == 4 and np.all(np.diag(P) == 0)


def test_penalty_matrix_validation_and_file(tmp_path):
    bad = default_penalty_matrix()
    bad[2, 2] = 1
    with pytest.raises(EvalError):
        penalty_error([1], [1], bad)
    path = tmp_path / "p.tsv"
    write_penalty_matrix(default_penalty_matrix(), path)
    np.testing.assert_array_equal(read_penalty_matrix(path), default_penalty_matrix())


# -- folds and tests ---------------------------------------------------------


@pytest.mark.parametrize("n,k", [(20, 20), (1500, 20), (103, 7)])
def test_folds_partition(n, k):
    folds = kfold_split(n, k, seed=3)
    assert len(folds) == k
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    with pytest.raises(EvalError):
        kfold_split(5, 6)


@pytest.mark.parametrize("a,b,t,p", T_REFERENCES)
def test_ttest_references(a, b, t, p):
    r = paired_ttest(a, b)
    assert r.t == pytest.approx(t, abs=1e-6)
    assert r.p == pytest.approx(p, abs=1e-6)
    assert r.t == pytest.approx(t_statistic(a, b), rel=1e-12)


@pytest.mark.parametrize("df,t,p", T_TABLE)
def test_t_table(df, t, p):
    assert t_two_sided_p(t, df) == pytest.approx(p, abs=1e-6)
    assert t_two_sided_p(-t, df) == pytest.approx(p, abs=1e-6)


def test_ttest_antisymmetry():
    rng = np.random.default_rng(1)
    a, b = rng.random(20), rng.random(20)
    assert paired_ttest(a, b).t == -paired_ttest(b, a).t
    assert paired_ttest(a, b).p == paired_ttest(b, a).p


def test_ttest_no_difference():
    r = paired_ttest([1, 2, 3], [1, 2, 3])
    assert r.no_difference and r.p is None
    assert bonferroni([r.p]) == [False]


def test_ttest_tiny_jitter_is_significant():
    jitter = np.array([1e-6, -1e-6, 2e-6, -2e-6])
    r = paired_ttest(np.ones(4) + jitter, np.zeros(4))
    assert r.p < 1e-6
    assert bonferroni([r.p], m=5) == [True]


def test_bonferroni_threshold():
    assert bonferroni([0.02, 0.0099999, 0.01], alpha=0.05, m=5) == [False, True, False]
    assert bonferroni([0.02, 0.03]) == [True, False]  # m defaults to the number of p-values


def test_significance_table_and_csv(tmp_path):
    rng = np.random.default_rng(0)
    actual = rng.gamma(2, 500, 200)
    s = fit_buckets(actual)
    folds = kfold_split(200, 10, seed=0)
    good = evaluate("good", actual, actual * 1.01 + 1, s, folds)
    bad = evaluate("bad", actual, np.full(200, actual.mean()), s, folds)
    rows = significance_table(good, [bad])
    assert rows[0][0] == "good vs bad" and rows[0][1] < 0 and rows[0][3]
    assert sum(good.bucket_counts) == 200
    write_report_csv([good, bad], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "method,bucket,metric,value"
    assert len(lines) == 1 + 2 * (6 + 5 * 5)
