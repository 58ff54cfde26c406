import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costconv.baselines import (
    GbtConfig,
    StateInterval,
    SymbolicConfig,
    TirpMatcher,
    allen_relation,
    extract_intervals,
    fit_symbolic,
    gbt_fit,
    gbt_predict,
    karma,
    lego,
    mine_tirps,
    sax_discretize,
    select_rows,
    tirp_features,
)
from costconv.baselines.karmalego import write_tirps
from costconv.baselines.sax import abstract_entity, canonicalize
from costconv.claims import mini_taxonomy

from .oracles import brute_force_tirps, random_entities

I = StateInterval

# -- SAX and intervals --------------------------------------------------------


def test_sax_constant_series():
    assert sax_discretize([7.0] * 5) == ["b"] * 5


def test_sax_hand_example():
    assert sax_discretize([-10, 0, 10]) == ["a", "b", "d"]


def test_sax_breakpoints_are_right_closed():
    # z-scores of [-1, 1] are exactly -1 and 1; with 0.6745 breakpoints they fall in a and d
    assert sax_discretize([-1, 1]) == ["a", "d"]
    # a value at z = 0 goes to b, not c
    assert sax_discretize([-1, 0, 1])[1] == "b"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=24),
       st.floats(0.1, 100), st.floats(-1e3, 1e3))
def test_sax_affine_invariance(series, scale, shift):
    x = np.array(series)
    # skip series whose spread is pure round-off
    if 0 < x.std() < 1e-6 * max(1.0, np.abs(x).max()):
        return
    z = (x - x.mean()) / x.std() if x.std() > 0 else np.zeros_like(x)
    if np.any(np.min(np.abs(z[:, None] - np.array([-0.6745, 0, 0.6745])), axis=1) < 1e-9):
        return  # values sitting on a breakpoint may flip under rounding
    assert sax_discretize(scale * x + shift) == sax_discretize(x)


def test_sax_only_four_bins():
    with pytest.raises(ValueError):
        sax_discretize([1, 2], bins=3)


def test_extract_intervals_examples():
    assert extract_intervals(list("aaa")) == [I(0, "a", 0, 2)]
    assert extract_intervals(list("abba")) == [I(0, "a", 0, 0), I(0, "b", 1, 2), I(0, "a", 3, 3)]
    assert extract_intervals([]) == []


@given(st.lists(st.sampled_from("abcd"), max_size=30))
def test_intervals_are_maximal_and_reconstruct(symbols):
    ivs = extract_intervals(symbols, feature=3)
    rebuilt = [iv.symbol for iv in ivs for _ in range(iv.start, iv.end + 1)]
    assert rebuilt == symbols
    assert all(a.symbol != b.symbol and a.end + 1 == b.start for a, b in zip(ivs, ivs[1:]))


def test_abstract_entity_skips_empty_rows():
    m = np.zeros((3, 6))
    m[1] = [0, 0, 5, 0, 0, 0]
    ivs = abstract_entity(m, [0, 1, 2])
    assert {iv.feature for iv in ivs} == {1}
    assert len(abstract_entity(m, [0, 1, 2], skip_empty=False)) == len(ivs) + 2


# -- relations ---------------------------------------------------------------


@pytest.mark.parametrize("a,b,rel", [
    ((0, 2), (4, 5), "before"),
    ((0, 5), (1, 3), "contain"),
    ((0, 3), (2, 5), "overlap"),
    ((0, 2), (3, 4), "before"),
    ((0, 2), (2, 4), "overlap"),
    ((2, 4), (2, 3), "contain"),
])
def test_allen_examples(a, b, rel):
    assert allen_relation(I(0, "a", *a), I(1, "b", *b)) == rel


def test_allen_epsilon_widens_gap():
    assert allen_relation(I(0, "a", 0, 2), I(0, "b", 4, 5), epsilon=1) == "before"
    assert allen_relation(I(0, "a", 0, 2), I(0, "b", 4, 5), epsilon=2) == "overlap"


def test_allen_requires_canonical_order():
    with pytest.raises(ValueError):
        allen_relation(I(0, "a", 3, 4), I(0, "a", 0, 1))
    with pytest.raises(ValueError):
        allen_relation(I(0, "a", 0, 1), I(0, "a", 0, 4))  # equal start: longer first


@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from("ab"), st.integers(0, 10), st.integers(0, 4)),
                min_size=2, max_size=6))
def test_relation_trichotomy(raw):
    ivs = canonicalize([I(f, s, a, a + d) for f, s, a, d in raw])
    for i in range(len(ivs)):
        for j in range(i + 1, len(ivs)):
            a, b = ivs[i], ivs[j]
            held = [a.end < b.start, a.end >= b.start and b.end <= a.end, a.end >= b.start and b.end > a.end]
            assert sum(held) == 1
            assert allen_relation(a, b) == ("before", "contain", "overlap")[held.index(True)]


# -- karma / lego --------------------------------------------------------------


def test_karma_single_pair():
    (t,) = karma([[I(1, "a", 0, 1), I(2, "c", 3, 4)]], 0.6)
    assert t.states == ((1, "a"), (2, "c")) and t.relations == ("before",) and t.support == 1.0


def test_karma_support_threshold():
    pat = [I(0, "a", 0, 1), I(1, "b", 3, 4)]
    other = [I(2, "c", 0, 1), I(3, "d", 3, 4)]
    kept = karma([pat, pat, other], 0.6)
    assert [(t.states, round(t.support, 3)) for t in kept] == [(((0, "a"), (1, "b")), 0.667)]
    assert karma([pat, other, [I(4, "a", 0, 0), I(5, "a", 2, 2)]], 0.6) == []


def test_karma_needs_two_intervals():
    assert karma([[I(0, "a", 0, 3)], []], 0.1) == []


def test_lego_three_befores():
    ent = [I(0, "a", 0, 1), I(1, "b", 3, 4), I(2, "c", 6, 7)]
    tirps = mine_tirps([ent] * 4, 0.6, 3)
    top = [t for t in tirps if t.size == 3]
    assert len(top) == 1
    assert top[0].states == ((0, "a"), (1, "b"), (2, "c"))
    assert top[0].relations == ("before", "before", "before")
    assert top[0].support == 1.0


def test_lego_support_strictness():
    ent = [I(0, "a", 0, 1), I(1, "b", 3, 4), I(2, "c", 6, 7)]
    assert not [t for t in mine_tirps([ent, ent, ent[:2]], 1.0, 3) if t.size == 3]


def test_instances_satisfy_relations():
    rng = np.random.default_rng(5)
    ents = random_entities(rng)
    for t in mine_tirps(ents, 0.4, 3):
        for e, insts in t.instances.items():
            canon = canonicalize(ents[e])
            for inst in insts:
                ivs = [canon[p] for p in inst]
                assert tuple((iv.feature, iv.symbol) for iv in ivs) == t.states
                rels = tuple(allen_relation(ivs[i], ivs[j]) for j in range(1, t.size) for i in range(j))
                assert rels == t.relations
        assert t.support == len(t.instances) / len(ents)


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed):
    ents = random_entities(np.random.default_rng(1000 + seed))
    for sup in (0.4, 0.6, 1.0):
        got = {t.key: t.support for t in mine_tirps(ents, sup, 3)}
        assert got == pytest.approx(brute_force_tirps(ents, sup, 3))


def test_anti_monotone():
    ents = random_entities(np.random.default_rng(77))
    low = {t.key for t in mine_tirps(ents, 0.3, 3)}
    high = {t.key for t in mine_tirps(ents, 0.7, 3)}
    assert high <= low
    for states, rels in low:
        if len(states) == 3:
            assert (states[:2], rels[:1]) in low


def test_lego_continues_karma():
    ents = random_entities(np.random.default_rng(8))
    assert [t.key for t in lego(karma(ents, 0.5), ents, 0.5, 3)] == [t.key for t in mine_tirps(ents, 0.5, 3)]


def test_support_bounds():
    with pytest.raises(ValueError):
        karma([], 0.0)


def test_tirp_dump_format():
    ent = [I(0, "a", 0, 1), I(1, "b", 3, 4)]
    buf = io.StringIO()
    write_tirps(mine_tirps([ent], 1.0), buf)
    assert buf.getvalue() == "2\t0:a,1:b\tbefore\t1.0\n"


# -- features ----------------------------------------------------------------


def test_features_absent_is_zero():
    tirps = mine_tirps([[I(0, "a", 0, 1), I(1, "b", 3, 4)]], 1.0)
    np.testing.assert_array_equal(tirp_features(tirps, [I(5, "d", 0, 3)]), [0.0])


def test_feature_single_span():
    tirps = mine_tirps([[I(0, "a", 2, 4), I(1, "b", 6, 7)]], 1.0)
    np.testing.assert_array_equal(tirp_features(tirps, [I(0, "a", 2, 4), I(1, "b", 6, 7)]), [6.0])


def test_feature_mean_of_two_instances():
    tirps = mine_tirps([[I(0, "a", 0, 0), I(1, "b", 2, 2)]], 1.0)
    # instances (0..0, 2..3) span 4 and (0..0, 5..5) span 6
    ent = [I(0, "a", 0, 0), I(1, "b", 2, 3), I(1, "b", 5, 5)]
    np.testing.assert_array_equal(tirp_features(tirps, ent), [5.0])


def test_matcher_agrees_with_mining_instances():
    ents = random_entities(np.random.default_rng(21))
    tirps = mine_tirps(ents, 0.4, 3)
    matcher = TirpMatcher(tirps)
    for e, ent in enumerate(ents):
        found = matcher.instances(ent)
        for col, t in enumerate(tirps):
            assert sorted(found.get(col, [])) == sorted(t.instances.get(e, []))


# -- gradient boosting ----------------------------------------------------------


def test_gbt_zero_trees_is_mean():
    X = np.random.default_rng(0).normal(size=(20, 3))
    y = np.arange(20.0)
    m = gbt_fit(X, y, GbtConfig(n_trees=0))
    np.testing.assert_array_equal(m.predict(X), np.full(20, y.mean()))


def test_gbt_no_features_is_mean():
    m = gbt_fit(np.zeros((4, 0)), [1.0, 2.0, 3.0, 6.0])
    assert gbt_predict(m, np.zeros(0)) == 3.0


def test_gbt_single_stump_is_exact():
    X = np.array([[-3.0], [-2], [-1], [1], [2], [3]])
    y = np.where(X[:, 0] < 0, -1.0, 1.0)
    m = gbt_fit(X, y, GbtConfig(n_trees=1, max_depth=1, shrinkage=1.0, min_leaf=1))
    np.testing.assert_array_equal(m.predict(X), y)
    assert gbt_predict(m, [-0.1]) == -1.0 and gbt_predict(m, [0.1]) == 1.0


def test_gbt_min_leaf_respected():
    X = np.arange(10.0)[:, None]
    y = np.r_[np.zeros(9), 100.0]
    m = gbt_fit(X, y, GbtConfig(n_trees=1, max_depth=1, shrinkage=1.0, min_leaf=5))
    # the outlier cannot be isolated, the best split is 5 | 5
    assert len(np.unique(m.predict(X))) == 2
    assert m.predict(X)[:5].tolist() == [0.0] * 5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.0))
def test_gbt_training_loss_monotone(seed, shrinkage):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60) + X[:, 0] ** 2
    losses = [np.mean((gbt_fit(X, y, GbtConfig(n_trees=n, shrinkage=shrinkage)).predict(X) - y) ** 2)
              for n in range(0, 12, 2)]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))


def test_gbt_thresholds_finite():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(100, 4))
    m = gbt_fit(X, X[:, 1] * 3, GbtConfig(n_trees=5))
    assert all(np.isfinite(t.threshold).all() for t in m.trees)


def test_gbt_rejects_bad_input():
    with pytest.raises(ValueError):
        gbt_fit(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        gbt_fit(np.array([[np.nan]]), [1.0])


def test_gbt_log_target():
    X = np.arange(40.0)[:, None]
    y = np.where(X[:, 0] < 20, 100.0, 10000.0)
    m = gbt_fit(X, y, GbtConfig(n_trees=60, shrinkage=0.3), target_transform="log1p")
    np.testing.assert_allclose(m.predict(X), y, rtol=1e-3)


# -- pipeline ------------------------------------------------------------------


def test_select_rows_default_subset():
    tax = mini_taxonomy()
    X = np.zeros((5, tax.n_features, 4))
    med = tax.rows("medical")
    X[:, med[7], :] = 1
    X[:3, med[2], 0] = 1
    rows = select_rows(tax, X, top_medical=3)
    assert len(rows) == 2 + 7 + 3
    assert med[7] in rows and med[2] in rows
    assert med[0] in rows  # activity tie broken by lower index


def test_symbolic_pipeline_learns_signal():
    tax = mini_taxonomy()
    rng = np.random.default_rng(0)
    X = np.zeros((200, tax.n_features, 24))
    early = rng.random(200) < 0.5
    for i in range(200):
        when = slice(0, 6) if early[i] else slice(18, 24)
        X[i, 0, when] = 100 + rng.random(6)
        X[i, 0] += rng.random(24)
    y = np.where(early, 100.0, 5000.0)
    model = fit_symbolic(X[:150], y[:150], tax, SymbolicConfig(min_vertical_support=0.3))
    pred = model.predict(X[150:])
    assert np.mean(np.abs(pred - y[150:]) / y[150:]) < 0.1
