import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from adabox.errors import InvalidInput
from adabox.metrics import (all_scores, ami, ari, contingency, fowlkes_mallows, friedman_test,
                            homogeneity_completeness_v, nmi, v_measure, wilcoxon_signed_rank)

FUNCS = {"ari": ari, "nmi": nmi, "ami": ami, "v_measure": v_measure, "fmi": fowlkes_mallows}
labelings = st.integers(1, 14).flatmap(
    lambda n: st.tuples(st.lists(st.integers(-1, 4), min_size=n, max_size=n),
                        st.lists(st.integers(-1, 4), min_size=n, max_size=n)))


def test_contingency_examples():
    np.testing.assert_array_equal(contingency([0, 0, 1, 1], [0, 0, 1, 1]).counts, [[2, 0], [0, 2]])
    np.testing.assert_array_equal(contingency([0, 0, 1, 1], [0, 1, 0, 1]).counts, np.ones((2, 2)))
    t = contingency([0, 1, 2, 2], [-1, -1, -1, -1])
    assert t.counts.shape == (3, 1) and t.col_sums.tolist() == [4]
    assert t.n == 4
    with pytest.raises(InvalidInput):
        contingency([0, 1], [0])


def test_ari_examples():
    assert ari([0, 0, 1, 1], [5, 5, 7, 7]) == 1.0
    assert ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5, abs=1e-15)
    assert ari([0, 0, 1, 1], [0, 0, 0, 0]) == 0.0


def test_identical_partitions_score_one():
    t = [0, 0, 1, 2, 2, -1]
    for name, f in FUNCS.items():
        assert f(t, t) == pytest.approx(1.0, abs=1e-12), name


def test_nmi_and_fmi_examples():
    assert nmi([0, 0, 1, 1], [0, 1, 2, 3]) == pytest.approx(2 / 3, abs=1e-12)
    assert fowlkes_mallows([0, 0, 1, 1], [0, 0, 0, 0]) == pytest.approx(2 / np.sqrt(12), abs=1e-12)


def test_trivial_partitions():
    for name, f in FUNCS.items():
        assert f([0, 0, 0], [1, 1, 1]) == 1.0, name
        assert f([0, 1, 2], [2, 0, 1]) == pytest.approx(1.0), name
        assert f([7], [3]) == 1.0, name


def test_noise_is_an_ordinary_cluster():
    assert ari([-1, -1, 0, 0], [3, 3, -1, -1]) == 1.0


def test_all_scores_keys():
    s = all_scores([0, 0, 1, 1], [0, 0, 1, 2])
    assert set(s) == {"ari", "nmi", "ami", "v_measure", "fmi"}
    assert all(isinstance(v, float) for v in s.values())


def test_table_or_labels_accepted():
    t = contingency([0, 1, 1, 2], [0, 0, 1, 1])
    for f in FUNCS.values():
        assert f(t) == f([0, 1, 1, 2], [0, 0, 1, 1])


def test_oracle_agreement_sample():
    for t, p in oracles.random_label_pairs(300, seed=1):
        for name, f in FUNCS.items():
            assert abs(f(t, p) - oracles.ORACLES[name](t, p)) < 1e-9, (name, t, p)


@settings(max_examples=200, deadline=None)
@given(labelings)
def test_symmetry_and_identity(pair):
    t, p = pair
    for name, f in FUNCS.items():
        assert f(t, p) == pytest.approx(f(p, t), abs=1e-12), name
    assert abs(nmi(t, p) - v_measure(t, p)) < 1e-12
    h, c, v = homogeneity_completeness_v(t, p)
    assert 0 <= h <= 1 + 1e-12 and 0 <= c <= 1 + 1e-12


@settings(max_examples=150, deadline=None)
@given(labelings, st.permutations(range(-1, 5)))
def test_label_permutation_invariance(pair, perm):
    t, p = pair
    mapping = dict(zip(range(-1, 5), perm))
    q = [mapping[x] for x in p]
    for name, f in FUNCS.items():
        assert f(t, p) == pytest.approx(f(t, q), abs=1e-12), name


@settings(max_examples=150, deadline=None)
@given(labelings)
def test_ranges(pair):
    t, p = pair
    s = all_scores(t, p)
    assert -1 - 1e-12 <= s["ari"] <= 1 + 1e-12
    for k in ("nmi", "v_measure", "fmi"):
        assert -1e-12 <= s[k] <= 1 + 1e-12
    assert s["ami"] <= 1 + 1e-12


def test_friedman_identical_columns():
    assert friedman_test(np.ones((8, 3))) == (0.0, 1.0)


def test_friedman_unanimous_ranks():
    # rank sums 20, 40, 60 over 20 datasets: 12/(20*3*4) * 5600 - 3*20*4 = 40
    scores = np.tile([0.1, 0.5, 0.9], (20, 1)) + np.random.default_rng(0).uniform(0, 0.05, (20, 1))
    stat, p = friedman_test(scores)
    assert stat == pytest.approx(40.0, rel=1e-12)
    assert p == pytest.approx(np.exp(-20.0), rel=1e-9)
    assert p < 0.01


def test_friedman_alternating_two_algorithms():
    scores = np.array([[1, 0], [0, 1]] * 5, dtype=float)
    stat, p = friedman_test(scores)
    assert stat == pytest.approx(0.0) and p == pytest.approx(1.0)


def test_friedman_matches_scipy():
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = rng.integers(0, 4, (12, 4)).astype(float)
        ref = stats.friedmanchisquare(*m.T)
        stat, p = friedman_test(m)
        assert stat == pytest.approx(ref.statistic, rel=1e-10)
        assert p == pytest.approx(ref.pvalue, rel=1e-10)


def test_friedman_needs_two_columns():
    with pytest.raises(InvalidInput):
        friedman_test(np.ones((5, 1)))


def test_wilcoxon_examples():
    assert wilcoxon_signed_rank(np.zeros(6))[1] == 1.0
    stat, p = wilcoxon_signed_rank(np.arange(1, 11) * 0.1)
    assert stat == 0 and p == pytest.approx(1 / 512, rel=1e-12)
    assert wilcoxon_signed_rank([1, -1, 2, -2])[1] == pytest.approx(1.0)


def test_wilcoxon_exact_matches_scipy():
    rng = np.random.default_rng(5)
    for _ in range(40):
        n = int(rng.integers(1, 21))
        d = rng.normal(0.3, 1, n)
        ref = stats.wilcoxon(d, method="exact")
        stat, p = wilcoxon_signed_rank(d)
        assert stat == ref.statistic
        assert p == pytest.approx(ref.pvalue, rel=1e-10)


def test_wilcoxon_ties_enumerated():
    # with ties the exact law is over doubled average ranks; check by brute force
    from itertools import product
    d = np.array([1, 1, 2, -2, 3, 3, -3, 4.0])
    ranks = stats.rankdata(np.abs(d))
    w = min(ranks[d > 0].sum(), ranks[d < 0].sum())
    total = ranks.sum()
    hits = sum(1 for signs in product((0, 1), repeat=len(d))
               if min(s := float(np.dot(signs, ranks)), total - s) <= w + 1e-9)
    stat, p = wilcoxon_signed_rank(d)
    assert stat == w
    assert p == pytest.approx(hits / 2 ** len(d), rel=1e-12)


def test_wilcoxon_normal_approximation_matches_scipy():
    d = np.random.default_rng(6).normal(0.2, 1, 40)
    ref = stats.wilcoxon(d, method="approx", correction=True)
    stat, p = wilcoxon_signed_rank(d)
    assert stat == ref.statistic and p == pytest.approx(ref.pvalue, rel=1e-9)
