"""External clustering validation indices and rank-based significance tests.

All five indices are computed from one contingency table. Predicted noise
(label -1) is scored as an ordinary cluster, so labelling everything as
noise is penalised like lumping everything together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import InvalidInput


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # (classes, clusters), int64

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T.copy())


def _codes(labels):
    # ids in order of first occurrence
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse.ravel()], first.size


def contingency(labels_true, labels_pred) -> ContingencyTable:
    t = np.asarray(labels_true).ravel()
    p = np.asarray(labels_pred).ravel()
    if t.shape != p.shape:
        raise InvalidInput(f"label arrays differ in length: {t.size} vs {p.size}")
    if t.size == 0:
        raise InvalidInput("labels must be non-empty")
    ti, r = _codes(t)
    pi, s = _codes(p)
    counts = np.bincount(ti * s + pi, minlength=r * s).reshape(r, s)
    return ContingencyTable(counts.astype(np.int64))


def _as_table(table_or_true, labels_pred=None) -> ContingencyTable:
    if labels_pred is not None:
        return contingency(table_or_true, labels_pred)
    return table_or_true


def _comb2_sum(values) -> int:
    v = np.asarray(values, dtype=np.int64)
    return int(sum(int(x) * (int(x) - 1) // 2 for x in v[v > 1]))


def _both_trivial(t: ContingencyTable) -> bool:
    r, s = t.counts.shape
    n = t.n
    return (r == 1 and s == 1) or (r == n and s == n)


def ari(table, labels_pred=None) -> float:
    """Adjusted Rand index (Hubert & Arabie)."""
    t = _as_table(table, labels_pred)
    n = t.n
    total = n * (n - 1) // 2
    sum_ij = _comb2_sum(t.counts.ravel())
    sum_a = _comb2_sum(t.row_sums)
    sum_b = _comb2_sum(t.col_sums)
    # scaled by 2*total to stay in exact integers
    numer = 2 * total * sum_ij - 2 * sum_a * sum_b
    denom = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if denom == 0:
        return 1.0
    return numer / denom


def _entropy(sums, n) -> float:
    p = sums[sums > 0] / n
    return float(-np.sum(p * np.log(p)))


def mutual_info(t: ContingencyTable) -> float:
    n = t.n
    nz = t.counts > 0
    nij = t.counts[nz].astype(np.float64)
    a = t.row_sums.astype(np.float64)
    b = t.col_sums.astype(np.float64)
    outer = np.outer(a, b)[nz]
    mi = float(np.sum(nij / n * (np.log(nij) + math.log(n) - np.log(outer))))
    return max(mi, 0.0)


def nmi(table, labels_pred=None) -> float:
    """Normalised mutual information, arithmetic-mean normalisation."""
    t = _as_table(table, labels_pred)
    if _both_trivial(t):
        return 1.0
    h_true = _entropy(t.row_sums, t.n)
    h_pred = _entropy(t.col_sums, t.n)
    norm = 0.5 * (h_true + h_pred)
    if norm == 0.0:
        return 1.0
    return min(mutual_info(t) / norm, 1.0)


def expected_mutual_info(t: ContingencyTable) -> float:
    """Expected MI under the permutation model (exact hypergeometric sum)."""
    n = t.n
    a = t.row_sums.astype(np.int64)
    b = t.col_sums.astype(np.int64)
    gln_a = gammaln(a + 1)
    gln_b = gammaln(b + 1)
    gln_na = gammaln(n - a + 1)
    gln_nb = gammaln(n - b + 1)
    gln_n = gammaln(n + 1)
    emi = 0.0
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            term1 = nij / n * (np.log(nij) + math.log(n) - math.log(ai) - math.log(bj))
            log_p = (gln_a[i] + gln_b[j] + gln_na[i] + gln_nb[j] - gln_n
                     - gammaln(nij + 1) - gammaln(ai - nij + 1)
                     - gammaln(bj - nij + 1) - gammaln(n - ai - bj + nij + 1))
            emi += float(np.sum(term1 * np.exp(log_p)))
    return emi


def ami(table, labels_pred=None) -> float:
    """Adjusted mutual information, arithmetic-mean normalisation."""
    t = _as_table(table, labels_pred)
    if _both_trivial(t):
        return 1.0
    mi = mutual_info(t)
    emi = expected_mutual_info(t)
    h_mean = 0.5 * (_entropy(t.row_sums, t.n) + _entropy(t.col_sums, t.n))
    denom = h_mean - emi
    eps = np.finfo(np.float64).eps
    if abs(denom) < eps:
        denom = eps if denom >= 0 else -eps
    return (mi - emi) / denom


def homogeneity_completeness_v(table, labels_pred=None):
    t = _as_table(table, labels_pred)
    if _both_trivial(t):
        return 1.0, 1.0, 1.0
    h_true = _entropy(t.row_sums, t.n)
    h_pred = _entropy(t.col_sums, t.n)
    mi = mutual_info(t)
    h = mi / h_true if h_true else 1.0
    c = mi / h_pred if h_pred else 1.0
    v = 2.0 * h * c / (h + c) if h + c else 0.0
    return h, c, v


def v_measure(table, labels_pred=None) -> float:
    """V-measure with beta=1."""
    return homogeneity_completeness_v(table, labels_pred)[2]


def fowlkes_mallows(table, labels_pred=None) -> float:
    t = _as_table(table, labels_pred)
    tp = _comb2_sum(t.counts.ravel())
    true_pairs = _comb2_sum(t.row_sums)
    pred_pairs = _comb2_sum(t.col_sums)
    if true_pairs == 0 and pred_pairs == 0:
        return 1.0
    if tp == 0:
        return 0.0
    return tp / math.sqrt(true_pairs * pred_pairs)


def all_scores(labels_true, labels_pred) -> dict:
    """The five indices keyed ``ari, nmi, ami, v_measure, fmi``."""
    t = contingency(labels_true, labels_pred)
    return {
        "ari": ari(t),
        "nmi": nmi(t),
        "ami": ami(t),
        "v_measure": v_measure(t),
        "fmi": fowlkes_mallows(t),
    }


def friedman_test(score_matrix):
    """Friedman chi-square over a (datasets x algorithms) score matrix.

    Ranks within each dataset use average ranks for ties, and the statistic
    carries the usual tie correction. Returns ``(statistic, p_value)``.
    """
    x = np.asarray(score_matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise InvalidInput("friedman_test needs at least two algorithms (columns)")
    if x.shape[0] < 2:
        raise InvalidInput("friedman_test needs at least two datasets (rows)")
    n, k = x.shape
    ranks = np.apply_along_axis(stats.rankdata, 1, x)
    rank_sums = ranks.sum(axis=0)
    ssb = float(np.sum((rank_sums - n * (k + 1) / 2.0) ** 2))
    if ssb == 0.0:
        return 0.0, 1.0
    ties = 0.0
    for row in x:
        _, cnt = np.unique(row, return_counts=True)
        ties += float(np.sum(cnt**3 - cnt))
    correction = 1.0 - ties / (n * (k**3 - k))
    stat = 12.0 * ssb / (n * k * (k + 1)) / correction
    return stat, float(stats.chi2.sf(stat, k - 1))


def _exact_signed_rank_counts(doubled_ranks) -> np.ndarray:
    """Number of sign patterns giving each value of 2*W+."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(differences, exact_max_n: int = 20):
    """Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped and tied magnitudes share average ranks.
    Up to ``exact_max_n`` non-zero differences the null distribution is
    enumerated exactly; beyond that a tie-corrected normal approximation with
    continuity correction is used. Returns ``(statistic, p_value)`` where the
    statistic is ``min(W+, W-)``.
    """
    d = np.asarray(differences, dtype=np.float64).ravel()
    if d.size == 0:
        raise InvalidInput("wilcoxon_signed_rank needs at least one difference")
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return 0.0, 1.0
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = n * (n + 1) / 2.0
    w_minus = total - w_plus
    stat = min(w_plus, w_minus)

    if n <= exact_max_n:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _exact_signed_rank_counts(doubled)
        target = int(round(2 * stat))
        tail = int(sum(counts[: target + 1]))
        p = 2 * tail / 2**n
        return stat, float(min(1.0, p))

    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    mean = total / 2.0
    if var <= 0:
        return stat, 1.0
    z = (abs(stat - mean) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    return stat, float(min(1.0, 2.0 * stats.norm.sf(z)))
