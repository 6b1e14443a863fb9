"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

import oracles
from adabox import protocols as P
from adabox.datasets import GeneratorSpec, generate, resize
from adabox.dbscan import DBSCANParams, core_mask, dbscan
from adabox.metrics import (ami, ari, contingency, fowlkes_mallows, friedman_test, nmi, v_measure,
                            wilcoxon_signed_rank)
from adabox.pipeline import AdaBoxParams, fit, transfer_params

METRICS = {"ari": ari, "nmi": nmi, "ami": ami, "v_measure": v_measure, "fmi": fowlkes_mallows}
CORPUS_SIZE = 1200


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def label_corpus():
    corpus = list(oracles.random_label_pairs(CORPUS_SIZE, max_n=12, seed=2024))
    # a few hand-picked degenerate shapes on top of the random draw
    corpus += [([0] * 5, [1] * 5), (list(range(6)), list(range(6))), ([0] * 4, [0, 1, 2, 3]),
               ([-1, -1, 0], [0, 0, 0]), ([3], [3])]
    return corpus


def test_c01_metric_oracles(label_corpus, verdict):
    t0 = time.perf_counter()
    worst = {k: 0.0 for k in METRICS}
    for t, p in label_corpus:
        table = contingency(t, p)
        for name, f in METRICS.items():
            worst[name] = max(worst[name], abs(f(table) - oracles.ORACLES[name](t, p)))
    elapsed = time.perf_counter() - t0
    ok = all(v <= 1e-9 for v in worst.values()) and elapsed < 10 and len(label_corpus) >= 1000
    verdict(1, ok, f"{len(label_corpus)} pairs, max |err| "
                   + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s")


def test_c02_nmi_equals_v_measure(label_corpus, verdict):
    gap = max(abs(nmi(t, p) - v_measure(t, p)) for t, p in label_corpus)
    verdict(2, gap < 1e-12, f"max |nmi - v_measure| = {gap:.1e} over {len(label_corpus)} pairs")


def test_c03_dbscan_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(1, 201))
        k = int(rng.integers(1, 5))
        centres = rng.uniform(0, 10, (k, 2))
        pts = centres[rng.integers(0, k, n)] + rng.normal(0, rng.uniform(0.2, 1.5), (n, 2))
        if rng.random() < 0.3:
            pts = np.round(pts * 4) / 4
        eps, min_pts = float(rng.uniform(0.1, 1.5)), int(rng.integers(1, 10))
        params = DBSCANParams(eps, min_pts)
        labels = dbscan(pts, params).labels
        core, clusters, _ = oracles.dbscan_oracle(pts, eps, min_pts)
        got_clusters = {frozenset(np.flatnonzero((labels == c) & core)) for c in set(labels[labels >= 0])}
        same = (np.array_equal(core_mask(pts, params), core) and got_clusters == clusters
                and oracles.same_partition(labels, oracles.dbscan_sequential(pts, eps, min_pts)))
        mismatches += not same
    elapsed = time.perf_counter() - t0
    verdict(3, mismatches == 0 and elapsed < 30, f"{mismatches}/100 mismatches, {elapsed:.1f}s")


def test_c04_affine_invariance(verdict):
    t0 = time.perf_counter()
    specs = [resize(s, 1000) for s in P.transfer_suite(range(4))]
    rng = np.random.default_rng(4)
    broken, db_changed, cases = 0, 0, 0
    for spec in specs:
        pts = generate(spec).points
        base = fit(pts).labels
        db_base = dbscan(pts, DBSCANParams(0.3, 5)).labels
        for a in (0.1, 1.0, 10.0, 1000.0):
            moved = pts * a + rng.uniform(-1e4, 1e4, 2)
            cases += 1
            broken += not np.array_equal(fit(moved).labels, base)
            db_changed += not np.array_equal(dbscan(moved, DBSCANParams(0.3, 5)).labels, db_base)
    elapsed = time.perf_counter() - t0
    ok = len(specs) == 20 and broken == 0 and db_changed >= 1 and elapsed < 60
    verdict(4, ok, f"adabox changed on {broken}/{cases} scaled copies, "
                   f"dbscan (eps fixed) changed on {db_changed}/{cases}, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def suite():
    return P.transfer_suite(range(10))


def test_c05_protocol_a(suite, verdict):
    t0 = time.perf_counter()
    rep = P.run_protocol_a(suite, sample_n=500, full_ns=[25_000])
    elapsed = time.perf_counter() - t0
    a = rep["aggregates"]["adabox"]["mean_delta_ari"]
    d = rep["aggregates"]["dbscan"]["mean_delta_ari"]
    ok = a >= -0.05 and d <= -0.20 and a - d >= 0.15 and elapsed < 300
    verdict(5, ok, f"adabox mean dARI {a:+.3f}, dbscan {d:+.3f}, gap {a - d:.3f}, {elapsed:.0f}s")


def test_c06_protocol_b(suite, verdict):
    t0 = time.perf_counter()
    rep = P.run_protocol_b(suite, ladder=(500, 5_000, 100_000), pass_drop=0.1)
    elapsed = time.perf_counter() - t0
    ada, db = rep["aggregates"]["adabox"], rep["aggregates"]["dbscan"]
    ada_rate, db_rate = ada["stages"][0]["pass_rate"], db["stages"][0]["pass_rate"]
    final = ada["mean_delta_at_final"]
    ok = ada_rate == 1.0 and final is not None and abs(final) <= 0.05 and db_rate <= 0.40 and elapsed < 900
    verdict(6, ok, f"adabox stage-1 pass {ada_rate:.0%}, mean dARI at 100K {final:+.3f}; "
                   f"dbscan stage-1 pass {db_rate:.0%}; {elapsed:.0f}s")


def test_c07_ablation(verdict):
    rep = P.run_ablation()
    targeted = rep["aggregates"]["targeted"]
    parts, ok = [], True
    for v in ("no_merging", "no_refinement", "fixed_grid"):
        s = targeted[v]
        below = s["mean_ari"] < s["full_mean_ari"]
        ok &= below and s["wilcoxon_p"] < 0.05
        parts.append(f"{v} {s['percent_change']:+.1f}% p={s['wilcoxon_p']:.4f}")
    order = " > ".join(rep["aggregates"]["effect_order"])
    verdict(7, ok, "; ".join(parts) + f"; effect order {order} "
                   "(reference ordering merging > fixed grid > refinement, logged only)")


def _best_time(pts, params, repeats=3):
    runs = []
    for _ in range(repeats):
        s = time.perf_counter()
        fit(pts, params)
        runs.append(time.perf_counter() - s)
    return min(runs)


def test_c08_scaling(verdict):
    # literal fixed params, plus density-transferred params as a second reading
    t0 = time.perf_counter()
    params = AdaBoxParams()
    fixed, moved = {}, {}
    for n in (10_000, 100_000):
        pts = generate(GeneratorSpec("blobs", n, 0)).points
        fixed[n] = _best_time(pts, params)
        moved[n] = _best_time(pts, transfer_params(params, 10_000, n))
    ratio = fixed[100_000] / fixed[10_000]
    ratio_t = moved[100_000] / moved[10_000]
    elapsed = time.perf_counter() - t0
    verdict(8, ratio <= 15 and ratio_t <= 15 and elapsed < 120,
            f"fixed params 10K {fixed[10_000] * 1e3:.0f} ms, 100K {fixed[100_000] * 1e3:.0f} ms, "
            f"ratio {ratio:.2f}; transferred params ratio {ratio_t:.2f}; {elapsed:.0f}s")


def _reports(threads):
    P._TUNE_CACHE.clear()
    specs = P.transfer_suite(range(2))
    return (
        P.to_json(P.run_protocol_a(specs, sample_n=500, full_ns=[15_000], threads=threads)),
        P.to_json(P.run_protocol_b(specs, ladder=(500, 2_000, 10_000), threads=threads)),
        P.to_json(P.run_ablation(P.ablation_suites(n=1000, per_suite=3), threads=threads)),
    )


def test_c09_determinism(verdict):
    first, second, threaded = _reports(1), _reports(1), _reports(4)
    ok = first == second == threaded
    verdict(9, ok, f"protocol A, B and ablation reports byte-identical over two runs and threads 1/4: {ok}")


def test_c10_statistical_tests(verdict):
    _, p = wilcoxon_signed_rank(np.arange(1, 11, dtype=float))
    stat, fp = friedman_test(np.tile([[0.7, 0.7, 0.7]], (10, 1)))
    ok = p == pytest.approx(1 / 512, rel=1e-12) and stat == 0 and fp == 1.0
    verdict(10, ok, f"wilcoxon n=10 all positive p={p:.10f} (1/512={1 / 512:.10f}); "
                    f"friedman identical columns stat={stat}, p={fp}")
