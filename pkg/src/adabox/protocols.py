"""Parameter-transfer protocols and the ablation runner.

Protocol A tunes each algorithm on a small draw and applies the result once
to a much larger draw of the same generator. Protocol B walks a ladder of
sizes and stops an algorithm at the first rung where its ARI drops by more
than ``pass_drop``. The ablation runner compares AdaBox against three
variants, each with one component disabled.

Reports are plain dicts that serialise to JSON deterministically; per-dataset
work may run in a process pool without changing a byte of the output.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .datasets import GeneratorSpec, generate, resize
from .dbscan import DBSCANParams, ParameterGrid, dbscan, eps_quantile_grid, grid_search_tune
from .errors import InvalidInput
from .grid import BoundingBox
from .metrics import ari, wilcoxon_signed_rank
from .pipeline import AdaBoxParams, EngineConfig, fit, transfer_params

log = logging.getLogger(__name__)

REPORT_VERSION = 1
SUITE_FAMILIES = ("blobs_with_noise", "moons", "rings", "anisotropic", "varied_density")
SUITE_NOISE = 0.05
VARIANTS = ("full", "no_merging", "no_refinement", "fixed_grid")
FIXED_BOX = BoundingBox(0.0, 0.0, 100.0, 100.0)


@dataclass(frozen=True)
class Algorithm:
    name: str
    fit: Callable
    search_space: Callable
    transfer: Callable


def adabox_space(points) -> ParameterGrid:
    return ParameterGrid(
        {
            "n_boxes": [20, 30],
            "min_density": [2.0, 3.0, 5.0],
            "regular_threshold_factor": [0.3, 0.5],
            "merge_adjacent": [True],
            "refinement_sigma": [0.5, 1.0],
            "min_cluster_size": [5, 10],
        },
        AdaBoxParams,
    )


def dbscan_space(points) -> ParameterGrid:
    return eps_quantile_grid(
        points,
        quantiles=[0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15],
        min_pts=[3, 4, 5, 8, 12],
    )


def _identity_transfer(params, n_sample, n_full):
    return params


ALGORITHMS = {
    "adabox": Algorithm("adabox", fit, adabox_space, transfer_params),
    "dbscan": Algorithm("dbscan", dbscan, dbscan_space, _identity_transfer),
}


def transfer_suite(seeds: Sequence[int] = range(10), n: int = 500) -> list[GeneratorSpec]:
    """The five-family transfer suite, one dataset per (family, seed)."""
    return [
        GeneratorSpec(fam, n, s, noise_fraction=None if fam == "blobs_with_noise" else SUITE_NOISE)
        for s in seeds
        for fam in SUITE_FAMILIES
    ]


def _resolve(algorithms):
    out = []
    for a in algorithms:
        if isinstance(a, str):
            if a not in ALGORITHMS:
                raise InvalidInput(f"unknown algorithm {a!r}")
            a = ALGORITHMS[a]
        out.append(a)
    return out


def _params_dict(params) -> dict:
    return {k: v for k, v in asdict(params).items()}


_TUNE_CACHE: dict = {}


def tune_on_sample(spec: GeneratorSpec, algo: Algorithm, sample_n: int):
    """Grid-search ``algo`` on a ``sample_n`` draw of ``spec`` (memoised)."""
    key = (spec, algo.name, sample_n)
    hit = _TUNE_CACHE.get(key)
    if hit is not None:
        return hit
    sample = generate(resize(spec, sample_n))
    res = grid_search_tune(sample.points, sample.labels_true, algo.search_space(sample.points), algo.fit)
    # a configuration that finds no cluster at all counts as a tuning failure
    labels = algo.fit(sample.points, res.params).labels
    failed = not np.any(labels >= 0)
    out = (res.params, 0.0 if failed else res.score, failed)
    _TUNE_CACHE[key] = out
    return out


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _score_at(spec, algo, params, sample_n, n):
    data = generate(resize(spec, n))
    p = algo.transfer(params, sample_n, n)
    return float(ari(data.labels_true, algo.fit(data.points, p).labels))


def _percent(delta, base):
    return 100.0 * delta / base if base != 0 else None


def _protocol_a_task(args):
    spec, names, sample_n, full_n = args
    records = []
    for algo in _resolve(names):
        params, sample_ari, failed = tune_on_sample(spec, algo, sample_n)
        full_ari = sample_ari if full_n == sample_n and not failed else _score_at(spec, algo, params, sample_n, full_n)
        delta = full_ari - sample_ari
        records.append({
            "dataset": spec.name(),
            "algorithm": algo.name,
            "sample_n": sample_n,
            "full_n": full_n,
            "params": _params_dict(params),
            "tuning_failed": failed,
            "sample_ari": sample_ari,
            "full_ari": full_ari,
            "delta_ari": delta,
            "percent_change": _percent(delta, sample_ari),
        })
    return records


def run_protocol_a(specs, algorithms=("adabox", "dbscan"), sample_n: int = 500,
                   full_ns=(25_000,), threads: int = 1) -> dict:
    """Direct transfer from ``sample_n`` points to each size in ``full_ns``.

    ``full_ns`` holds one size per dataset or a single size for all.
    """
    names = [a.name for a in _resolve(algorithms)]
    full_ns = list(full_ns)
    if len(full_ns) == 1:
        full_ns = full_ns * len(specs)
    if len(full_ns) != len(specs):
        raise InvalidInput("full_ns must hold one size or one per dataset")
    for fn in full_ns:
        if fn < sample_n:
            raise InvalidInput("full sizes must be at least the sample size")
        if fn != sample_n and not 30 <= fn / sample_n <= 100:
            log.warning("protocol A scale factor %.1fx outside 30-100x", fn / sample_n)
    tasks = [(spec, tuple(names), sample_n, fn) for spec, fn in zip(specs, full_ns)]
    records = [r for chunk in _map(_protocol_a_task, tasks, threads) for r in chunk]

    aggregates = {}
    for name in names:
        rs = [r for r in records if r["algorithm"] == name]
        s = float(np.mean([r["sample_ari"] for r in rs]))
        f = float(np.mean([r["full_ari"] for r in rs]))
        d = float(np.mean([r["delta_ari"] for r in rs]))
        aggregates[name] = {
            "mean_sample_ari": s,
            "mean_full_ari": f,
            "mean_delta_ari": d,
            "percent_change": _percent(d, s),
            "tuning_failures": sum(r["tuning_failed"] for r in rs),
            "wins": 0,
        }
    _count_wins(records, names, aggregates, key="full_ari")
    report = {
        "report_version": REPORT_VERSION,
        "protocol": "A",
        "config": {"sample_n": sample_n, "algorithms": names, "datasets": [s.name() for s in specs]},
        "records": records,
        "aggregates": aggregates,
    }
    check_report(report)
    return report


def _count_wins(records, names, aggregates, key):
    by_ds: dict = {}
    for r in records:
        by_ds.setdefault(r["dataset"], {})[r["algorithm"]] = r.get(key)
    for scores in by_ds.values():
        valid = {k: v for k, v in scores.items() if v is not None}
        if not valid:
            continue
        best = max(valid.values())
        winners = [k for k, v in valid.items() if v == best]
        if len(winners) == 1:
            aggregates[winners[0]]["wins"] += 1


def _protocol_b_task(args):
    spec, names, ladder, pass_drop = args
    records = []
    for algo in _resolve(names):
        params, sample_ari, failed = tune_on_sample(spec, algo, ladder[0])
        checkpoints = []
        alive = not failed
        for n in ladder[1:]:
            if not alive:
                checkpoints.append({"n": n, "tested": False, "ari": None, "delta_ari": None, "pass": False})
                continue
            score = _score_at(spec, algo, params, ladder[0], n)
            ok = score >= sample_ari - pass_drop
            checkpoints.append({"n": n, "tested": True, "ari": score, "delta_ari": score - sample_ari, "pass": ok})
            alive = ok
        final = checkpoints[-1] if checkpoints else None
        records.append({
            "dataset": spec.name(),
            "algorithm": algo.name,
            "params": _params_dict(params),
            "tuning_failed": failed,
            "sample_ari": sample_ari,
            "checkpoints": checkpoints,
            "final_ari": final["ari"] if final else sample_ari,
            "transfer_success": all(c["pass"] for c in checkpoints),
        })
    return records


def run_protocol_b(specs, algorithms=("adabox", "dbscan"), ladder=(500, 5_000, 100_000),
                   pass_drop: float = 0.1, threads: int = 1) -> dict:
    """Staged transfer along ``ladder``; failing a rung ends the run."""
    ladder = list(ladder)
    if len(ladder) < 2 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidInput("ladder must be strictly increasing with at least two rungs")
    names = [a.name for a in _resolve(algorithms)]
    tasks = [(spec, tuple(names), tuple(ladder), pass_drop) for spec in specs]
    records = [r for chunk in _map(_protocol_b_task, tasks, threads) for r in chunk]

    aggregates = {}
    for name in names:
        rs = [r for r in records if r["algorithm"] == name]
        stages = []
        for k, n in enumerate(ladder[1:]):
            tested = [r for r in rs if r["checkpoints"][k]["tested"]]
            passed = [r for r in tested if r["checkpoints"][k]["pass"]]
            stages.append({
                "n": n,
                "tested": len(tested),
                "passed": len(passed),
                "pass_rate": len(passed) / len(rs) if rs else 0.0,
            })
        final = [r for r in rs if r["checkpoints"][-1]["tested"]]
        aggregates[name] = {
            "datasets": len(rs),
            "stages": stages,
            "tested_at_final": len(final),
            "mean_delta_at_final": float(np.mean([r["checkpoints"][-1]["delta_ari"] for r in final])) if final else None,
            "mean_ari_at_final": float(np.mean([r["checkpoints"][-1]["ari"] for r in final])) if final else None,
            "transfer_success": sum(r["transfer_success"] for r in rs),
            "wins": 0,
        }
    _count_wins(records, names, aggregates, key="final_ari")
    report = {
        "report_version": REPORT_VERSION,
        "protocol": "B",
        "config": {
            "ladder": ladder,
            "pass_drop": pass_drop,
            "pass_rule": "ari_at_checkpoint >= sample_ari - pass_drop (reconstructed criterion)",
            "algorithms": names,
            "datasets": [s.name() for s in specs],
        },
        "records": records,
        "aggregates": aggregates,
    }
    check_report(report)
    return report


def ablation_suites(n: int = 2000, per_suite: int = 8) -> dict:
    """Three targeted suites: fragmenting clusters, soft halos, mixed extents."""
    seeds = range(per_suite)
    split = [GeneratorSpec("blobs", n, s, n_centers=2, cluster_std=0.9, noise_fraction=0.02) for s in seeds]
    halo = [GeneratorSpec("varied_density", n, s, n_centers=3, cluster_std=0.7, noise_fraction=0.0) for s in seeds]
    extents = [0.01, 0.05, 0.3, 2.0, 20.0, 300.0, 600.0, 1000.0]
    multi = [GeneratorSpec("blobs", n, s, extent=extents[s % len(extents)], noise_fraction=0.02) for s in seeds]
    return {"split_blob": split, "halo": halo, "multi_extent": multi}


TARGETS = {"no_merging": "split_blob", "no_refinement": "halo", "fixed_grid": "multi_extent"}


def variant_config(variant: str, params: AdaBoxParams):
    if variant == "full":
        return params, EngineConfig()
    if variant == "no_merging":
        return replace(params, merge_adjacent=False), EngineConfig()
    if variant == "no_refinement":
        return params, EngineConfig(refine=False)
    if variant == "fixed_grid":
        return params, EngineConfig(fixed_bbox=FIXED_BOX)
    raise InvalidInput(f"unknown variant {variant!r}")


def _ablation_task(args):
    suite, spec, params, reference_n = args
    data = generate(spec)
    p = transfer_params(params, reference_n, spec.n)
    out = []
    for v in VARIANTS:
        vp, eng = variant_config(v, p)
        score = float(ari(data.labels_true, fit(data.points, vp, eng).labels))
        out.append({"suite": suite, "dataset": spec.name(), "variant": v, "ari": score})
    return out


def _variant_summary(records, variant, datasets):
    full = {r["dataset"]: r["ari"] for r in records if r["variant"] == "full" and r["dataset"] in datasets}
    mine = {r["dataset"]: r["ari"] for r in records if r["variant"] == variant and r["dataset"] in datasets}
    keys = sorted(full)
    base = float(np.mean([full[k] for k in keys]))
    mean = float(np.mean([mine[k] for k in keys]))
    delta = mean - base
    _, p = wilcoxon_signed_rank([full[k] - mine[k] for k in keys])
    return {"mean_ari": mean, "delta_ari": delta, "percent_change": _percent(delta, base), "wilcoxon_p": p}


def run_ablation(suites: dict | None = None, params: AdaBoxParams = AdaBoxParams(),
                 reference_n: int = 500, threads: int = 1) -> dict:
    """Score every variant on every suite dataset.

    ``params`` are given at ``reference_n`` points and density-scaled to each
    dataset's size. Summaries are reported over all datasets and over each
    variant's targeted suite.
    """
    suites = suites or ablation_suites()
    tasks = [(name, spec, params, reference_n) for name, specs in suites.items() for spec in specs]
    records = [r for chunk in _map(_ablation_task, tasks, threads) for r in chunk]
    # suite prefix keeps dataset keys unique across suites
    for r in records:
        r["dataset"] = f"{r['suite']}/{r['dataset']}"

    everything = {r["dataset"] for r in records}
    overall = {v: _variant_summary(records, v, everything) for v in VARIANTS}
    targeted = {}
    for v, suite in TARGETS.items():
        ds = {r["dataset"] for r in records if r["suite"] == suite}
        if ds:
            full_mean = float(np.mean([r["ari"] for r in records if r["variant"] == "full" and r["dataset"] in ds]))
            targeted[v] = dict(_variant_summary(records, v, ds), suite=suite, full_mean_ari=full_mean)
    order = sorted((v for v in targeted), key=lambda v: targeted[v]["percent_change"] or 0.0)
    report = {
        "report_version": REPORT_VERSION,
        "protocol": "ablation",
        "config": {"params": _params_dict(params), "reference_n": reference_n,
                   "suites": {k: [s.name() for s in v] for k, v in suites.items()}},
        "records": records,
        "aggregates": {"overall": overall, "targeted": targeted, "effect_order": order},
    }
    check_report(report)
    return report


def check_report(report: dict) -> None:
    """Verify the delta and percent identities of every record."""
    for r in report["records"]:
        if "delta_ari" in r and "full_ari" in r:
            _check(r["delta_ari"], r["full_ari"] - r["sample_ari"], r)
            if r["sample_ari"] != 0:
                _check(r["percent_change"], 100.0 * r["delta_ari"] / r["sample_ari"], r)
        for c in r.get("checkpoints", []):
            if c["tested"]:
                _check(c["delta_ari"], c["ari"] - r["sample_ari"], r)


def _check(got, want, record):
    if got is None or abs(got - want) > 1e-12:
        raise AssertionError(f"report bookkeeping violated in {record.get('dataset')}: {got} != {want}")


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _fmt(x, spec="+.3f"):
    return "n/a" if x is None else format(x, spec)


def render_text(report: dict) -> str:
    kind = report["protocol"]
    agg = report["aggregates"]
    lines = []
    if kind == "A":
        lines.append(f"{'Algorithm':<10} {'Sample ARI':>10} {'Full ARI':>9} {'dARI':>7} {'% Change':>9}")
        for name, a in agg.items():
            lines.append(f"{name:<10} {a['mean_sample_ari']:>10.3f} {a['mean_full_ari']:>9.3f} "
                         f"{a['mean_delta_ari']:>+7.3f} {_fmt(a['percent_change'], '+.1f') + '%':>9}")
    elif kind == "B":
        final_n = report["config"]["ladder"][-1]
        first_n = report["config"]["ladder"][1]
        lines.append(f"{'Algorithm':<10} {'Stage-1 pass':>12} {'Tested':>7} {'Mean dARI':>9} "
                     f"{'ARI@' + str(final_n):>11} {'Success':>8} {'Wins':>5}")
        for name, a in agg.items():
            st = a["stages"][0]
            lines.append(
                f"{name:<10} {st['passed']:>5}/{a['datasets']:<6} {a['tested_at_final']:>3}/{a['datasets']:<3} "
                f"{_fmt(a['mean_delta_at_final']):>9} {_fmt(a['mean_ari_at_final'], '.3f'):>11} "
                f"{a['transfer_success']:>3}/{a['datasets']:<4} {a['wins']:>5}")
        lines.append(f"(stage 1 = {first_n} points)")
    else:
        full = agg["overall"]["full"]
        lines.append(f"{'Variant':<14} {'Mean ARI':>8} {'dARI':>7} {'% Change':>9} {'p-value':>9}   (all datasets)")
        lines.append(f"{'full':<14} {full['mean_ari']:>8.3f} {'---':>7} {'---':>9} {'---':>9}")
        for v in VARIANTS[1:]:
            a = agg["overall"][v]
            lines.append(f"{v:<14} {a['mean_ari']:>8.3f} {a['delta_ari']:>+7.3f} "
                         f"{_fmt(a['percent_change'], '+.1f') + '%':>9} {a['wilcoxon_p']:>9.2g}")
        lines.append("")
        lines.append(f"{'Variant':<14} {'Suite':<13} {'Full':>6} {'Variant':>8} {'% Change':>9} {'p-value':>9}")
        for v, a in agg["targeted"].items():
            lines.append(f"{v:<14} {a['suite']:<13} {a['full_mean_ari']:>6.3f} {a['mean_ari']:>8.3f} "
                         f"{_fmt(a['percent_change'], '+.1f') + '%':>9} {a['wilcoxon_p']:>9.2g}")
        lines.append("effect order (largest drop first): " + " > ".join(agg["effect_order"]))
    return "\n".join(lines) + "\n"
