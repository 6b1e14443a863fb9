"""Command-line interface.

Exit codes: 0 success, 2 usage error (bad flags, missing files, malformed
input), 1 runtime error. Failures print a single ``error: <kind>: <message>``
line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import protocols
from .datasets import FAMILIES, GeneratorSpec, generate, load_csv, save_csv
from .dbscan import DBSCANParams, ParameterGrid, dbscan, grid_search_tune
from .errors import AdaBoxError, InvalidInput
from .metrics import all_scores
from .pipeline import AdaBoxParams, fit
from .plotting import scatter_svg

EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _load_input(path: str, has_labels: bool):
    try:
        return load_csv(_require_file(path), has_labels=has_labels)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from exc


def read_labels(path: str) -> np.ndarray:
    """Read a label column: the ``label`` column if a header names one, else the last."""
    p = _require_file(path)
    with p.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(f.strip() for f in r)]
    if not rows:
        raise UsageError(f"{path}: no rows")
    col = -1
    first = [f.strip() for f in rows[0]]
    if "label" in first:
        col = first.index("label")
        rows = rows[1:]
    out = []
    for i, r in enumerate(rows, start=1):
        try:
            out.append(int(float(r[col])))
        except (ValueError, IndexError):
            raise UsageError(f"{path}: row {i}: bad label {r!r}") from None
    return np.array(out, dtype=np.int64)


def write_labels(labels, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("label\n")
        fh.writelines(f"{int(v)}\n" for v in labels)


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _adabox_params(args) -> AdaBoxParams:
    base = AdaBoxParams()
    return AdaBoxParams(
        n_boxes=args.n_boxes if args.n_boxes is not None else base.n_boxes,
        min_density=args.min_density if args.min_density is not None else base.min_density,
        regular_threshold_factor=args.factor if args.factor is not None else base.regular_threshold_factor,
        merge_adjacent=not args.no_merge,
        refinement_sigma=args.sigma if args.sigma is not None else base.refinement_sigma,
        min_cluster_size=args.min_cluster_size if args.min_cluster_size is not None else base.min_cluster_size,
    )


def cmd_gen(args):
    spec = GeneratorSpec(args.family, args.n, args.seed, n_centers=args.centers,
                         cluster_std=args.std, noise_fraction=args.noise, extent=args.extent)
    data = generate(spec)
    if args.out:
        save_csv(data, args.out)
    else:
        save_csv(data, "/dev/stdout")
    return 0


def cmd_fit(args):
    data = _load_input(args.input, args.has_labels)
    try:
        if args.algo == "adabox":
            params = _adabox_params(args)
        else:
            if args.eps is None:
                raise UsageError("--eps is required for --algo dbscan")
            params = DBSCANParams(args.eps, args.min_pts)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from exc
    result = fit(data.points, params) if args.algo == "adabox" else dbscan(data.points, params)
    write_labels(result.labels, args.out)
    if args.plot:
        Path(args.plot).write_text(scatter_svg(data.points, result.labels, title=f"{args.algo}: {result.n_clusters} clusters"))
    summary = {"algorithm": args.algo, "params": params.to_dict(), "n_clusters": result.n_clusters,
               "n_noise": result.n_noise, "cluster_sizes": result.cluster_sizes, "stage_trace": result.stage_trace}
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def cmd_eval(args):
    truth = read_labels(args.labels_true)
    pred = read_labels(args.labels_pred)
    if truth.size != pred.size:
        raise UsageError(f"label files differ in length: {truth.size} vs {pred.size}")
    _emit(json.dumps(all_scores(truth, pred), sort_keys=True) + "\n", args.out)
    return 0


def _space_from_json(path, algo):
    try:
        axes = json.loads(_require_file(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc
    cls = AdaBoxParams if algo == "adabox" else DBSCANParams
    allowed = {f.name for f in fields(cls)}
    if not isinstance(axes, dict) or not axes or set(axes) - allowed:
        raise UsageError(f"{path}: search space must map a subset of {sorted(allowed)} to lists")
    if algo == "dbscan" and set(axes) != allowed:
        raise UsageError(f"{path}: DBSCAN search space needs both eps and min_pts")
    if not all(isinstance(v, list) and v for v in axes.values()):
        raise UsageError(f"{path}: every axis needs a non-empty list of values")
    try:
        return list(ParameterGrid(axes, cls))
    except (InvalidInput, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_tune(args):
    data = _load_input(args.input, has_labels=True)
    algo = protocols.ALGORITHMS[args.algo]
    space = _space_from_json(args.space, args.algo) if args.space else algo.search_space(data.points)
    res = grid_search_tune(data.points, data.labels_true, space, algo.fit)
    out = {"algorithm": args.algo, "params": res.params.to_dict(), "score": res.score,
           "index": res.index, "n_evaluated": res.n_evaluated}
    _emit(json.dumps(out, sort_keys=True) + "\n", args.out)
    return 0


def _write_report(report, args):
    if args.out:
        Path(args.out).write_text(protocols.to_json(report))
    text = protocols.render_text(report)
    if args.text:
        Path(args.text).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_protocol_a(args):
    specs = protocols.transfer_suite(range(args.seed, args.seed + args.datasets))
    report = protocols.run_protocol_a(specs, args.algos, sample_n=args.sample_n,
                                      full_ns=[args.full_n], threads=args.threads)
    return _write_report(report, args)


def cmd_protocol_b(args):
    specs = protocols.transfer_suite(range(args.seed, args.seed + args.datasets))
    report = protocols.run_protocol_b(specs, args.algos, ladder=args.ladder,
                                      pass_drop=args.pass_drop, threads=args.threads)
    return _write_report(report, args)


def cmd_ablate(args):
    suites = protocols.ablation_suites(n=args.n, per_suite=args.per_suite)
    report = protocols.run_ablation(suites, threads=args.threads)
    return _write_report(report, args)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adabox", description="AdaBox grid-based density clustering")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=None, help="noise fraction")
    p.add_argument("--centers", type=int, default=3)
    p.add_argument("--std", type=float, default=0.5)
    p.add_argument("--extent", type=float, default=10.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="cluster a CSV of points")
    p.add_argument("--input", required=True)
    p.add_argument("--has-labels", action="store_true", help="input has a third (ignored) label column")
    p.add_argument("--algo", choices=("adabox", "dbscan"), default="adabox")
    p.add_argument("--out", required=True, help="labels CSV")
    p.add_argument("--plot", help="SVG scatter output")
    p.add_argument("--n-boxes", type=int)
    p.add_argument("--min-density", type=float)
    p.add_argument("--factor", type=float, help="regular_threshold_factor")
    p.add_argument("--no-merge", action="store_true")
    p.add_argument("--sigma", type=float, help="refinement_sigma in cell widths")
    p.add_argument("--min-cluster-size", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--labels-true", required=True)
    p.add_argument("--labels-pred", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="grid-search parameters on a labelled CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--algo", choices=("adabox", "dbscan"), default="adabox")
    p.add_argument("--space", help="JSON object mapping parameter names to value lists")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tune)

    for name, func in (("protocol-a", cmd_protocol_a), ("protocol-b", cmd_protocol_b), ("ablate", cmd_ablate)):
        p = sub.add_parser(name)
        p.add_argument("--out", help="JSON report path")
        p.add_argument("--text", help="plain-text table path")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0, help="first generator seed")
        if name != "ablate":
            p.add_argument("--datasets", type=int, default=10, help="seeds per family")
            p.add_argument("--algos", nargs="+", choices=("adabox", "dbscan"), default=["adabox", "dbscan"])
        if name == "protocol-a":
            p.add_argument("--sample-n", type=int, default=500)
            p.add_argument("--full-n", type=int, default=25_000)
        if name == "protocol-b":
            p.add_argument("--ladder", type=int, nargs="+", default=[500, 5_000, 100_000])
            p.add_argument("--pass-drop", type=float, default=0.1)
        if name == "ablate":
            p.add_argument("--n", type=int, default=2000)
            p.add_argument("--per-suite", type=int, default=8)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: usage: {exc}\n")
        return EXIT_USAGE
    except (AdaBoxError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: runtime: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
