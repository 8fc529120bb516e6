"""Command-line front end.

Thin orchestration over the library: every number in the outputs comes from
the bound/LP modules. Progress goes to stderr; stdout carries exactly one
JSON object per invocation. Output files are written atomically
(temporary file plus rename). The default output directory comes from the
OPTLOSS_OUT environment variable, falling back to the working directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import data as dt
from . import hypergraph as hg
from .lp_core import Tolerances

SCHEMA_VERSION = 1
PROGRESS_EVERY = 1_000_000


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("OPTLOSS_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".tmp.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list, rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _progress_printer(label: str):
    state = {"last": 0}

    def callback(count: int) -> None:
        if count - state["last"] >= PROGRESS_EVERY:
            state["last"] = count
            print(f"{label}: {count} candidates tested", file=sys.stderr)

    return callback


def _load_dataset(args) -> dt.LabeledDataset:
    if getattr(args, "idx_images", None):
        if not getattr(args, "idx_labels", None):
            raise ValueError("--idx-images requires --idx-labels")
        ds = dt.load_idx(args.idx_images, args.idx_labels, normalization=args.normalize)
    elif args.data:
        path = Path(args.data)
        if path.suffix.lower() == ".json":
            ds = dt.dataset_from_json(path.read_text())
        else:
            ds = dt.load_csv(path, normalization=args.normalize)
    else:
        raise ValueError("no dataset given: use --data or --idx-images/--idx-labels")
    if args.classes:
        ds = dt.subset(ds, args.classes, per_class_cap=args.per_class)
    elif args.per_class is not None:
        ds = dt.subset(ds, list(range(ds.num_classes)), per_class_cap=args.per_class)
    return ds


def _add_dataset_args(sub) -> None:
    sub.add_argument("--data", help="dataset file (.csv with label column first, or .json)")
    sub.add_argument("--idx-images", help="IDX image file (MNIST binary layout)")
    sub.add_argument("--idx-labels", help="IDX label file")
    sub.add_argument("--normalize", choices=["none", "divide-255"], default="none")
    sub.add_argument("--classes", type=int, nargs="+", help="restrict to these class ids")
    sub.add_argument("--per-class", type=int, help="keep the first N vertices per class")


def _add_common_args(sub) -> None:
    sub.add_argument("--tol-gap", type=float, default=1e-6, help="relative duality-gap bound")
    sub.add_argument("--dedupe", choices=["on", "off"], default="on",
                     help="drop dominated incidence rows before solving")
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--out", help="output directory (default: $OPTLOSS_OUT or .)")
    sub.add_argument("--format", choices=["json", "csv", "both"], default="json")


def _tolerances(args) -> Tolerances:
    return Tolerances(gap_rel=args.tol_gap)


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


def cmd_gen_gaussian(args) -> int:
    ds = dt.gen_gaussian(
        num_classes=args.num_classes,
        per_class=args.per_class,
        variance=args.variance,
        mean_radius=args.mean_radius,
        seed=args.seed,
    )
    out = _out_dir(args) / args.name
    _write_atomic(out, dt.dataset_to_json(ds))
    _emit({"command": "gen-gaussian", "outputs": [str(out)],
           "num_points": ds.num_points, "provenance": ds.provenance})
    return 0


def cmd_build(args) -> int:
    ds = _load_dataset(args)
    graph = hg.build_conflict_graph(ds, args.epsilon[0])
    if args.max_degree > 2:
        graph = hg.extend_hyperedges(
            graph, args.max_degree, jobs=args.jobs,
            progress=_progress_printer(f"degree extension eps={args.epsilon[0]}"),
        )
    counts = graph.edge_counts()
    print(f"edge counts by degree: {counts}", file=sys.stderr)
    out = _out_dir(args) / f"hypergraph_eps{args.epsilon[0]:g}_m{args.max_degree}.json"
    _write_atomic(out, hg.graph_to_json(graph))
    _emit({"command": "build", "outputs": [str(out)],
           "edge_counts": {str(k): v for k, v in counts.items()}})
    return 0


def _check_max_degree(args, ds) -> None:
    if args.max_degree < 2 or args.max_degree > ds.num_classes:
        raise ValueError(
            f"--max-degree must lie in [2, {ds.num_classes}] for this dataset"
        )


def _caro_wei_weights(args, ds):
    source = getattr(args, "caro_wei_weights", None)
    if source is None:
        return None  # degree-2 packing solution
    if source == "uniform":
        return np.ones(ds.num_points)
    weights = np.asarray(json.loads(Path(source).read_text()), dtype=float)
    if weights.shape != (ds.num_points,):
        raise ValueError(
            f"weights file has {weights.shape} entries, dataset has {ds.num_points}"
        )
    return weights


def cmd_bound(args) -> int:
    ds = _load_dataset(args)
    _check_max_degree(args, ds)
    tol = _tolerances(args)
    epsilons = sorted(args.epsilon)
    if any(e < 0 for e in epsilons):
        raise ValueError("epsilon values must be nonnegative")
    outdir = _out_dir(args)
    weights = _caro_wei_weights(args, ds)
    inner_jobs = args.jobs if len(epsilons) == 1 else 1

    def run(eps: float):
        report = bd.bound_report(
            ds, eps, m_max=args.max_degree, tol=tol,
            dedupe=(args.dedupe == "on"), hard_cap=args.hard_cap,
            caro_wei_weights=weights,
            jobs=inner_jobs, progress=_progress_printer(f"eps={eps:g}"),
        )
        written = []
        if args.format in ("json", "both"):
            path = outdir / f"bound_eps{eps:g}.json"
            _write_atomic(path, json.dumps(report.to_json_dict(), indent=2))
            written.append(str(path))
        if args.format in ("csv", "both"):
            path = outdir / f"bound_eps{eps:g}.csv"
            _write_atomic(path, _csv_text(bd.BOUND_CSV_HEADER, report.to_csv_rows()))
            written.append(str(path))
        return report, written

    if args.jobs > 1 and len(epsilons) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, epsilons))
    else:
        results = [run(eps) for eps in epsilons]

    outputs = [p for _, written in results for p in written]
    summary = {
        "command": "bound",
        "outputs": outputs,
        "certified": all(rep.certified for rep, _ in results),
        "losses": {f"{rep.epsilon:g}": {str(m): v for m, v in rep.losses.items()}
                   for rep, _ in results},
    }
    _emit(summary)
    return 0 if summary["certified"] else 2


def cmd_pairwise(args) -> int:
    ds = _load_dataset(args)
    tol = _tolerances(args)
    eps = args.epsilon[0]
    matrix = bd.pairwise_binary_losses(ds, eps, tol, jobs=args.jobs)
    names = matrix.class_names or [str(i) for i in range(matrix.losses.shape[0])]
    outdir = _out_dir(args)
    written = []
    if args.format in ("csv", "both"):
        rows = [[names[i]] + [repr(float(v)) for v in matrix.losses[i]]
                for i in range(len(names))]
        path = outdir / f"pairwise_eps{eps:g}.csv"
        _write_atomic(path, _csv_text(["class"] + names, rows))
        written.append(str(path))
    if args.format in ("json", "both"):
        doc = {"schema_version": SCHEMA_VERSION, "epsilon": eps,
               "classes": names, "losses": matrix.losses.tolist(),
               "note": matrix.note}
        path = outdir / f"pairwise_eps{eps:g}.json"
        _write_atomic(path, json.dumps(doc, indent=2))
        written.append(str(path))
    _emit({"command": "pairwise", "outputs": written,
           "max_entry": float(matrix.losses.max())})
    return 0


def cmd_strategy(args) -> int:
    ds = _load_dataset(args)
    _check_max_degree(args, ds)
    tol = _tolerances(args)
    eps = args.epsilon[0]
    loss, sol, graph = bd.optimal_loss(
        ds, eps, args.max_degree, tol=tol,
        dedupe=(args.dedupe == "on"), jobs=args.jobs,
    )
    strategy = bd.extract_strategy(sol, graph, tol)
    outdir = _out_dir(args)
    strat_path = outdir / f"strategy_eps{eps:g}_m{args.max_degree}.json"
    _write_atomic(strat_path, json.dumps(strategy.to_json_dict(), indent=2))
    q_path = outdir / f"classifier_eps{eps:g}_m{args.max_degree}.json"
    q_doc = {
        "schema_version": SCHEMA_VERSION,
        "epsilon": eps,
        "max_degree": args.max_degree,
        "loss": loss,
        "q": sol.q.tolist(),
        "over_covered_vertices": [
            vs.vertex_id for vs in strategy.per_vertex if vs.over_covered
        ],
    }
    _write_atomic(q_path, json.dumps(q_doc, indent=2))
    _emit({"command": "strategy", "outputs": [str(strat_path), str(q_path)],
           "loss": loss, "cover_cost": strategy.cover_cost})
    return 0


def cmd_stats(args) -> int:
    ds = _load_dataset(args)
    stats = bd.class_distance_stats(ds)
    names = ds.class_names or [str(i) for i in range(ds.num_classes)]
    outdir = _out_dir(args)
    written = []
    if args.format in ("csv", "both"):
        rows = [[names[c], repr(float(stats[c]))] for c in range(len(stats))]
        path = outdir / "class_stats.csv"
        _write_atomic(path, _csv_text(["class", "mean_nearest_other_class_distance"], rows))
        written.append(str(path))
    if args.format in ("json", "both"):
        doc = {"schema_version": SCHEMA_VERSION, "classes": names,
               "mean_nearest_other_class_distance": stats.tolist()}
        path = outdir / "class_stats.json"
        _write_atomic(path, json.dumps(doc, indent=2))
        written.append(str(path))
    _emit({"command": "stats", "outputs": written, "values": stats.tolist()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optloss",
        description="Optimal adversarial 0-1 loss and bounds for labeled point sets",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen-gaussian", help="generate a Gaussian mixture dataset")
    gen.add_argument("--num-classes", type=int, default=3)
    gen.add_argument("--per-class", type=int, default=1000)
    gen.add_argument("--variance", type=float, default=0.05)
    gen.add_argument("--mean-radius", type=float, default=3.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--name", default="gaussian.json")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_gen_gaussian)

    build = subs.add_parser("build", help="build and export a conflict hypergraph")
    _add_dataset_args(build)
    build.add_argument("--epsilon", type=float, nargs=1, required=True)
    build.add_argument("--max-degree", type=int, default=2)
    _add_common_args(build)
    build.set_defaults(func=cmd_build)

    bound = subs.add_parser("bound", help="compute the bound chain over an epsilon sweep")
    _add_dataset_args(bound)
    bound.add_argument("--epsilon", type=float, nargs="+", required=True)
    bound.add_argument("--max-degree", type=int, default=2)
    bound.add_argument("--hard-cap", type=int, default=30,
                       help="exact hard-classifier search only up to this many vertices")
    bound.add_argument("--caro-wei-weights", default=None,
                       help="'uniform' or a JSON file of per-vertex weights "
                            "(default: the degree-2 packing solution)")
    _add_common_args(bound)
    bound.set_defaults(func=cmd_bound)

    pair = subs.add_parser("pairwise", help="one-versus-one optimal losses (heatmap data)")
    _add_dataset_args(pair)
    pair.add_argument("--epsilon", type=float, nargs=1, required=True)
    _add_common_args(pair)
    pair.set_defaults(func=cmd_pairwise)

    strat = subs.add_parser("strategy", help="export the optimal adversary and classifier")
    _add_dataset_args(strat)
    strat.add_argument("--epsilon", type=float, nargs=1, required=True)
    strat.add_argument("--max-degree", type=int, default=2)
    _add_common_args(strat)
    strat.set_defaults(func=cmd_strategy)

    stats = subs.add_parser("stats", help="per-class nearest other-class distances")
    _add_dataset_args(stats)
    _add_common_args(stats)
    stats.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # report failures as machine-readable JSON
        _emit({"error": str(exc), "type": type(exc).__name__, "command": args.command})
        return 2


if __name__ == "__main__":
    sys.exit(main())
