"""Command-line entry point: ``siegel-embed generate | train | gridsearch | evaluate``."""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .geometry.serialization import load_embeddings
from .geometry.spaces import SPACE_GRAMMAR, SpaceDescriptor, make_space
from .graphs import (
    Graph,
    GraphFormatError,
    TripletSet,
    all_pairs_shortest_paths,
    build_dataset,
    cartesian_product,
    largest_component,
    load_edge_list,
    load_triplets,
    make_grid,
    make_tree,
    parse_generator,
    rooted_product,
    save_edge_list,
    save_triplets,
)
from .metrics import DataError, evaluate
from .training import NumericalFailure, RunReport, TrainConfig, train

log = logging.getLogger("siegel_embed")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

EDGES_FILE = "edges.txt"
TRIPLETS_FILE = "triplets.csv"
STATS_FILE = "stats.json"
CHECKPOINT_FILE = "embeddings.emb"

DEFAULT_GRID = {"learning_rate": (0.02, 0.01, 0.005), "batch_size": (128, 512),
                "max_grad_norm": (100.0, 300.0)}
SUMMARY_FIELDS = ("run", "learning_rate", "batch_size", "max_grad_norm", "seed", "status",
                  "d_avg", "map", "epochs_run", "best_epoch", "best")


class UsageError(Exception):
    """Bad arguments detected after argparse; mapped to exit code 2."""


@dataclass
class RunSpec:
    dataset: str
    space: SpaceDescriptor
    train: TrainConfig
    output_dir: Path


# ----------------------------------------------------------------------------
# dataset resolution

def load_dataset(spec: str) -> tuple[Graph, TripletSet]:
    """Resolve ``spec`` to a graph and its distance triplets.

    ``spec`` is a directory written by ``generate``, an edge-list file, or a
    generator string such as ``tree:3,5``, ``grid:4x4x4x4`` or ``tree_x_grid``.
    """
    path = Path(spec)
    if path.is_dir():
        graph = load_edge_list(path / EDGES_FILE)
        trip_path = path / TRIPLETS_FILE
        triplets = load_triplets(trip_path) if trip_path.exists() else all_pairs_shortest_paths(graph)
        if triplets.node_count > graph.num_nodes:
            raise DataError(f"{trip_path} references {triplets.node_count} nodes, "
                            f"edge list has {graph.num_nodes}")
        return graph, triplets
    if path.is_file():
        graph = load_edge_list(path)
        if not graph.is_connected():
            log.warning("%s is disconnected; keeping the largest component", path)
            graph = largest_component(graph)
        return graph, all_pairs_shortest_paths(graph)
    try:
        graph = parse_generator(spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"dataset {spec!r} is neither a path nor a generator spec ({exc})") from exc
    return graph, all_pairs_shortest_paths(graph)


def _generator(args) -> Graph:
    kind = args.kind
    if kind == "tree":
        return make_tree(args.valency, args.height)
    if kind == "grid":
        return make_grid(args.dims)
    if kind == "cartesian":
        return cartesian_product(parse_generator(args.left), parse_generator(args.right))
    if kind == "rooted":
        return rooted_product(parse_generator(args.outer), parse_generator(args.inner))
    if kind == "dataset":
        return build_dataset(args.name)
    graph = load_edge_list(args.path)
    return largest_component(graph) if not graph.is_connected() else graph


# ----------------------------------------------------------------------------
# commands

def cmd_generate(args) -> int:
    try:
        graph = _generator(args)
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, GraphFormatError):
            raise
        raise UsageError(str(exc)) from exc
    triplets = all_pairs_shortest_paths(graph)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(graph, out / EDGES_FILE)
    save_triplets(triplets, out / TRIPLETS_FILE)
    stats = {"nodes": graph.num_nodes, "edges": graph.num_edges, "triplets": len(triplets)}
    (out / STATS_FILE).write_text(json.dumps(stats, indent=2) + "\n")
    print(json.dumps(stats))
    return EXIT_OK


def _config_from_args(args, **overrides) -> TrainConfig:
    values = dict(learning_rate=args.lr, batch_size=args.batch_size, max_grad_norm=args.max_grad_norm,
                  epochs=args.epochs, burnin_epochs=min(args.burnin_epochs, args.epochs),
                  lr_patience=args.lr_patience, early_stop_patience=args.early_stop_patience,
                  epsilon_projection=args.epsilon, seed=args.seed,
                  checkpoint_every=args.checkpoint_every)
    values.update(overrides)
    try:
        return TrainConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_space(text: str) -> SpaceDescriptor:
    try:
        return SpaceDescriptor.parse(text)
    except ValueError as exc:
        raise UsageError(f"{exc}\n{SPACE_GRAMMAR}") from exc


def _write_curves(report: RunReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "d_avg", "learning_rate", "projections"])
        for i, row in enumerate(zip(report.loss, report.distortion, report.learning_rate,
                                    report.projections)):
            w.writerow([i, *row])


def execute_run(spec: RunSpec, graph: Graph, triplets: TripletSet) -> RunReport:
    """Train one configuration and write its run directory.

    Raises :class:`NumericalFailure` after writing the partial report.
    """
    out = spec.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(
        {"dataset": spec.dataset, "space": str(spec.space), "num_params": spec.space.num_params,
         "train": spec.train.to_dict()}, indent=2) + "\n")
    ckpt_dir = out / "snapshots" if spec.train.checkpoint_every else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(exist_ok=True)
    try:
        table, report = train(triplets, spec.space, spec.train, graph=graph, checkpoint_dir=ckpt_dir)
    except NumericalFailure as exc:
        if exc.table is not None:
            exc.table.save(out / CHECKPOINT_FILE, dataset=spec.dataset, status="diverged")
        if exc.report is not None:
            (out / "report.json").write_text(exc.report.to_json() + "\n")
            _write_curves(exc.report, out / "metrics.csv")
        raise
    table.save(out / CHECKPOINT_FILE, dataset=spec.dataset, d_avg=report.final_d_avg)
    (out / "report.json").write_text(report.to_json() + "\n")
    _write_curves(report, out / "metrics.csv")
    return report


def cmd_train(args) -> int:
    space = _parse_space(args.space)
    config = _config_from_args(args)
    graph, triplets = load_dataset(args.dataset)
    print(f"space {space}: {space.num_params} free parameters per node; "
          f"{graph.num_nodes} nodes, {len(triplets)} triplets")
    spec = RunSpec(args.dataset, space, config, Path(args.output_dir))
    try:
        report = execute_run(spec, graph, triplets)
    except NumericalFailure as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    line = f"d_avg {report.final_d_avg:.6f}"
    if report.final_map is not None:
        line += f"  mAP {report.final_map:.6f}"
    print(line + f"  (best epoch {report.best_epoch}, {report.epochs_run} epochs)")
    return EXIT_OK


def _grid_job(job):
    index, spec = job
    graph, triplets = load_dataset(spec.dataset)
    row = {"run": index, "learning_rate": spec.train.learning_rate, "batch_size": spec.train.batch_size,
           "max_grad_norm": spec.train.max_grad_norm, "seed": spec.train.seed}
    try:
        report = execute_run(spec, graph, triplets)
    except NumericalFailure as exc:
        rep = exc.report
        row.update(status="diverged", d_avg="", map="",
                   epochs_run=rep.epochs_run if rep else "", best_epoch=rep.best_epoch if rep else "")
        return row
    except Exception as exc:  # keep the search going; the row records the failure
        log.error("run %d failed: %s", index, exc)
        row.update(status=f"error: {exc}", d_avg="", map="", epochs_run="", best_epoch="")
        return row
    row.update(status="ok", d_avg=report.final_d_avg,
               map="" if report.final_map is None else report.final_map,
               epochs_run=report.epochs_run, best_epoch=report.best_epoch)
    return row


def gridsearch_specs(args) -> list[RunSpec]:
    space = _parse_space(args.space)
    grid = {"learning_rate": args.lr or DEFAULT_GRID["learning_rate"],
            "batch_size": args.batch_size or DEFAULT_GRID["batch_size"],
            "max_grad_norm": args.max_grad_norm or DEFAULT_GRID["max_grad_norm"]}
    root = Path(args.output_dir)
    base = argparse.Namespace(**vars(args))
    specs = []
    for i, (lr, bs, mgn) in enumerate(itertools.product(*grid.values())):
        base.lr, base.batch_size, base.max_grad_norm = lr, bs, mgn
        config = _config_from_args(base, seed=args.seed + i)
        specs.append(RunSpec(args.dataset, space, config, root / f"run{i:03d}"))
    return specs


def select_best(rows: Sequence[dict]) -> Optional[int]:
    """Index of the successful row with the lowest D_avg."""
    ok = [(float(r["d_avg"]), i) for i, r in enumerate(rows) if r["status"] == "ok"]
    return min(ok)[1] if ok else None


def cmd_gridsearch(args) -> int:
    specs = gridsearch_specs(args)
    graph, triplets = load_dataset(args.dataset)
    space = specs[0].space
    print(f"space {space}: {space.num_params} free parameters per node; {len(specs)} runs "
          f"on {graph.num_nodes} nodes")
    jobs = list(enumerate(specs))
    workers = max(1, min(args.workers or os.cpu_count() or 1, len(jobs)))
    if workers == 1:
        rows = [_grid_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_job, jobs))
    best = select_best(rows)
    for i, r in enumerate(rows):
        r["best"] = int(i == best)
    root = Path(args.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        w.writerows(rows)
    if best is None:
        print("every run failed", file=sys.stderr)
        return EXIT_NUMERICAL
    b = rows[best]
    print(f"best run {b['run']}: lr {b['learning_rate']} batch {b['batch_size']} "
          f"max_grad_norm {b['max_grad_norm']} -> d_avg {b['d_avg']:.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    space, points, header = load_embeddings(args.checkpoint)
    graph, triplets = load_dataset(args.dataset)
    if len(points) != graph.num_nodes:
        raise DataError(f"checkpoint holds {len(points)} embeddings but the dataset has "
                        f"{graph.num_nodes} nodes")
    result = evaluate(make_space(space), points, triplets, graph, per_node=args.per_node)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(result.to_json(space=str(space), dataset=args.dataset) + "\n")
    (out / "eval.csv").write_text(result.to_csv(args.dataset, str(space), space.num_params, args.seed))
    print(f"d_avg {result.d_avg:.6f}  mAP {result.map:.6f}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser

def _training_flags(p: argparse.ArgumentParser, grid: bool) -> None:
    p.add_argument("--dataset", required=True,
                   help="generate output directory, edge-list file, or generator spec")
    p.add_argument("--space", required=True, help="space descriptor, e.g. siegel:4 (see --help)")
    if grid:
        p.add_argument("--lr", type=float, nargs="+", help="learning rates (default 0.02 0.01 0.005)")
        p.add_argument("--batch-size", type=int, nargs="+", help="batch sizes (default 128 512)")
        p.add_argument("--max-grad-norm", type=float, nargs="+", help="clip norms (default 100 300)")
    else:
        p.add_argument("--lr", type=float, default=0.01)
        p.add_argument("--batch-size", type=int, default=512)
        p.add_argument("--max-grad-norm", type=float, default=100.0)
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--burnin-epochs", type=int, default=10)
    p.add_argument("--lr-patience", type=int, default=50)
    p.add_argument("--early-stop-patience", type=int, default=150)
    p.add_argument("--epsilon", type=float, default=1e-4, help="projection margin")
    p.add_argument("--checkpoint-every", type=int, default=0,
                   help="also save a snapshot every N epochs (0 = only the best table)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siegel-embed",
        description="Graph embeddings in Siegel spaces and classical baselines.",
        epilog=SPACE_GRAMMAR, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output-dir", default=".", help="where files are written")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel grid-search runs (default: CPU count)")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic graph and its distance triplets")
    kinds = gen.add_subparsers(dest="kind", required=True)
    t = kinds.add_parser("tree", help="full tree")
    t.add_argument("--valency", type=int, required=True)
    t.add_argument("--height", type=int, required=True)
    g = kinds.add_parser("grid", help="grid with the given side lengths")
    g.add_argument("--dims", type=int, nargs="+", required=True)
    c = kinds.add_parser("cartesian", help="cartesian product of two generator specs")
    c.add_argument("--left", required=True)
    c.add_argument("--right", required=True)
    r = kinds.add_parser("rooted", help="rooted product: inner copies hung on every outer node")
    r.add_argument("--outer", required=True)
    r.add_argument("--inner", required=True)
    d = kinds.add_parser("dataset", help="one of the named benchmark graphs")
    d.add_argument("name")
    e = kinds.add_parser("edges", help="ingest an edge list (largest component)")
    e.add_argument("path")

    tr = sub.add_parser("train", help="fit one configuration",
                        epilog=SPACE_GRAMMAR, formatter_class=argparse.RawDescriptionHelpFormatter)
    _training_flags(tr, grid=False)
    gs = sub.add_parser("gridsearch", help="fit every combination of lr, batch size and clip norm",
                        epilog=SPACE_GRAMMAR, formatter_class=argparse.RawDescriptionHelpFormatter)
    _training_flags(gs, grid=True)

    ev = sub.add_parser("evaluate", help="score a saved embedding table")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--per-node", action="store_true", help="include per-node AP in eval.json")
    return parser


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "gridsearch": cmd_gridsearch,
            "evaluate": cmd_evaluate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, GraphFormatError, FileNotFoundError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"{parser.prog}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
