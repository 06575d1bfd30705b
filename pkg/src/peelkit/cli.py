"""Command-line front end.

Exit codes: 0 on success, 1 on usage or input errors, 2 on numeric failures.
"""
from __future__ import annotations

import argparse
import ast
import logging
import sys
from pathlib import Path

import numpy as np

from . import bolza
from .dimension import NeighborhoodFamily, gradient_norm_score, local_dimension_field, score_quantiles
from .experiments import EXPERIMENTS, ExperimentConfig, conjecture_scan, manifest, run_experiment
from .graphs import graph_metrics, knn_graph, radial_graph
from .io import (dumps, format_csv, read_edges_csv, read_matrix_csv, read_points_csv, write_csv,
                 write_edges_csv, write_json)
from .metric import MetricKind, PointCloud, pairwise_distances
from .neighborhoods import NeighborhoodError, NeighborIndex, ThresholdPolicy, all_neighborhoods, neighborhood_graph
from .peel import COUNTEREXAMPLE, PeelError, peel
from .samplers import (HairBallSpec, NoiseSpec, embed_with_noise, sample_annulus, sample_ball, sample_gaussian,
                       sample_hair_ball, sample_pinched_torus, sample_sphere, sample_stratified_cdb, sample_torus)

log = logging.getLogger("peelkit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--threshold", default="default", help="default | radius:X | card:K | none")
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "torus", "angular", "hyperbolic"])
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--workers", type=int, default=None)


def _input(p):
    p.add_argument("points", nargs="?", help="CSV of point coordinates")
    p.add_argument("--matrix", default=None, help="CSV distance matrix instead of points")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="peelkit", description="Peels, peel neighborhoods and local dimension fields.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("peel", help="peel distribution of a metric")
    _input(p)
    _common(p)
    p.add_argument("--layers", type=int, default=None, help="also emit this many iterated peel layers")

    p = sub.add_parser("neighborhoods", help="peel neighborhoods of every point")
    _input(p)
    _common(p)
    p.add_argument("--edges", default=None, help="write the neighborhood graph edge list here")

    p = sub.add_parser("graph-metrics", help="efficiency and components of a graph")
    _input(p)
    _common(p)
    p.add_argument("--graph", default="peel", help="peel | knn:K | radial:R | edges:PATH")

    p = sub.add_parser("dimension", help="local dimension field")
    _input(p)
    _common(p)
    p.add_argument("--family", default="iterated_peel", help="knn:K | peel | iterated_peel | double_radius")
    p.add_argument("--centering", default="centroid", choices=["centroid", "basepoint"])

    p = sub.add_parser("singularity", help="gradient-norm singularity scores")
    _input(p)
    _common(p)
    p.add_argument("--level", type=int, default=2, choices=[1, 2])
    p.add_argument("--alpha", default="median", choices=["median", "mean", "max"])
    p.add_argument("--no-log", action="store_true")

    p = sub.add_parser("sample", help="draw a seeded sample")
    p.add_argument("geometry", choices=["ball", "sphere", "gaussian", "torus", "annulus", "pinched-torus",
                                        "hair-ball", "stratified", "bolza"])
    _common(p)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--inner", type=float, default=0.75)
    p.add_argument("--n-interval", type=int, default=5)
    p.add_argument("--attach", action="store_true")
    p.add_argument("--match", action="store_true")
    p.add_argument("--noise", type=float, default=0.0, help="expected noise norm")
    p.add_argument("--ambient", type=int, default=None)

    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    _common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any size parameter (Python literal values)")

    p = sub.add_parser("conjecture-scan", help="search for hereditary peel violations")
    _common(p)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--min-size", type=int, default=4)
    p.add_argument("--max-size", type=int, default=12)
    p.add_argument("--matrix", action="append", default=[], help="also scan this distance matrix CSV")
    p.add_argument("--counterexample", action="store_true", help="also scan the built-in 4-point counterexample")
    p.add_argument("--euclidean-only", action="store_true")
    return ap


def _load(args):
    """Distance source for the input-taking subcommands: (index, distance matrix or None)."""
    if args.matrix:
        d = read_matrix_csv(args.matrix)
        return NeighborIndex.from_matrix(d), d
    if not args.points:
        raise UsageError("give a points CSV or --matrix")
    cloud = PointCloud(read_points_csv(args.points), MetricKind.parse(args.metric))
    return NeighborIndex(cloud), None


def _emit(args, obj):
    text = dumps(obj)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_peel(args):
    index, d = _load(args)
    if d is None:
        d = pairwise_distances(index.cloud)
    result = peel(d).to_json(d)
    if args.layers:
        from .peel import peel_layers
        result["layers"] = [layer.tolist() for layer in peel_layers(d, args.layers)]
    _emit(args, result)


def cmd_neighborhoods(args):
    index, _ = _load(args)
    nbs = all_neighborhoods(index, ThresholdPolicy.parse(args.threshold, index), workers=args.workers,
                            allow_unbounded=args.paper_scale)
    if args.edges:
        write_edges_csv(args.edges, neighborhood_graph(nbs, index))
    _emit(args, [nb.to_json() for nb in nbs])


def cmd_graph_metrics(args):
    kind, _, val = args.graph.partition(":")
    if kind == "edges":
        G = read_edges_csv(val)
    else:
        index, d = _load(args)
        if kind == "peel":
            nbs = all_neighborhoods(index, ThresholdPolicy.parse(args.threshold, index), workers=args.workers)
            G = neighborhood_graph(nbs, index)
        else:
            if d is None:
                d = pairwise_distances(index.cloud)
            if kind == "knn":
                G = knn_graph(d, int(val))
            elif kind == "radial":
                G = radial_graph(d, float(val))
            else:
                raise UsageError(f"unknown graph spec {args.graph!r}")
    _emit(args, graph_metrics(G))


def _field(args, index):
    fam = NeighborhoodFamily.parse(args.family.replace(":", ""))
    nbs = None
    if fam.kind != "knn":
        nbs = all_neighborhoods(index, ThresholdPolicy.parse(args.threshold, index), workers=args.workers)
    return fam, nbs, local_dimension_field(index, fam, neighborhoods=nbs, centering=args.centering,
                                           seed=args.seed, workers=args.workers)


def _write_field(args, values, quantiles, name):
    rows = [(i, v, q) for i, (v, q) in enumerate(zip(values, quantiles))]
    if args.out and args.out.endswith(".csv"):
        write_csv(args.out, ["index", name, "quantile"], rows)
    else:
        _emit(args, {"values": values, "quantiles": quantiles})


def cmd_dimension(args):
    index, _ = _load(args)
    _, _, f = _field(args, index)
    _write_field(args, f.values, score_quantiles(f.values), "dimension")


def cmd_singularity(args):
    index, _ = _load(args)
    if index.coords is None or index.cloud.metric_kind is not MetricKind.EUCLIDEAN:
        raise UsageError("singularity scores need Euclidean point coordinates")
    args.family = "peel" if args.level == 1 else "iterated_peel"
    args.centering = "centroid"
    _, nbs, f = _field(args, index)
    s = gradient_norm_score(index, args.level, f, nbs, alpha=args.alpha, use_log=not args.no_log)
    _write_field(args, s.values, s.quantiles(), f"s{args.level}")


def cmd_sample(args):
    rng = np.random.default_rng(args.seed)
    labels = None
    g = args.geometry
    if g == "ball":
        x = sample_ball(args.m, args.n, rng)
    elif g == "sphere":
        x = sample_sphere(args.m, args.n, rng)
    elif g == "gaussian":
        x = sample_gaussian(args.m, args.n, rng)
    elif g == "torus":
        x = sample_torus(args.m, args.n, rng)
    elif g == "annulus":
        x = sample_annulus(args.inner, 1.0, args.n, rng)
    elif g == "pinched-torus":
        x = sample_pinched_torus(args.n, rng)
    elif g == "hair-ball":
        x, labels = sample_hair_ball(HairBallSpec(args.m, args.n, args.n_interval, args.attach, args.match), rng)
    elif g == "stratified":
        x, labels = sample_stratified_cdb(args.n, args.n, args.n, rng)
    else:
        x = bolza.to_xy(bolza.sample_bolza(args.n, rng))
    if args.noise > 0 or args.ambient:
        x = embed_with_noise(x, NoiseSpec("expected_norm", args.noise, args.ambient or x.shape[1]), rng)
    header = [f"x{i}" for i in range(x.shape[1])]
    meta = {"geometry": g, "seed": args.seed, "m": args.m, "n": args.n, "shape": list(x.shape),
            "labels": None if labels is None else labels.tolist()}
    if args.out:
        write_csv(args.out, header, x.tolist())
        write_json(str(args.out) + ".json", meta)
    else:
        sys.stdout.write(format_csv(header, x.tolist()))


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def cmd_experiment(args):
    sizes = {k: v for k, v in (("m", args.m), ("n", args.n), ("trials", args.trials)) if v is not None}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        sizes[key.strip()] = _literal(val.strip())
    config = ExperimentConfig(args.name, args.seed, args.out, sizes, args.threshold, args.paper_scale, args.workers)
    bundle = run_experiment(config)
    if not args.out:
        sys.stdout.write(dumps({"manifest": manifest(config, bundle), "summary": bundle.summary}))


def cmd_conjecture_scan(args):
    extra = [read_matrix_csv(p) for p in args.matrix]
    if args.counterexample:
        extra.append(COUNTEREXAMPLE)
    report = conjecture_scan(args.trials, (args.min_size, args.max_size), args.seed,
                             include_snt=not args.euclidean_only, extra_matrices=extra)
    _emit(args, report)


COMMANDS = {
    "peel": cmd_peel,
    "neighborhoods": cmd_neighborhoods,
    "graph-metrics": cmd_graph_metrics,
    "dimension": cmd_dimension,
    "singularity": cmd_singularity,
    "sample": cmd_sample,
    "experiment": cmd_experiment,
    "conjecture-scan": cmd_conjecture_scan,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
        return 0
    except (PeelError, NeighborhoodError, np.linalg.LinAlgError, ArithmeticError) as exc:
        sys.stderr.write(f"peelkit: numeric failure: {exc}\n")
        return 2
    except (UsageError, ValueError, OSError) as exc:
        # InputError and MetricError are ValueErrors
        sys.stderr.write(f"peelkit: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
