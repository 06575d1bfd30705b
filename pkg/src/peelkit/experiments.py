"""Seeded experiment runners producing data-only result bundles.

Each runner returns a :class:`Bundle` holding a JSON-ready summary and a
set of CSV tables.  Trial ``t`` of an experiment seeded with ``s`` draws
from ``numpy.random.default_rng([s, t])`` so trials are independent of
execution order.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import bolza
from .dimension import (NeighborhoodFamily, gradient_norm_score, kendall_tau_b, local_dimension_field,
                        score_quantiles, vgt_dimension)
from .graphs import graph_metrics, knn_graph, radial_graph, wasserstein1_hist
from .io import write_csv, write_json
from .metric import MetricKind, PointCloud, pairwise_distances
from .neighborhoods import (UNBOUNDED_GUARD, NeighborIndex, ThresholdPolicy, all_neighborhoods,
                            approximate_peel, cardinalities, default_radial_threshold, hole_proxy,
                            neighborhood_graph, peel_neighborhood, radii)
from .peel import COUNTEREXAMPLE, PeelError, hereditary_violations, ned, peel
from .samplers import (HairBallSpec, NoiseSpec, embed_with_noise, sample_annulus, sample_ball, sample_gaussian,
                       sample_hair_ball, sample_pinched_torus, sample_sphere, sample_sphere_with_cluster,
                       sample_strand, sample_stratified_cdb, sample_torus)

log = logging.getLogger(__name__)

PARTIAL_FAILURE_RATE = 0.05


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    out: str | None = None
    sizes: dict = field(default_factory=dict)
    threshold: str = "default"
    paper_scale: bool = False
    workers: int | None = None

    def get(self, key, desk, paper=None):
        if key in self.sizes and self.sizes[key] is not None:
            return self.sizes[key]
        return paper if (self.paper_scale and paper is not None) else desk

    def config_hash(self) -> str:
        blob = json.dumps({k: v for k, v in asdict(self).items() if k not in ("out", "workers")},
                          sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Bundle:
    experiment: str
    summary: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    trials: int = 0
    failures: int = 0

    @property
    def partial(self) -> bool:
        return self.trials > 0 and self.failures > PARTIAL_FAILURE_RATE * self.trials


def manifest(config: ExperimentConfig, bundle: Bundle) -> dict:
    return {
        "experiment": config.name,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "config": {k: v for k, v in asdict(config).items() if k != "out"},
        "version": __version__,
        "constants": {
            "default_threshold": "2 * median k-th NN distance, k = ceil(log2 N) clamped to N-1",
            "unbounded_guard": UNBOUNDED_GUARD,
            "trial_seed": "default_rng([seed, trial])",
            "essa_pair_cap": 10000,
        },
        "trials": bundle.trials,
        "failures": bundle.failures,
        "partial": bundle.partial,
    }


def write_bundle(config: ExperimentConfig, bundle: Bundle, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", manifest(config, bundle))
    write_json(out / "summary.json", bundle.summary)
    for name, (header, rows) in bundle.tables.items():
        write_csv(out / f"{name}.csv", header, rows)
    return out


def _policy(config: ExperimentConfig, index) -> ThresholdPolicy:
    return ThresholdPolicy.parse(config.threshold, index)


def _hist_rows(hist: Counter, key="value"):
    return [(k, hist[k]) for k in sorted(hist)]


# -- neighborhood statistics -------------------------------------------------

def gaussian_cardinality(config: ExperimentConfig) -> Bundle:
    """Cardinality of the origin's unthresholded peel neighborhood amid a Gaussian sample."""
    m = config.get("m", 50)
    n = config.get("n", 1000)
    trials = config.get("trials", 200)
    hist = Counter()
    failures = 0
    for t in range(trials):
        x = np.vstack([np.zeros((1, m)), sample_gaussian(m, n, trial_rng(config.seed, t))])
        try:
            nb = peel_neighborhood(0, NeighborIndex(x), ThresholdPolicy())
        except PeelError as exc:
            log.warning("trial %d failed: %s", t, exc)
            failures += 1
            continue
        hist[nb.size] += 1
    mode = max(sorted(hist), key=lambda k: hist[k]) if hist else None
    return Bundle("gaussian-cardinality", {"m": m, "n": n, "trials": trials, "mode": mode,
                                           "histogram": {str(k): hist[k] for k in sorted(hist)}},
                  {"histogram": (["cardinality", "count"], _hist_rows(hist))}, trials, failures)


def poisson_convergence(config: ExperimentConfig) -> Bundle:
    """Unthresholded neighborhood cardinalities on flat tori of increasing dimension."""
    dims = list(config.get("dims", [2, 3, 4, 5, 6]))
    n = config.get("n", 5000, 100000)
    hists, frac, hist_rows, ratio_rows = [], [], [], []
    for i, m in enumerate(dims):
        idx = NeighborIndex(PointCloud(sample_torus(m, n, trial_rng(config.seed, i)), MetricKind.FLAT_TORUS))
        nbs = all_neighborhoods(idx, ThresholdPolicy(), allow_unbounded=True, workers=config.workers)
        thr = default_radial_threshold(idx)
        r = radii(nbs)
        h = Counter(cardinalities(nbs).tolist())
        hists.append(h)
        frac.append(float(np.mean(r > thr)))
        hist_rows += [(m, k, c) for k, c in _hist_rows(h)]
        q = np.quantile(r / thr, [0.5, 0.9, 0.99, 1.0])
        ratio_rows.append((m, thr, *q))
    w1 = [wasserstein1_hist(a, b) for a, b in zip(hists, hists[1:])]
    summary = {"dims": dims, "n": n, "wasserstein1": w1,
               "final_below_half_first": bool(len(w1) >= 2 and w1[-1] < 0.5 * w1[0]),
               "fraction_above_threshold": frac, "max_fraction_above_threshold": max(frac)}
    tables = {"histograms": (["m", "cardinality", "count"], hist_rows),
              "wasserstein1": (["m_from", "m_to", "w1"], [(a, b, w) for a, b, w in zip(dims, dims[1:], w1)]),
              "radius_ratios": (["m", "threshold", "q50", "q90", "q99", "max"], ratio_rows)}
    return Bundle("poisson-convergence", summary, tables, len(dims), 0)


def radii_stats(config: ExperimentConfig) -> Bundle:
    """Mean and standard deviation of thresholded radii over annulus samples."""
    inners = list(config.get("inner", [0.0, 0.25, 0.5, 0.75]))
    sizes = list(config.get("sizes", [50, 100, 200, 400]))
    sigma = config.get("sigma", 0.01)
    dim = config.get("dim", 2)
    trials = config.get("trials", 10)
    rows = []
    for a in inners:
        for n in sizes:
            means, stds = [], []
            for t in range(trials):
                x = _annulus(a, n, dim, sigma, trial_rng(config.seed, t))
                r = radii(all_neighborhoods(NeighborIndex(x), workers=config.workers))
                means.append(r.mean())
                stds.append(r.std())
            rows.append((a, n, float(np.mean(means)), float(np.std(means)), float(np.mean(stds)), float(np.std(stds))))
    header = ["inner", "n", "mean_radius", "sd_mean_radius", "radius_sd", "sd_radius_sd"]
    return Bundle("radii-stats", {"rows": [dict(zip(header, r)) for r in rows]}, {"radii": (header, rows)},
                  len(inners) * len(sizes) * trials)


# -- covers and graphs -------------------------------------------------------

def _annulus(inner, n, dim, sigma, rng):
    return embed_with_noise(sample_annulus(inner, 1.0, n, rng), NoiseSpec("std_dev", sigma, dim), rng)


def annulus_hole(config: ExperimentConfig) -> Bundle:
    """Hole proxy min(|x| - rho(x)) over annulus samples."""
    inners = list(config.get("inner", [0.0, 0.25, 0.5, 0.75]))
    dims = list(config.get("dims", [2]))
    sigmas = list(config.get("sigmas", [0.01]))
    sizes = list(config.get("sizes", [400]))
    trials = config.get("trials", 10)
    rows, summary_rows = [], []
    for a in inners:
        for dim in dims:
            for sigma in sigmas:
                for n in sizes:
                    vals = []
                    for t in range(trials):
                        x = _annulus(a, n, dim, sigma, trial_rng(config.seed, t))
                        h = hole_proxy(x, all_neighborhoods(NeighborIndex(x), workers=config.workers))
                        vals.append(h)
                        rows.append((a, dim, sigma, n, t, h))
                    v = np.array(vals)
                    summary_rows.append({"inner": a, "dim": dim, "sigma": sigma, "n": n, "mean": float(v.mean()),
                                         "std": float(v.std()), "positive": int(np.sum(v > 0)), "trials": trials})
    return Bundle("annulus-hole", {"cells": summary_rows},
                  {"proxy": (["inner", "dim", "sigma", "n", "trial", "proxy"], rows)},
                  len(rows))


def graph_comparison(config: ExperimentConfig) -> Bundle:
    """Peel-neighborhood graphs against kNN and radial graphs on a sphere with a nearby cluster."""
    trials = config.get("trials", 20)
    k_ref = config.get("k", 5)
    ks = list(config.get("ks", [3, 5, 7, 10]))
    radii_grid = list(config.get("radii", [0.1, 0.15, 0.2, 0.3]))
    rows, wins = [], 0
    for t in range(trials):
        x, _ = sample_sphere_with_cluster(seed=trial_rng(config.seed, t))
        d = pairwise_distances(x)
        idx = NeighborIndex.from_matrix(d)
        nbs = all_neighborhoods(idx, _policy(config, idx), workers=config.workers)
        graphs = {"peel": neighborhood_graph(nbs, idx)}
        graphs.update({f"knn{k}": knn_graph(d, k) for k in ks})
        if t == 0 or config.get("full_sweep", False):
            graphs.update({f"radial{r:g}": radial_graph(d, r) for r in radii_grid})
        mets = {name: graph_metrics(G) for name, G in graphs.items()}
        ref = mets.get(f"knn{k_ref}") or graph_metrics(knn_graph(d, k_ref))
        wins += mets["peel"]["efficiency_per_edge"] >= ref["efficiency_per_edge"]
        for name, mt in mets.items():
            rows.append((t, name, mt["n_edges"], mt["components"], mt["efficiency"],
                         mt["efficiency_per_edge"], mt["efficiency_per_length"]))
    return Bundle("graph-comparison", {"trials": trials, "k": k_ref, "peel_per_edge_wins": int(wins)},
                  {"metrics": (["trial", "graph", "edges", "components", "efficiency", "efficiency_per_edge",
                                "efficiency_per_length"], rows)}, trials)


def peel_approx(config: ExperimentConfig) -> Bundle:
    """NED and zero-pattern agreement between the peel and its neighborhood approximation."""
    dims = list(config.get("dims", [2, 3, 10]))
    n = config.get("n", 500)
    trials = config.get("trials", 1)
    rows = []
    failures = 0
    for i, m in enumerate(dims):
        for t in range(trials):
            x = sample_ball(m, n, np.random.default_rng([config.seed, i, t]))
            d = pairwise_distances(x)
            idx = NeighborIndex.from_matrix(d)
            p = peel(d).p
            try:
                nbs = all_neighborhoods(idx, _policy(config, idx), workers=config.workers)
                q = approximate_peel(idx, nbs).distribution.p
            except ValueError as exc:
                log.warning("dim %d trial %d failed: %s", m, t, exc)
                failures += 1
                continue
            a, b = p > 0, q > 0
            rows.append((m, t, ned(p, q, d), int(np.sum(a & b)), int(np.sum(a & ~b)), int(np.sum(~a & b)),
                         int(np.sum(~a & ~b)), float(np.mean(a == b))))
    header = ["dim", "trial", "ned", "both_nonzero", "only_exact", "only_approx", "both_zero", "agreement"]
    return Bundle("peel-approx", {"rows": [dict(zip(header, r)) for r in rows]}, {"ned": (header, rows)},
                  len(dims) * trials, failures)


# -- dimension ---------------------------------------------------------------

def _families(n: int, ks=None):
    ks = ks or list(range(3, max(3, math.ceil(math.log2(n))) + 1))
    return [NeighborhoodFamily("knn", k) for k in ks] + [
        NeighborhoodFamily("peel"), NeighborhoodFamily("iterated_peel"), NeighborhoodFamily("double_radius")]


def _quartiles(v):
    v = v[np.isfinite(v)]
    if v.size == 0:
        return [math.nan] * 3
    return [float(q) for q in np.quantile(v, [0.25, 0.5, 0.75])]


def dimension_fields(x, families, seed, workers=None, policy=None):
    idx = NeighborIndex(x)
    nbs = all_neighborhoods(idx, policy, workers=workers)
    return idx, nbs, {f.tag: local_dimension_field(idx, f, neighborhoods=nbs, seed=seed, workers=workers)
                      for f in families}


def sphere_dimension(config: ExperimentConfig) -> Bundle:
    """ESSa estimates on a noisy sphere over several neighborhood families."""
    m = config.get("m", 2)
    n = config.get("n", 1000)
    ambient = config.get("ambient", 10)
    noise = config.get("noise", 1e-2)
    rng = trial_rng(config.seed, 0)
    x = embed_with_noise(sample_sphere(m, n, rng), NoiseSpec("expected_norm", noise, ambient), rng)
    _, nbs, fields = dimension_fields(x, _families(n, config.get("ks", None)), config.seed, config.workers)
    rows = [(tag, *_quartiles(f.values), int(np.sum(~f.defined))) for tag, f in fields.items()]
    hist_rows = []
    edges = np.linspace(0, 2 * (m + 1), 4 * (m + 1) + 1)
    for tag, f in fields.items():
        h, _ = np.histogram(f.values[f.defined], bins=edges)
        hist_rows += [(tag, lo, hi, c) for lo, hi, c in zip(edges[:-1], edges[1:], h)]
    return Bundle("sphere-dimension", {"m": m, "n": n, "medians": {r[0]: r[2] for r in rows},
                                       "median_peel_size": float(np.median(cardinalities(nbs)))},
                  {"summary": (["family", "q25", "median", "q75", "undefined"], rows),
                   "density": (["family", "lo", "hi", "count"], hist_rows)}, 1)


def stratified_dimension(config: ExperimentConfig) -> Bundle:
    """Per-stratum estimates and Kendall tau-b against true dimension on circle, disk and ball."""
    n1, n2, n3 = (config.get("n1", 400), config.get("n2", 400), config.get("n3", 400))
    x, labels = sample_stratified_cdb(n1, n2, n3, trial_rng(config.seed, 0))
    n = x.shape[0]
    _, _, fields = dimension_fields(x, _families(n, config.get("ks", [math.ceil(math.log2(n))])),
                                    config.seed, config.workers)
    rows, taus, medians = [], {}, {}
    for tag, f in fields.items():
        med = [float(np.nanmedian(f.values[labels == s])) for s in (1, 2, 3)]
        taus[tag] = kendall_tau_b(f.values, labels)
        medians[tag] = med
        rows.append((tag, *med, taus[tag]))
    return Bundle("stratified-dimension", {"kendall_tau_b": taus, "stratum_medians": medians},
                  {"strata": (["family", "median_dim1", "median_dim2", "median_dim3", "tau_b"], rows),
                   "points": (["index", "label", *fields],
                              [(i, int(labels[i]), *(f.values[i] for f in fields.values())) for i in range(n)])}, 1)


def strand(config: ExperimentConfig) -> Bundle:
    """A high-dimensional sphere plus a few nearby points."""
    m = config.get("m", 10)
    n = config.get("n", 1000)
    ambient = config.get("ambient", 100)
    rng = trial_rng(config.seed, 0)
    x, labels = sample_strand(m, n, config.get("n_extra", 3), config.get("offset", 0.1), rng)
    x = embed_with_noise(x, NoiseSpec("expected_norm", config.get("noise", 1e-2), ambient), rng)
    _, nbs, fields = dimension_fields(x, _families(n, [math.ceil(math.log2(n))]), config.seed, config.workers)
    extra = np.flatnonzero(labels == 1)
    sphere = labels == 0
    rows = []
    for tag, f in fields.items():
        for e in extra:
            pct = float(np.mean(f.values[sphere][np.isfinite(f.values[sphere])] < f.values[e]))
            rows.append((tag, int(e), f.values[e], pct))
    tags = list(fields)
    taus = {f"{a}|{b}": kendall_tau_b(fields[a].values, fields[b].values)
            for i, a in enumerate(tags) for b in tags[i + 1:]}
    return Bundle("strand", {"kendall_tau_b": taus, "saturated_extra": [bool(nbs[e].saturated) for e in extra]},
                  {"extra_points": (["family", "index", "estimate", "fraction_of_sphere_below"], rows)}, 1)


def vgt_compare(config: ExperimentConfig) -> Bundle:
    """MDS followed by ESSa on peel neighborhoods against robust VGT on the Bolza surface, flat torus and sphere."""
    n = config.get("n", 1000)
    ks = list(config.get("ks", [10, 20, 40]))
    rng = trial_rng(config.seed, 0)
    spaces = {
        "bolza": NeighborIndex.from_matrix(bolza.bolza_distances(bolza.sample_bolza(n, rng))),
        "torus": NeighborIndex(PointCloud(sample_torus(2, n, rng), MetricKind.FLAT_TORUS)),
        "sphere": NeighborIndex(PointCloud(sample_sphere(2, n, rng), MetricKind.ANGULAR_SPHERE)),
    }
    rows = []
    for name, idx in spaces.items():
        nbs = all_neighborhoods(idx, _policy(config, idx), workers=config.workers)
        for fam in (NeighborhoodFamily("peel"), NeighborhoodFamily("iterated_peel")):
            f = local_dimension_field(idx, fam, use_mds=True, neighborhoods=nbs, seed=config.seed,
                                      workers=config.workers)
            size = float(np.median([fam.members(x, idx, nbs).size for x in range(idx.n)]))
            rows.append((name, "essa_" + fam.tag, size, *_quartiles(f.values)))
        for k in ks:
            est = np.array([vgt_dimension(idx.knn(x, k)[1], robust=True) for x in range(idx.n)])
            rows.append((name, f"vgt_k{k}", k, *_quartiles(est)))
    header = ["space", "method", "neighborhood_size", "q25", "median", "q75"]
    return Bundle("vgt-compare", {"rows": [dict(zip(header, r)) for r in rows]}, {"estimates": (header, rows)}, 1)


# -- singularities -----------------------------------------------------------

def hair_ball_scores(spec: HairBallSpec, rng, workers=None):
    """Score quantiles (s_1 and s_2) for one hair-ball sample."""
    x, labels = sample_hair_ball(spec, rng)
    idx = NeighborIndex(x)
    nbs = all_neighborhoods(idx, workers=workers)
    out = {}
    for j, fam in ((1, NeighborhoodFamily("peel")), (2, NeighborhoodFamily("iterated_peel"))):
        f = local_dimension_field(idx, fam, neighborhoods=nbs, workers=workers)
        out[j] = score_quantiles(gradient_norm_score(idx, j, f, nbs).values)
    return labels, out


def singularity(config: ExperimentConfig) -> Bundle:
    """Gradient-norm score quantiles on hair balls and a pinched torus."""
    trials = config.get("trials", 20)
    m = config.get("m", 10)
    spec = HairBallSpec(m, config.get("n", 1000), config.get("n_interval", 5),
                        attach=config.get("attach", True), match=config.get("match", True))
    rows, key_q = [], []
    failures = 0
    for t in range(trials):
        try:
            labels, q = hair_ball_scores(spec, trial_rng(config.seed, t), config.workers)
        except Exception as exc:  # noqa: BLE001 - per-trial failures are counted, not fatal
            log.warning("trial %d failed: %s", t, exc)
            failures += 1
            continue
        key = list(np.flatnonzero(labels == 2)[:1]) + list(np.flatnonzero(labels == 1)[:1])
        key_q.append(float(np.mean(q[2][key])))
        for j in (1, 2):
            for s in np.unique(labels):
                rows.append((t, j, int(s), float(np.nanmean(q[j][labels == s]))))
    # pinched torus: where do the top 1% of s_2 scores sit
    xt = sample_pinched_torus(config.get("n_torus", 2000), trial_rng(config.seed, trials))
    idx = NeighborIndex(xt)
    nbs = all_neighborhoods(idx, workers=config.workers)
    f = local_dimension_field(idx, NeighborhoodFamily("iterated_peel"), neighborhoods=nbs, workers=config.workers)
    q = score_quantiles(gradient_norm_score(idx, 2, f, nbs).values)
    theta = np.abs(np.angle(np.exp(1j * np.arctan2(xt[:, 1], xt[:, 0]))))
    top = q > 0.99
    summary = {"hair_ball": {"m": m, "trials": trials, "mean_key_quantile": float(np.mean(key_q)) if key_q else None,
                             "key_quantiles": key_q},
               "pinched_torus": {"top_count": int(top.sum()),
                                 "top_median_angle_to_pinch": float(np.median(theta[top])) if top.any() else None,
                                 "all_median_angle_to_pinch": float(np.median(theta))}}
    return Bundle("singularity", summary,
                  {"stratum_quantiles": (["trial", "level", "stratum", "mean_quantile"], rows),
                   "pinched_torus": (["index", "angle_to_pinch", "s2_quantile"],
                                     [(i, theta[i], q[i]) for i in range(idx.n)])}, trials, failures)


# -- conjecture scan ---------------------------------------------------------

def _random_snt_matrix(rng, n):
    # powers a in (0, 1) of Euclidean distances stay strictly negative type
    x = rng.standard_normal((n, int(rng.integers(1, 6))))
    return pairwise_distances(x) ** rng.uniform(0.3, 1.0)


def conjecture_scan(trials: int = 500, sizes=(4, 12), seed: int = 0, include_snt: bool = True,
                    extra_matrices=None) -> dict:
    """Search for subsets I of a peel whose own peel is not I.

    Draws ``trials`` random Euclidean clouds (and as many random strictly
    negative type matrices when ``include_snt``) with sizes in the inclusive
    range ``sizes``.  Each violating matrix is reported once with all of its
    witness subsets.
    """
    lo, hi = sizes
    violations = []
    counts = {"euclidean": 0, "snt": 0, "given": 0}

    def check(kind, t, d):
        counts[kind] += 1
        bad = hereditary_violations(d, rng=np.random.default_rng([seed, t, 1]))
        if bad:
            violations.append({"source": kind, "trial": t, "matrix": d.tolist(),
                               "peel": peel(d).support.tolist(), "witnesses": [list(b) for b in bad]})

    for t in range(trials):
        rng = trial_rng(seed, t)
        n = int(rng.integers(lo, hi + 1))
        check("euclidean", t, pairwise_distances(rng.standard_normal((n, int(rng.integers(1, 6))))))
        if include_snt:
            check("snt", t, _random_snt_matrix(rng, n))
    for t, d in enumerate(extra_matrices or []):
        check("given", t, np.asarray(d, dtype=float))
    by_source = Counter(v["source"] for v in violations)
    return {"trials": counts, "violating_matrices": {k: by_source.get(k, 0) for k in counts},
            "violations": violations}


def counterexample_scan() -> dict:
    return conjecture_scan(trials=0, extra_matrices=[COUNTEREXAMPLE])


EXPERIMENTS = {
    "poisson-convergence": poisson_convergence,
    "gaussian-cardinality": gaussian_cardinality,
    "annulus-hole": annulus_hole,
    "graph-comparison": graph_comparison,
    "peel-approx": peel_approx,
    "sphere-dimension": sphere_dimension,
    "stratified-dimension": stratified_dimension,
    "strand": strand,
    "singularity": singularity,
    "vgt-compare": vgt_compare,
    "radii-stats": radii_stats,
}


def run_experiment(config: ExperimentConfig) -> Bundle:
    if config.name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {config.name!r}; choose from {sorted(EXPERIMENTS)}")
    bundle = EXPERIMENTS[config.name](config)
    if bundle.partial:
        log.warning("%s: %d of %d trials failed; bundle is partial", config.name, bundle.failures, bundle.trials)
    if config.out:
        write_bundle(config, bundle, config.out)
    return bundle
