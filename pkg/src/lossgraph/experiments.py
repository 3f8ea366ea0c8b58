"""Simulation study, prior calibration table and expected-KL study drivers."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .fincs import SearchConfig, run_fincs
from .geometry import (
    CovarianceModel,
    GWishartSpec,
    min_kl_complete_to_subgraphs,
    pd_inverse,
    sample_complete_gwishart,
    sample_mvn,
)
from .graphs import Graph, parse_edge_list
from .likelihood import DataMatrix
from .priors import PER_SIZE, WEIGHTED, PriorSpec, calibrate, size_distribution, size_moments

OFF_DIAGONAL = -0.3
DOMINANCE = 1.05

# name -> constructor taking m
PRIORS = {
    "pi(1,1)": PriorSpec.carvalho_scott,
    "pi(1,0)": lambda m: PriorSpec.villa_lee(m, 1.0),
    "pi(1,1/2)": PriorSpec.mixture,
    "pi(0,c)": PriorSpec.uniform,
}


def load_base_graph() -> Graph:
    text = resources.files("lossgraph.data").joinpath("base_graph_10.txt").read_text()
    return parse_edge_list(text)


def with_noise_vertices(g: Graph, noise: int) -> Graph:
    return Graph(g.p + noise, g.edges)


@dataclass(frozen=True)
class SimStudySpec:
    base_graph: Graph = field(default_factory=load_base_graph)
    noise_vertices: int = 5
    n: int = 50
    replicates: int = 10
    seed: int = 1
    priors: tuple[str, ...] = tuple(PRIORS)

    def __post_init__(self):
        if self.noise_vertices < 0:
            raise ValueError("noise vertex count must be >= 0")
        if self.replicates < 1 or self.n < 2:
            raise ValueError("need at least one replicate and two observations")
        unknown = set(self.priors) - set(PRIORS)
        if unknown:
            raise ValueError(f"unknown priors {sorted(unknown)}; choose from {list(PRIORS)}")

    @property
    def true_graph(self) -> Graph:
        return with_noise_vertices(self.base_graph, self.noise_vertices)

    @property
    def p(self) -> int:
        return self.base_graph.p + self.noise_vertices


def build_true_model(spec: SimStudySpec, rng=None) -> CovarianceModel:
    """Diagonally dominant precision supported on the true graph.

    Off-diagonal entries are -0.3 on edges; each diagonal entry is
    1.05 times its row's absolute off-diagonal sum plus one.  The
    construction is deterministic, ``rng`` is accepted for interface symmetry.
    """
    g = spec.true_graph
    k = np.zeros((g.p, g.p))
    for i, j in g.edges:
        k[i, j] = k[j, i] = OFF_DIAGONAL
    k[np.diag_indices(g.p)] = DOMINANCE * np.abs(k).sum(axis=1) + 1.0
    return CovarianceModel(pd_inverse(k), g, k)


def replicate_seeds(seed: int, count: int) -> list[tuple[int, int]]:
    """Independent (data, search) integer seeds per replicate index."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [tuple(int(x) for x in c.generate_state(2, dtype=np.uint32)) for c in children]


def simulate_data(model: CovarianceModel, n: int, seed: int) -> DataMatrix:
    x = sample_mvn(model.sigma, n, np.random.default_rng(seed))
    return x.centered_copy()


def edge_report(q: np.ndarray, true_graph: Graph) -> dict:
    """FP/FN accounting of the median graph (inclusion >= 0.5) against the truth."""
    p = true_graph.p
    med = {(i, j) for i in range(p) for j in range(i + 1, p) if q[i, j] >= 0.5}
    truth = set(true_graph.edges)
    tp = len(med & truth)
    fp = len(med - truth)
    fn = len(truth - med)
    assert fp + tp == len(med) and fn + tp == len(truth)
    return {
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "median_size": len(med),
        "true_edge_inclusion": [float(q[i, j]) for i, j in true_graph.edges],
        "false_positive_edges": sorted([i + 1, j + 1] for i, j in med - truth),
    }


def _run_replicate(args):
    spec, cfg, index, (data_seed, search_seed) = args
    model = build_true_model(spec)
    data = simulate_data(model, spec.n, data_seed)
    m = spec.p * (spec.p - 1) // 2
    out = {"index": index, "data_seed": data_seed, "search_seed": search_seed, "priors": {}}
    for name in spec.priors:
        res = run_fincs(data, PRIORS[name](m), replace(cfg, seed=search_seed))
        rep = edge_report(res.inclusion, spec.true_graph)
        rep["best_score"] = res.stats["best_score"]
        out["priors"][name] = rep
    return out


def run_sim_study(spec: SimStudySpec, cfg: SearchConfig | None = None, workers: int = 1) -> dict:
    """Run every prior on every replicate dataset; results are ordered by replicate index."""
    cfg = cfg or SearchConfig()
    seeds = replicate_seeds(spec.seed, spec.replicates)
    jobs = [(spec, cfg, r, s) for r, s in enumerate(seeds)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reps = list(pool.map(_run_replicate, jobs))
    else:
        reps = [_run_replicate(j) for j in jobs]
    summary = {}
    for name in spec.priors:
        fps = [r["priors"][name]["fp"] for r in reps]
        fns = [r["priors"][name]["fn"] for r in reps]
        incl = np.mean([r["priors"][name]["true_edge_inclusion"] for r in reps], axis=0)
        summary[name] = {
            "mean_fp": float(np.mean(fps)),
            "mean_fn": float(np.mean(fns)),
            "mean_true_edge_inclusion": [float(v) for v in incl],
        }
    return {
        "study": "simulation",
        "p": spec.p,
        "n": spec.n,
        "noise_vertices": spec.noise_vertices,
        "seed": spec.seed,
        "true_edges": [[i + 1, j + 1] for i, j in spec.true_graph.edges],
        "search": {
            "iterations": cfg.iterations,
            "global_period": cfg.global_period,
            "resample_period": cfg.resample_period,
            "capacity": cfg.capacity,
            "eps": cfg.eps,
        },
        "replicates": reps,
        "summary": summary,
    }


def run_calibration_study(m: int = 15, mean: float = 3.0, variance: float = 35.5, phi: float = 0.2) -> list[dict]:
    """Calibrated and quoted priors for the edge-count targets, with their moments."""
    rows = []

    def row(label, spec, weighting):
        mu, var = size_moments(size_distribution(spec, weighting))
        d = {"label": label, "weighting": weighting, "mean": mu, "variance": var}
        d.update({k: v for k, v in spec.to_dict().items() if k in ("h", "c", "phi")})
        rows.append(d)

    row("calibrated mean", calibrate(m, mean), PER_SIZE)
    row("calibrated mean, c=0.11", calibrate(m, mean, c=0.11), PER_SIZE)
    row("calibrated mean and variance", calibrate(m, mean, variance), PER_SIZE)
    row("pi(0.28,0.11)", PriorSpec.loss_based(m, 0.28, 0.11), PER_SIZE)
    row("pi(1.36,0.93)", PriorSpec.loss_based(m, 1.36, 0.93), PER_SIZE)
    row(f"bernoulli({phi:g})", PriorSpec.bernoulli(m, phi), WEIGHTED)
    return rows


# ---------------------------------------------------------------------------
# expected KL of the complete graph

SCALES = ("identity", "D", "D_inverse")


def scale_matrix(size: int, scale: str) -> np.ndarray:
    """Identity, D (diagonal ``size``, off-diagonal ``size - 1``) or inv(D)."""
    if scale == "identity":
        return np.eye(size)
    d = np.full((size, size), float(size - 1))
    np.fill_diagonal(d, float(size))
    if scale == "D":
        return d
    if scale == "D_inverse":
        return pd_inverse(d)
    raise ValueError(f"unknown scale {scale!r}; choose from {SCALES}")


@dataclass(frozen=True)
class KLStudySpec:
    sizes: tuple[int, ...] = (3, 5, 10)
    mc_samples: int = 1000
    scale: str = "identity"
    delta: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if any(s < 2 for s in self.sizes):
            raise ValueError("graph sizes must be >= 2")
        if self.scale not in SCALES:
            raise ValueError(f"unknown scale {self.scale!r}")


def kl_draws(size: int, scale: str, delta: float, mc_samples: int, seed_seq: np.random.SeedSequence) -> np.ndarray:
    """Minimum one-edge KL for ``mc_samples`` prior draws, one substream per draw."""
    spec = GWishartSpec(scale_matrix(size, scale), delta)
    out = np.empty(mc_samples)
    for r, child in enumerate(seed_seq.spawn(mc_samples)):
        k = sample_complete_gwishart(spec, np.random.default_rng(child))
        out[r] = min_kl_complete_to_subgraphs(pd_inverse(k))[0]
    return out


def run_kl_study(spec: KLStudySpec, seed: int | None = None) -> list[dict]:
    """Monte Carlo mean and standard error of the complete graph's minimum KL per size."""
    root = np.random.SeedSequence(spec.seed if seed is None else seed)
    rows = []
    for size, ss in zip(spec.sizes, root.spawn(len(spec.sizes))):
        v = kl_draws(size, spec.scale, spec.delta, spec.mc_samples, ss)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
        rows.append({"size": size, "scale": spec.scale, "mean": float(v.mean()), "stderr": se, "mc_samples": spec.mc_samples})
    return rows
