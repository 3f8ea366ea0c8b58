"""Command-line interface: ``lossgraph <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LossGraphError
from .experiments import (
    PRIORS,
    SCALES,
    KLStudySpec,
    SimStudySpec,
    build_true_model,
    load_base_graph,
    run_calibration_study,
    run_kl_study,
    run_sim_study,
)
from .fincs import SearchConfig, exact_posterior, median_graph, run_fincs
from .geometry import sample_mvn
from .graphs import read_edge_list
from .io import ResultBundle, emit_results, fmt, ingest_csv, write_csv_matrix, write_json
from .likelihood import LikelihoodConfig, log_marginal_likelihood
from .priors import PER_SIZE, WEIGHTED, PriorSpec, calibrate, log_prior, size_distribution, size_moments

log = logging.getLogger("lossgraph")

PRIOR_CHOICES = ("loss-based", "uniform", "carvalho-scott", "villa-lee", "mixture", "bernoulli", "beta-binomial")


def _add_prior_args(p):
    g = p.add_argument_group("prior")
    g.add_argument("--prior", choices=PRIOR_CHOICES, default="loss-based")
    g.add_argument("--h", type=float, default=1.0, help="loss-based scale (default 1)")
    g.add_argument("--c", type=float, default=1.0, help="loss-based mixing weight (default 1)")
    g.add_argument("--phi", type=float, default=0.5, help="Bernoulli edge probability")
    g.add_argument("--a", type=float, default=1.0, help="beta-binomial a")
    g.add_argument("--b", type=float, default=1.0, help="beta-binomial b")


def _add_data_args(p):
    p.add_argument("--data", required=True, help="numeric CSV, one column per variable")
    p.add_argument("--no-header", action="store_true", help="first CSV row is data")
    p.add_argument("--g", type=float, default=None, help="likelihood fraction (default 1/n)")


def _add_search_args(p):
    g = p.add_argument_group("search")
    g.add_argument("--iterations", type=int, default=100_000)
    g.add_argument("--global-period", type=int, default=50)
    g.add_argument("--resample-period", type=int, default=10)
    g.add_argument("--capacity", type=int, default=1000)
    g.add_argument("--eps", type=float, default=0.01)
    g.add_argument("--seed", type=int, default=None, help="random seed (mandatory)")
    g.add_argument("--progress", type=int, default=0, help="log progress every N iterations")


def _prior_from_args(args, m) -> PriorSpec:
    kind = args.prior
    if kind == "loss-based":
        return PriorSpec.loss_based(m, args.h, args.c)
    if kind == "uniform":
        return PriorSpec.uniform(m)
    if kind == "carvalho-scott":
        return PriorSpec.carvalho_scott(m)
    if kind == "villa-lee":
        return PriorSpec.villa_lee(m, args.h)
    if kind == "mixture":
        return PriorSpec.mixture(m)
    if kind == "bernoulli":
        return PriorSpec.bernoulli(m, args.phi)
    return PriorSpec.beta_binomial(m, args.a, args.b)


def _search_cfg(args) -> SearchConfig:
    return SearchConfig(
        iterations=args.iterations,
        global_period=args.global_period,
        resample_period=args.resample_period,
        capacity=args.capacity,
        eps=args.eps,
        seed=args.seed,
        progress_period=args.progress,
    )


def _split_priors(text: str) -> tuple[str, ...]:
    """Split a comma list of prior names; commas inside parentheses belong to the name."""
    return tuple(t.strip() for t in re.findall(r"[^,(]+(?:\([^)]*\))?", text) if t.strip())


def _require_seed(args):
    if args.seed is None:
        raise UsageError("--seed is mandatory for stochastic subcommands")


class UsageError(Exception):
    pass


def _config_echo(args) -> dict:
    skip = {"func", "config", "out", "emit"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# subcommands


def cmd_search(args):
    _require_seed(args)
    ds = ingest_csv(args.data, has_header=not args.no_header)
    data = ds.data
    prior = _prior_from_args(args, data.p * (data.p - 1) // 2)
    cfg = _search_cfg(args)
    t0 = time.perf_counter()
    res = run_fincs(data, prior, cfg, LikelihoodConfig(args.g))
    log.info("search finished in %.1f s", time.perf_counter() - t0)
    stats = dict(res.stats, dropped_rows=ds.dropped_rows)
    bundle = ResultBundle.from_search(res, data, ds.columns, prior.to_dict(), _config_echo(args), {"search": args.seed})
    bundle.stats = stats
    emit = set(args.emit.split(","))
    for path in emit_results(bundle, args.out, emit, top=args.top):
        print(path)
    best_g, best_s = res.graphs.best
    print(f"best log score {fmt(best_s)} with {best_g.k} edges; median graph has {res.median_graph.k} edges")


def cmd_calibrate(args):
    if args.vertices is None and args.max_edges is None:
        raise UsageError("give --vertices or --max-edges")
    m = args.max_edges if args.max_edges is not None else args.vertices * (args.vertices - 1) // 2
    spec = calibrate(m, args.mean, args.variance, c=args.fix_c, weighting=args.weighting)
    dist = size_distribution(spec, args.weighting)
    mean, var = size_moments(dist)
    print(f"h={fmt(spec.h)} c={fmt(spec.c)} m={m} mean={fmt(mean)} variance={fmt(var)}")
    lines = ["k,probability"] + [f"{k},{fmt(pk)}" for k, pk in enumerate(dist.probs)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    _require_seed(args)
    base = read_edge_list(args.graph) if args.graph else load_base_graph()
    spec = SimStudySpec(base_graph=base, noise_vertices=args.noise, n=args.n)
    model = build_true_model(spec)
    x = sample_mvn(model.sigma, args.n, np.random.default_rng(args.seed))
    write_csv_matrix(args.out, x.values, header=[f"V{i + 1}" for i in range(spec.p)])
    print(args.out)


def cmd_sim_study(args):
    _require_seed(args)
    base = read_edge_list(args.graph) if args.graph else load_base_graph()
    priors = _split_priors(args.priors) if args.priors else tuple(PRIORS)
    spec = SimStudySpec(base, args.noise, args.n, args.replicates, args.seed, priors)
    cfg = SearchConfig(
        iterations=args.iterations,
        global_period=args.global_period,
        resample_period=args.resample_period,
        capacity=args.capacity,
        eps=args.eps,
    )
    report = run_sim_study(spec, cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "sim_study.json", report)
    # one column per prior: inclusion of each true edge, then mean FP and FN
    true_edges = [tuple(e) for e in report["true_edges"]]
    summary = report["summary"]
    with (out / "sim_study_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge", *priors])
        for e_idx, (i, j) in enumerate(true_edges):
            w.writerow([f"{i}-{j}", *(fmt(summary[pr]["mean_true_edge_inclusion"][e_idx]) for pr in priors)])
        w.writerow(["FP", *(fmt(summary[pr]["mean_fp"]) for pr in priors)])
        w.writerow(["FN", *(fmt(summary[pr]["mean_fn"]) for pr in priors)])
    for pr in priors:
        s = report["summary"][pr]
        print(f"{pr}: mean FP {s['mean_fp']:.2f}, mean FN {s['mean_fn']:.2f}")


def cmd_kl_study(args):
    _require_seed(args)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for scale in args.scale.split(","):
        rows += run_kl_study(KLStudySpec(sizes, args.mc_samples, scale, args.delta, args.seed))
    write_json(out / "kl_study.json", {"study": "expected-kl", "seed": args.seed, "rows": rows})
    with (out / "kl_study.csv").open("w") as fh:
        fh.write("scale,size,mean,stderr\n")
        for r in rows:
            fh.write(f"{r['scale']},{r['size']},{fmt(r['mean'])},{fmt(r['stderr'])}\n")
    for r in rows:
        print(f"{r['scale']:>9} |V|={r['size']:<3} mean {r['mean']:.6g} se {r['stderr']:.2g}")


def cmd_calibration_study(args):
    rows = run_calibration_study(args.max_edges, args.mean, args.variance, args.phi)
    for r in rows:
        params = " ".join(f"{k}={fmt(r[k])}" for k in ("h", "c", "phi") if k in r)
        print(f"{r['label']}: {params} mean={fmt(r['mean'])} variance={fmt(r['variance'])}")
    if args.out:
        write_json(args.out, {"study": "calibration", "rows": rows})


def cmd_score(args):
    ds = ingest_csv(args.data, has_header=not args.no_header)
    g = read_edge_list(args.graph, p=ds.data.p)
    prior = _prior_from_args(args, g.m)
    lml = log_marginal_likelihood(ds.data, g, LikelihoodConfig(args.g))
    lp = log_prior(prior, g)
    print(f"log_marginal_likelihood {fmt(lml)}")
    print(f"log_prior {fmt(lp)}")
    print(f"log_score {fmt(lml + lp)}")


def cmd_enumerate(args):
    ds = ingest_csv(args.data, has_header=not args.no_header)
    data = ds.data
    prior = _prior_from_args(args, data.p * (data.p - 1) // 2)
    graphs, scores, probs = exact_posterior(data, prior, LikelihoodConfig(args.g))
    q = np.zeros((data.p, data.p))
    for g, w in zip(graphs, probs):
        for i, j in g.edges:
            q[i, j] += w
    q += q.T
    order = sorted(range(len(graphs)), key=lambda r: (-scores[r], graphs[r].adj))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    top = [
        {"rank": r + 1, "size": graphs[i].k, "log_score": float(scores[i]), "posterior": float(probs[i]),
         "edges": [[a + 1, b + 1] for a, b in graphs[i].edges]}
        for r, i in enumerate(order)
    ]
    write_json(out / "posterior.json", {
        "schema_version": 1, "p": data.p, "n": data.n, "prior": prior.to_dict(),
        "graph_count": len(graphs), "posterior_sum": float(probs.sum()),
        "inclusion": q.tolist(), "median_graph": [[a + 1, b + 1] for a, b in median_graph(q).edges],
        "graphs": top,
    })
    write_csv_matrix(out / "inclusion.csv", q, header=ds.columns)
    best = graphs[order[0]]
    print(f"{len(graphs)} decomposable graphs; posterior sums to {fmt(probs.sum())}")
    print(f"MAP graph: {[(a + 1, b + 1) for a, b in best.edges]} log score {fmt(scores[order[0]])}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossgraph", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key=value file supplementing the flags")
        p.set_defaults(func=func)
        return p

    p = add("search", cmd_search, "run FINCS on a dataset")
    _add_data_args(p)
    _add_prior_args(p)
    _add_search_args(p)
    p.add_argument("--out", default="results")
    p.add_argument("--emit", default="json,dot,csv")
    p.add_argument("--top", type=int, default=100, help="graphs listed in results.json")

    p = add("calibrate", cmd_calibrate, "choose (h, c) for a target edge-count mean/variance")
    p.add_argument("--vertices", type=int)
    p.add_argument("--max-edges", type=int)
    p.add_argument("--mean", type=float, required=True)
    p.add_argument("--variance", type=float)
    p.add_argument("--fix-c", type=float, default=None)
    p.add_argument("--weighting", choices=(PER_SIZE, WEIGHTED), default=PER_SIZE)
    p.add_argument("--out", help="write the size PMF CSV here instead of stdout")

    p = add("simulate", cmd_simulate, "sample a synthetic dataset from the study's true model")
    p.add_argument("--graph", help="base edge-list file (default: bundled 10-vertex graph)")
    p.add_argument("--noise", type=int, default=5)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("sim-study", cmd_sim_study, "replicated FINCS comparison of priors")
    p.add_argument("--graph")
    p.add_argument("--noise", type=int, default=5)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--priors", help=f"comma list from {','.join(PRIORS)}")
    p.add_argument("--workers", type=int, default=1)
    _add_search_args(p)
    p.add_argument("--out", default="sim_study")

    p = add("kl-study", cmd_kl_study, "expected minimum KL of the complete graph")
    p.add_argument("--sizes", default="3,5,10")
    p.add_argument("--mc-samples", type=int, default=1000)
    p.add_argument("--scale", default="identity", help=f"comma list from {','.join(SCALES)}")
    p.add_argument("--delta", type=float, default=3.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="kl_study")

    p = add("calibration-study", cmd_calibration_study, "calibration table for an edge-count target")
    p.add_argument("--max-edges", type=int, default=15)
    p.add_argument("--mean", type=float, default=3.0)
    p.add_argument("--variance", type=float, default=35.5)
    p.add_argument("--phi", type=float, default=0.2)
    p.add_argument("--out")

    p = add("score", cmd_score, "log score of one decomposable graph")
    _add_data_args(p)
    _add_prior_args(p)
    p.add_argument("--graph", required=True, help="edge-list file, 1-based")

    p = add("enumerate", cmd_enumerate, "exact posterior over all decomposable graphs (p <= 6)")
    _add_data_args(p)
    _add_prior_args(p)
    p.add_argument("--out", default="posterior")
    return parser


def read_config(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        cfg[k.replace("-", "_")] = v
    return cfg


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _parse(parser, argv):
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    if path:
        # file values become defaults, so explicit flags win
        subs = parser._subparsers._group_actions[0].choices
        command = next((t for t in argv if t in subs), None)
        if command is None:
            raise UsageError("--config needs a subcommand")
        sub = subs[command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in read_config(path).items():
            if k not in known or k in ("help", "config", "func"):
                raise UsageError(f"unknown config key {k!r} for {command}")
            action = known[k]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
            else:
                defaults[k] = action.type(v) if action.type else v
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as e:
        return int(e.code or 0)
    except UsageError as e:
        print(f"lossgraph: error: {e}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose or getattr(args, "progress", 0) else logging.WARNING,
                        stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as e:
        print(f"lossgraph {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (LossGraphError, ValueError, OSError) as e:
        print(f"lossgraph {args.command}: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
