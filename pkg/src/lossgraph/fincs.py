"""Feature-inclusion stochastic search (FINCS) over decomposable graphs.

A serial, guided search mixing three moves:

* local: add or delete one edge, keeping the graph chordal, with edges picked
  in proportion to (one minus) their estimated inclusion probability;
* resampling: jump back to a graph from the saved list in proportion to its
  posterior weight;
* global: triangulate the median graph from above and below, pick one of the
  pair by posterior weight and hill-climb from it.

The search is not a Markov chain; every visited graph is scored and offered
to a capped list of the best graphs, which is the output.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyList, NotDecomposable, NotPD
from .graphs import (
    Graph,
    _bits,
    can_add,
    can_delete,
    enumerate_decomposable,
    is_decomposable,
    max_decomposable_subgraph,
    min_fill_triangulation,
    pair_index,
)
from .likelihood import (
    DataMatrix,
    GraphScorer,
    LikelihoodConfig,
    clique_terms,
    log_posterior_score,
    toggled_terms,
)
from .priors import PriorSpec

log = logging.getLogger(__name__)

MEDIAN_THRESHOLD = 0.5
_MAX_REJECTIONS = 64
_CLIMB_TOL = 1e-10


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 100_000
    global_period: int = 50
    resample_period: int = 10
    capacity: int = 1000
    eps: float = 0.01
    seed: int = 0
    refresh_period: int = 10_000
    progress_period: int = 0
    memoize: bool = True

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.global_period < 1 or self.resample_period < 1:
            raise ValueError("move periods must be >= 1")
        if self.capacity < 1:
            raise ValueError("list capacity must be >= 1")
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")
        if self.refresh_period < 1:
            raise ValueError("refresh_period must be >= 1")


class ScoredGraphList:
    """The ``capacity`` best distinct graphs seen so far, with their log scores.

    When full, a newcomer replaces the lowest-scoring entry if it beats it.
    Ties in score are broken by the graph's canonical adjacency key.
    """

    def __init__(self, capacity: int = 1000):
        self.capacity = capacity
        self._scores: dict[Graph, float] = {}
        self._heap: list[tuple[float, tuple[int, ...], Graph]] = []
        self.max_score = -math.inf
        self._sorted = None

    def __len__(self):
        return len(self._scores)

    def __contains__(self, graph):
        return graph in self._scores

    def __iter__(self):
        return iter(self.entries())

    def score_of(self, graph):
        return self._scores[graph]

    def offer(self, graph: Graph, score: float, check: bool = True):
        """Try to insert; returns ``(inserted, evicted)`` with ``evicted`` a (graph, score) pair or None."""
        if graph in self._scores:
            return False, None
        if check and not is_decomposable(graph):
            raise NotDecomposable("only decomposable graphs may enter the list")
        item = (score, graph.adj, graph)
        evicted = None
        if len(self._heap) < self.capacity:
            heapq.heappush(self._heap, item)
        elif item[:2] > self._heap[0][:2]:
            old = heapq.heapreplace(self._heap, item)
            del self._scores[old[2]]
            evicted = (old[2], old[0])
        else:
            return False, None
        self._scores[graph] = score
        if score > self.max_score:
            self.max_score = score
        self._sorted = None
        return True, evicted

    def entries(self) -> list[tuple[Graph, float]]:
        """Entries sorted by descending score (ties by adjacency key)."""
        if self._sorted is None:
            self._sorted = sorted(self._scores.items(), key=lambda gs: (-gs[1], gs[0].adj))
        return self._sorted

    @property
    def best(self) -> tuple[Graph, float]:
        if not self._scores:
            raise EmptyList("list is empty")
        return self.entries()[0]

    @property
    def p(self) -> int:
        return self.best[0].p


def _weights(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    w = np.exp(s - s.max())
    return w / w.sum()


def update_inclusion(lst: ScoredGraphList) -> np.ndarray:
    """Posterior-weighted edge inclusion frequencies over the listed graphs."""
    entries = lst.entries() if isinstance(lst, ScoredGraphList) else sorted(lst, key=lambda gs: (-gs[1], gs[0].adj))
    if not entries:
        raise EmptyList("cannot estimate inclusion from an empty list")
    p = entries[0][0].p
    w = _weights([s for _, s in entries])
    q = np.zeros((p, p))
    for (graph, _), wr in zip(entries, w):
        for i, j in graph.edges:
            q[i, j] += wr
    q = np.clip(q + q.T, 0.0, 1.0)
    return q


def median_graph(q: np.ndarray, threshold: float = MEDIAN_THRESHOLD, strict: bool = False) -> Graph:
    """Edges whose inclusion probability is at least (or strictly above) ``threshold``."""
    a = q > threshold if strict else q >= threshold
    np.fill_diagonal(a, False)
    return Graph.from_matrix(a)


def initialize(data: DataMatrix) -> Graph:
    """Screening graph on marginal correlations, triangulated by min-fill.

    An edge is kept when the absolute sample correlation exceeds 2 / sqrt(n).
    """
    gram = np.asarray(data.gram)
    d = np.sqrt(np.diag(gram))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = gram / np.outer(d, d)
    r = np.nan_to_num(r, nan=0.0, posinf=0.0, neginf=0.0)
    a = np.abs(r) > 2.0 / math.sqrt(data.n)
    np.fill_diagonal(a, False)
    return min_fill_triangulation(Graph.from_matrix(a))


# ---------------------------------------------------------------------------
# moves


def _upper(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float)[np.triu_indices(q.shape[0], 1)]


def _sample(cum: np.ndarray, rng) -> int:
    t = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(t, len(cum) - 1)


def _pick_toggle(g: Graph, qvec: np.ndarray, pairs, eps: float, rng) -> tuple[int, int] | None:
    k, m = g.k, g.m
    if m == 0:
        return None
    if k == 0:
        add = True
    elif k == m:
        add = False
    else:
        add = rng.random() < 0.5
    adj = g.adj
    p = g.p
    if add:
        w = np.clip(qvec, eps, 1.0 - eps)
        w[g.edge_index()] = 0.0
        cum = np.cumsum(w)
        pi, pj = pairs
        for _ in range(_MAX_REJECTIONS):
            t = _sample(cum, rng)
            i, j = int(pi[t]), int(pj[t])
            if can_add(adj, i, j):
                return i, j
        legal = [
            (i, j)
            for i in range(p)
            for j in _bits(~adj[i] & ((1 << p) - 1) & ~((1 << (i + 1)) - 1))
            if can_add(adj, i, j)
        ]
        w = np.clip([qvec[pair_index(i, j, p)] for i, j in legal], eps, 1.0 - eps)
    else:
        legal = [(i, j) for i, j in g.edges if can_delete(adj, i, j)]
        w = np.clip([1.0 - qvec[pair_index(i, j, p)] for i, j in legal], eps, 1.0 - eps)
    return legal[_sample(np.cumsum(w), rng)]


def local_move(current: Graph, q: np.ndarray, rng, eps: float = 0.01) -> Graph:
    """Toggle one legal edge guided by inclusion probabilities ``q`` (p x p).

    Additions are drawn with weight ``clip(q_ij, eps, 1 - eps)`` and
    deletions with ``clip(1 - q_ij, eps, 1 - eps)``; each kind is chosen
    with probability one half unless only one is possible.
    """
    p = current.p
    pair = _pick_toggle(current, _upper(q), np.triu_indices(p, 1), eps, rng)
    return current if pair is None else current.toggle(*pair)


def resample_move(lst: ScoredGraphList, rng) -> Graph:
    """Draw a listed graph with probability proportional to its posterior weight."""
    entries = lst.entries() if isinstance(lst, ScoredGraphList) else list(lst)
    if not entries:
        raise EmptyList("cannot resample from an empty list")
    w = _weights([s for _, s in entries])
    return entries[_sample(np.cumsum(w), rng)][0]


def _components(adj, p) -> list[int]:
    label = [-1] * p
    comps = []
    for v in range(p):
        if label[v] >= 0:
            continue
        reach = frontier = 1 << v
        while frontier:
            nxt = 0
            for w in _bits(frontier):
                nxt |= adj[w]
            frontier = nxt & ~reach
            reach |= frontier
        for w in _bits(reach):
            label[w] = len(comps)
        comps.append(reach)
    return label


class _PairTable:
    """Score changes of joining two vertices with no common neighbours."""

    def __init__(self, scorer: GraphScorer):
        p = scorer.p
        t1 = [scorer.term(1 << v) for v in range(p)]
        w = np.full((p, p), -np.inf)
        for i in range(p):
            for j in range(i + 1, p):
                w[i, j] = scorer.term((1 << i) | (1 << j)) - t1[i] - t1[j]
        self.w = w


def hill_climb(start: Graph, scorer: GraphScorer, max_steps: int | None = None, _table=None) -> Graph:
    """Best-improvement single-edge ascent within decomposable graphs.

    Ties go to the lexicographically smallest edge.  Stops when no legal
    toggle raises the score, or after ``max_steps`` (default ``m``) steps.
    """
    p = start.p
    m = start.m
    table = _table if _table is not None else _PairTable(scorer)
    adj = list(start.adj)
    k = start.k
    steps = m if max_steps is None else max_steps
    for _ in range(steps):
        best_d, best_pair = _CLIMB_TOL, None
        label = _components(adj, p)
        comp = np.asarray(label)
        # additions across components: no common neighbours, always legal
        if k < m:
            cross = comp[:, None] != comp[None, :]
            if cross.any():
                vals = np.where(cross, table.w, -np.inf)
                flat = int(np.argmax(vals))
                d = vals.flat[flat] + scorer.log_prior_k(k + 1) - scorer.log_prior_k(k)
                if d > best_d:
                    best_d, best_pair = d, divmod(flat, p)
        for i in range(p):
            a_i = adj[i]
            for j in range(i + 1, p):
                if a_i >> j & 1:
                    if not can_delete(adj, i, j):
                        continue
                elif label[i] != label[j] or not can_add(adj, i, j):
                    continue
                d = scorer.toggle_delta(adj, i, j, k)
                if d > best_d or (d == best_d and best_pair is not None and (i, j) < best_pair):
                    best_d, best_pair = d, (i, j)
        if best_pair is None:
            break
        i, j = best_pair
        if adj[i] >> j & 1:
            k -= 1
        else:
            k += 1
        adj[i] ^= 1 << j
        adj[j] ^= 1 << i
    return Graph.from_adj(p, adj)


def triangulation_pair(q: np.ndarray) -> tuple[Graph, Graph, Graph]:
    """Median graph (strict 0.5 threshold) with its chordal super- and subgraph."""
    gn = median_graph(q, strict=True)
    scores = {(i, j): float(q[i, j]) for i, j in gn.edges}
    return gn, min_fill_triangulation(gn), max_decomposable_subgraph(gn, scores)


def global_move(q: np.ndarray, scorer: GraphScorer, rng, _cache=None, _table=None) -> Graph | None:
    """Jump via the median triangulation pair, then hill-climb.

    Returns None when neither member of the pair can be scored.
    """
    _, gplus, gminus = triangulation_pair(q)
    if gplus == gminus:
        start = gplus
    else:
        cands, scores = [], []
        for g in (gplus, gminus):
            try:
                scores.append(scorer.score(g))
                cands.append(g)
            except NotPD:
                pass
        if not cands:
            return None
        start = cands[_sample(np.cumsum(_weights(scores)), rng)] if len(cands) == 2 else cands[0]
    if _cache is not None and start in _cache:
        return _cache[start]
    try:
        out = hill_climb(start, scorer, _table=_table)
    except NotPD:
        return None
    if _cache is not None:
        _cache[start] = out
    return out


# ---------------------------------------------------------------------------
# driver


class _InclusionTracker:
    """Running numerator/denominator of inclusion frequencies over the list."""

    def __init__(self, p):
        self.p = p
        self.num = np.zeros(p * (p - 1) // 2)
        self.den = 0.0
        self.ref = None
        self.idx: dict[Graph, np.ndarray] = {}

    def add(self, g, score):
        if self.ref is None or score > self.ref:
            if self.ref is not None:
                f = math.exp(self.ref - score)
                self.num *= f
                self.den *= f
            self.ref = score
        idx = g.edge_index()
        self.idx[g] = idx
        w = math.exp(score - self.ref)
        self.num[idx] += w
        self.den += w

    def remove(self, g, score):
        idx = self.idx.pop(g)
        w = math.exp(score - self.ref)
        self.num[idx] -= w
        self.den -= w

    def rebuild(self, lst: ScoredGraphList):
        self.num[:] = 0.0
        self.den = 0.0
        self.ref = None
        self.idx = {}
        for g, s in sorted(lst.entries(), key=lambda gs: gs[1], reverse=True):
            self.add(g, s)

    def vector(self):
        return np.clip(self.num / self.den, 0.0, 1.0)


class FincsResult(NamedTuple):
    graphs: ScoredGraphList
    inclusion: np.ndarray
    median_graph: Graph
    stats: dict


def run_fincs(
    data: DataMatrix,
    prior: PriorSpec,
    cfg: SearchConfig | None = None,
    lik_cfg: LikelihoodConfig | None = None,
    scorer: GraphScorer | None = None,
    start: Graph | None = None,
) -> FincsResult:
    """Run the serial search and summarise the saved graphs.

    Iteration ``t`` (1-based) is a global move when ``t`` is a multiple of
    ``global_period``, otherwise a resampling move when it is a multiple of
    ``resample_period``, otherwise a local move.  Proposals that cannot be
    scored (a clique too large for the sample size) are skipped.
    """
    cfg = cfg or SearchConfig()
    scorer = scorer or GraphScorer(data, prior, lik_cfg)
    rng = np.random.default_rng(cfg.seed)
    p = scorer.p
    pairs = np.triu_indices(p, 1)
    memo: dict[Graph, float] | None = {} if cfg.memoize else None
    climb_cache = {} if cfg.memoize else None
    table = None
    lst = ScoredGraphList(cfg.capacity)
    tracker = _InclusionTracker(p)
    stats = {"local": 0, "resample": 0, "global": 0, "skipped": 0, "scored": 0, "unique": 0}

    def score(g, terms):
        if memo is not None:
            s = memo.get(g)
            if s is not None:
                return s
        s = scorer.score_from_terms(terms, g.k)
        stats["scored"] += 1
        if memo is not None:
            memo[g] = s
        return s

    def offer(g, s):
        inserted, evicted = lst.offer(g, s, check=False)
        if inserted:
            if evicted is not None:
                tracker.remove(*evicted)
            tracker.add(g, s)

    current = start if start is not None else initialize(data)
    if start is not None and not is_decomposable(start):
        current = min_fill_triangulation(start)
    terms = clique_terms(current)
    offer(current, score(current, terms))
    qvec = tracker.vector()
    for it in range(1, cfg.iterations + 1):
        if it % cfg.global_period == 0:
            stats["global"] += 1
            if table is None:
                table = _PairTable(scorer)
            q = np.zeros((p, p))
            q[pairs] = qvec
            q += q.T
            nxt = global_move(q, scorer, rng, _cache=climb_cache, _table=table)
            nxt_terms = None if nxt is None else clique_terms(nxt)
        elif it % cfg.resample_period == 0:
            stats["resample"] += 1
            nxt = resample_move(lst, rng)
            nxt_terms = clique_terms(nxt)
        else:
            stats["local"] += 1
            pair = _pick_toggle(current, qvec, pairs, cfg.eps, rng)
            if pair is None:
                nxt, nxt_terms = current, terms
            else:
                nxt = current.toggle(*pair)
                nxt_terms = toggled_terms(terms, current.adj, *pair)
        if nxt is None:
            stats["skipped"] += 1
            continue
        try:
            s = score(nxt, nxt_terms)
        except NotPD:
            stats["skipped"] += 1
            continue
        current, terms = nxt, nxt_terms
        offer(nxt, s)
        if it % cfg.refresh_period == 0:
            tracker.rebuild(lst)
        qvec = tracker.vector()
        if cfg.progress_period and it % cfg.progress_period == 0:
            log.info("iteration %d best %.6f list %d", it, lst.max_score, len(lst))
    stats["unique"] = len(memo) if memo is not None else None
    stats["iterations"] = cfg.iterations
    stats["best_score"] = lst.max_score
    q = update_inclusion(lst)
    return FincsResult(lst, q, median_graph(q), stats)


def exact_posterior(data: DataMatrix, prior: PriorSpec, lik_cfg: LikelihoodConfig | None = None):
    """Every decomposable graph (p <= 6) with its directly evaluated log score.

    Returns ``(graphs, log_scores, probabilities)``.
    """
    graphs = enumerate_decomposable(data.p)
    scores = np.array([log_posterior_score(data, g, prior, lik_cfg) for g in graphs])
    return graphs, scores, _weights(scores)
