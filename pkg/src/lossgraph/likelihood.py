"""Fractional marginal likelihood of decomposable Gaussian graphical models.

The marginal likelihood is a ratio of hyper-inverse Wishart normalising
constants, each of which factorises over cliques and separators.  All
quantities are kept on the log scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NotPD
from .graphs import Graph, JunctionTree, cliques_and_separators, junction_tree, mask_to_tuple
from .priors import PriorSpec, log_prior, log_prior_size

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class DataMatrix:
    values: np.ndarray
    centered: bool
    gram: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, x, center: bool = True) -> "DataMatrix":
        x = np.array(x, dtype=float, copy=True)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2:
            raise ValueError("data must be a 2-D array")
        if center:
            x -= x.mean(axis=0)
        x.setflags(write=False)
        gram = x.T @ x
        gram = 0.5 * (gram + gram.T)
        gram.setflags(write=False)
        return cls(x, center, gram)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def centered_copy(self) -> "DataMatrix":
        return self if self.centered else DataMatrix.from_array(self.values, center=True)


@dataclass(frozen=True)
class LikelihoodConfig:
    """Fraction ``g`` of the data used to train the implied prior; ``None`` means 1/n."""

    g: float | None = None

    def fraction(self, n: int) -> float:
        g = 1.0 / n if self.g is None else self.g
        if not 0.0 < g < 1.0:
            raise DomainError(f"fraction g must lie in (0, 1), got {g}")
        return g


def log_mvgamma(a: int, x: float) -> float:
    """log of the multivariate gamma function of dimension ``a``."""
    if a < 0:
        raise DomainError("dimension must be non-negative")
    if a == 0:
        return 0.0
    if x + (1 - a) / 2 <= 0:
        raise DomainError(f"multivariate gamma undefined at a={a}, x={x}")
    j = np.arange(1, a + 1)
    return float(a * (a - 1) / 4 * LOG_PI + gammaln(x + (1 - j) / 2).sum())


def _logdet_pd(a: np.ndarray) -> float:
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NotPD("submatrix is not positive definite") from None
    d = np.diag(chol)
    if np.any(d <= 1e-12 * max(1.0, float(d.max()))):
        raise NotPD("submatrix is numerically singular")
    return float(2.0 * np.log(d).sum())


def _subset_log_h(idx, b: float, d: np.ndarray) -> float:
    """One clique (or separator) factor of log H_G(b, D)."""
    a = len(idx)
    if a == 0:
        return 0.0
    expo = (b + a - 1) / 2
    return expo * _logdet_pd(d[np.ix_(idx, idx)] / 2.0) - log_mvgamma(a, expo)


def log_hiw_norm_const(jt: JunctionTree, b: float, d: np.ndarray) -> float:
    """log H_G(b, D) of the hyper-inverse Wishart for a decomposable graph."""
    if not b > 0:
        raise DomainError("degrees of freedom must be positive")
    d = np.asarray(d, dtype=float)
    total = 0.0
    for c in jt.clique_sets:
        total += _subset_log_h(list(c), b, d)
    for s in jt.separator_sets:
        total -= _subset_log_h(list(s), b, d)
    return total


def log_marginal_likelihood(data: DataMatrix, graph: Graph, cfg: LikelihoodConfig | None = None) -> float:
    cfg = cfg or LikelihoodConfig()
    if graph.p != data.p:
        raise DomainError(f"graph has {graph.p} vertices, data has {data.p} columns")
    n, p = data.n, data.p
    g = cfg.fraction(n)
    jt = junction_tree(graph)
    xtx = data.gram
    return (
        -n * p / 2 * LOG_2PI
        + log_hiw_norm_const(jt, g * n, g * xtx)
        - log_hiw_norm_const(jt, n, xtx)
    )


def log_posterior_score(data: DataMatrix, graph: Graph, prior: PriorSpec, cfg: LikelihoodConfig | None = None) -> float:
    return log_marginal_likelihood(data, graph, cfg) + log_prior(prior, graph)


def clique_terms(graph: Graph) -> dict[int, int]:
    """Cliques with coefficient +1 and separators with -1, merged by subset.

    Empty separators are dropped since their term is zero.
    """
    cliques, seps = cliques_and_separators(graph)
    terms: dict[int, int] = {}
    for c in cliques:
        terms[c] = terms.get(c, 0) + 1
    for s in seps:
        if s:
            terms[s] = terms.get(s, 0) - 1
    return {m: c for m, c in terms.items() if c}


def toggled_terms(terms: dict[int, int], adj, i: int, j: int) -> dict[int, int]:
    """Update ``clique_terms`` across a legal toggle of ``(i, j)``.

    ``adj`` is the adjacency before the toggle.  With ``S`` the common
    neighbourhood, adding the edge contributes ``+[S+i+j] + [S] - [S+i] - [S+j]``;
    deleting contributes the negation.
    """
    s = adj[i] & adj[j]
    bi, bj = 1 << i, 1 << j
    sign = -1 if adj[i] >> j & 1 else 1
    out = dict(terms)
    for mask, c in ((s | bi | bj, sign), (s, sign), (s | bi, -sign), (s | bj, -sign)):
        if mask:
            v = out.get(mask, 0) + c
            if v:
                out[mask] = v
            else:
                del out[mask]
    return out


class GraphScorer:
    """Cached log posterior scores for one dataset, prior and fraction.

    Clique and separator contributions are stored per vertex subset, so a
    graph's score is a sum of cached terms.  Sums use ``math.fsum`` so the
    result does not depend on the order in which cliques are listed.
    Dictionary writes are idempotent, which makes sharing a scorer between
    threads benign.
    """

    def __init__(self, data: DataMatrix, prior: PriorSpec, cfg: LikelihoodConfig | None = None):
        self.data = data
        self.prior = prior
        self.cfg = cfg or LikelihoodConfig()
        self.n, self.p = data.n, data.p
        if prior.m != self.p * (self.p - 1) // 2:
            raise DomainError(f"prior built for m={prior.m}, data has p={self.p}")
        self.g = self.cfg.fraction(self.n)
        self._gram = np.array(data.gram)
        self._terms: dict[int, float] = {0: 0.0}
        self._prior_cache: dict[int, float] = {}
        self._const = -self.n * self.p / 2 * LOG_2PI
        self._log_g_half = math.log(self.g / 2.0)
        self._log_half = math.log(0.5)

    def term(self, mask: int) -> float:
        """Per-subset contribution: log H factor at (gn, g XtX) minus at (n, XtX)."""
        t = self._terms.get(mask)
        if t is None:
            idx = list(mask_to_tuple(mask))
            a = len(idx)
            ld = _logdet_pd(self._gram[np.ix_(idx, idx)])
            b1 = (self.g * self.n + a - 1) / 2
            b0 = (self.n + a - 1) / 2
            t = (
                b1 * (a * self._log_g_half + ld)
                - log_mvgamma(a, b1)
                - b0 * (a * self._log_half + ld)
                + log_mvgamma(a, b0)
            )
            self._terms[mask] = t
        return t

    def log_prior_k(self, k: int) -> float:
        v = self._prior_cache.get(k)
        if v is None:
            v = self._prior_cache[k] = log_prior_size(self.prior, k)
        return v

    def log_ml_from_terms(self, terms: dict[int, int]) -> float:
        """Log marginal likelihood from a signed multiset of vertex subsets."""
        parts = [self._const]
        for mask, coef in terms.items():
            t = self.term(mask)
            if coef > 0:
                parts.extend([t] * coef)
            else:
                parts.extend([-t] * -coef)
        return math.fsum(parts)

    def log_ml(self, graph: Graph) -> float:
        return self.log_ml_from_terms(clique_terms(graph))

    def score(self, graph: Graph) -> float:
        return self.log_ml(graph) + self.log_prior_k(graph.k)

    def score_from_terms(self, terms: dict[int, int], k: int) -> float:
        return self.log_ml_from_terms(terms) + self.log_prior_k(k)

    def toggle_delta(self, adj, i: int, j: int, k: int) -> float:
        """Score change of a legal toggle of ``(i, j)`` on a graph with ``k`` edges."""
        s = adj[i] & adj[j]
        bi, bj = 1 << i, 1 << j
        d = self.term(s | bi | bj) + self.term(s) - self.term(s | bi) - self.term(s | bj)
        if adj[i] >> j & 1:
            return -d + self.log_prior_k(k - 1) - self.log_prior_k(k)
        return d + self.log_prior_k(k + 1) - self.log_prior_k(k)
