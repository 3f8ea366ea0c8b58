"""Zero-mean Gaussian geometry: KL divergence, projections and samplers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPD
from .graphs import Graph, junction_tree, mask_to_tuple
from .likelihood import DataMatrix

PIVOT_TOL = 1e-12


def _chol(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotPD("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max())):
        raise NotPD("matrix is not symmetric")
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NotPD("matrix is not positive definite") from None
    if np.any(np.diag(low) <= PIVOT_TOL):
        raise NotPD("Cholesky pivot below tolerance")
    return low


def _logdet(low: np.ndarray) -> float:
    return 2.0 * float(np.log(np.diag(low)).sum())


def _inv_from_chol(low: np.ndarray) -> np.ndarray:
    eye = np.eye(low.shape[0])
    linv = np.linalg.solve(low, eye)
    inv = linv.T @ linv
    return 0.5 * (inv + inv.T)


def pd_inverse(a) -> np.ndarray:
    return _inv_from_chol(_chol(a))


@dataclass
class CovarianceModel:
    """Covariance matrix with a lazily computed precision and optional graph."""

    sigma: np.ndarray
    graph: Graph | None = None
    _precision: np.ndarray | None = field(default=None, repr=False)

    @property
    def precision(self) -> np.ndarray:
        if self._precision is None:
            self._precision = pd_inverse(self.sigma)
        return self._precision

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    def partial_correlations(self) -> np.ndarray:
        k = self.precision
        d = np.sqrt(np.diag(k))
        r = -k / np.outer(d, d)
        np.fill_diagonal(r, 1.0)
        return r


@dataclass(frozen=True)
class GWishartSpec:
    """Complete-graph G-Wishart law on a precision matrix.

    Density proportional to ``det(K)**((delta - 2) / 2) * exp(-tr(D K) / 2)``.
    """

    d: np.ndarray
    delta: float = 3.0
    _scale_chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.delta > 2.0:
            raise ValueError("delta must exceed 2")
        _chol(self.d)
        # Cholesky factor of inv(D), reused by every draw
        object.__setattr__(self, "_scale_chol", _chol(pd_inverse(self.d)))

    @property
    def p(self) -> int:
        return self.d.shape[0]


def kl_gaussian(sigma1, sigma2) -> float:
    """KL(N(0, sigma1) || N(0, sigma2))."""
    sigma1 = np.asarray(sigma1, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma1.shape != sigma2.shape:
        raise ValueError("covariances must have the same shape")
    l1, l2 = _chol(sigma1), _chol(sigma2)
    if np.array_equal(sigma1, sigma2):
        return 0.0
    p = sigma1.shape[0]
    m = np.linalg.solve(l2, l1)
    trace = float(np.sum(m * m))
    val = 0.5 * (trace - p - (_logdet(l1) - _logdet(l2)))
    return max(val, 0.0)


def _padded_inverse(sigma, idx, p):
    out = np.zeros((p, p))
    if idx:
        out[np.ix_(idx, idx)] = pd_inverse(sigma[np.ix_(idx, idx)])
    return out


def iproject(sigma, target: Graph) -> CovarianceModel:
    """KL-closest covariance that is Markov with respect to a decomposable ``target``."""
    sigma = np.asarray(sigma, dtype=float)
    _chol(sigma)
    jt = junction_tree(target)
    p = sigma.shape[0]
    k = np.zeros((p, p))
    for c in jt.cliques:
        k += _padded_inverse(sigma, list(mask_to_tuple(c)), p)
    for s in jt.separators:
        k -= _padded_inverse(sigma, list(mask_to_tuple(s)), p)
    k = 0.5 * (k + k.T)
    return CovarianceModel(pd_inverse(k), target, k)


def partial_correlations(sigma) -> np.ndarray:
    return CovarianceModel(np.asarray(sigma, dtype=float)).partial_correlations()


def min_kl_complete_to_subgraphs(sigma) -> tuple[float, tuple[int, int]]:
    """Smallest KL from the complete model to any model missing one edge.

    Equals ``-log(1 - rho**2) / 2`` for the smallest squared partial
    correlation; returns the value and the 0-based edge attaining it.
    """
    sigma = np.asarray(sigma, dtype=float)
    p = sigma.shape[0]
    if p < 2:
        raise ValueError("need at least two variables")
    r = partial_correlations(sigma)
    iu = np.triu_indices(p, 1)
    r2 = r[iu] ** 2
    best = int(np.argmin(r2))
    edge = (int(iu[0][best]), int(iu[1][best]))
    return -0.5 * math.log1p(-float(r2[best])), edge


def min_kl_by_projection(sigma) -> tuple[float, tuple[int, int]]:
    """Same quantity as ``min_kl_complete_to_subgraphs`` by explicit projection."""
    sigma = np.asarray(sigma, dtype=float)
    p = sigma.shape[0]
    full = Graph.complete(p)
    best = (math.inf, (0, 1))
    for i, j in full.edges:
        v = kl_gaussian(sigma, iproject(sigma, full.toggle(i, j)).sigma)
        if v < best[0]:
            best = (v, (i, j))
    return best


def sample_complete_gwishart(spec: GWishartSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a precision matrix by the Bartlett construction.

    This is a Wishart with ``delta + p - 1`` degrees of freedom and scale
    ``inv(D)``.
    """
    p = spec.p
    df = spec.delta + p - 1
    low = spec._scale_chol
    a = np.zeros((p, p))
    a[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    il = np.tril_indices(p, -1)
    a[il] = rng.standard_normal(len(il[0]))
    la = low @ a
    k = la @ la.T
    return 0.5 * (k + k.T)


def sample_mvn(sigma, n: int, rng: np.random.Generator) -> DataMatrix:
    """``n`` rows from N(0, sigma); returned uncentered."""
    low = _chol(sigma)
    z = rng.standard_normal((n, low.shape[0]))
    return DataMatrix.from_array(z @ low.T, center=False)
