"""Graph priors that depend on a graph only through its edge count.

The loss-based family penalises a graph of size ``k`` out of ``m`` possible
edges by ``h * ((1 - c) * k + c * log C(m, k))``.  Uniform, Carvalho-Scott,
Villa-Lee and the equal-weight mixture are members of the family; Bernoulli
and beta-binomial priors are provided as comparators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import betaln, gammaln, logsumexp

from .errors import DomainError, Unattainable

LOSS_BASED = "loss-based"
BERNOULLI = "bernoulli"
BETA_BINOMIAL = "beta-binomial"

PER_SIZE = "per-size"
WEIGHTED = "graph-count-weighted"

H_MAX = 20.0


def log_binom(m, k):
    """log C(m, k) via log-gamma; vectorised over ``k``."""
    k = np.asarray(k, dtype=float)
    out = gammaln(m + 1.0) - gammaln(k + 1.0) - gammaln(m - k + 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PriorSpec:
    """A graph prior over graphs with at most ``m`` edges.

    Use the named constructors (``loss_based``, ``uniform``,
    ``carvalho_scott``, ``villa_lee``, ``mixture``, ``bernoulli``,
    ``beta_binomial``) rather than filling fields by hand.
    """

    variant: str
    m: int
    h: float = 0.0
    c: float = 0.0
    phi: float = 0.5
    a: float = 1.0
    b: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.m < 0:
            raise DomainError("m must be non-negative")
        if self.variant == LOSS_BASED:
            if not self.h >= 0:
                raise DomainError(f"h must be >= 0, got {self.h}")
            if not 0.0 <= self.c <= 1.0:
                raise DomainError(f"c must lie in [0, 1], got {self.c}")
        elif self.variant == BERNOULLI:
            if not 0.0 < self.phi < 1.0:
                raise DomainError(f"phi must lie in (0, 1), got {self.phi}")
        elif self.variant == BETA_BINOMIAL:
            if not (self.a > 0 and self.b > 0):
                raise DomainError("beta-binomial parameters must be positive")
        else:
            raise DomainError(f"unknown prior variant {self.variant!r}")

    @classmethod
    def loss_based(cls, m, h, c, label=""):
        return cls(LOSS_BASED, m, h=float(h), c=float(c), label=label or f"pi({h:g},{c:g})")

    @classmethod
    def uniform(cls, m):
        return cls.loss_based(m, 0.0, 0.0, label="uniform")

    @classmethod
    def carvalho_scott(cls, m):
        return cls.loss_based(m, 1.0, 1.0, label="carvalho-scott")

    @classmethod
    def villa_lee(cls, m, h=1.0):
        return cls.loss_based(m, h, 0.0, label=f"villa-lee({h:g})")

    @classmethod
    def mixture(cls, m):
        return cls.loss_based(m, 1.0, 0.5, label="mixture")

    @classmethod
    def bernoulli(cls, m, phi):
        return cls(BERNOULLI, m, phi=float(phi), label=f"bernoulli({phi:g})")

    @classmethod
    def beta_binomial(cls, m, a=1.0, b=1.0):
        return cls(BETA_BINOMIAL, m, a=float(a), b=float(b), label=f"beta-binomial({a:g},{b:g})")

    def with_m(self, m):
        return replace(self, m=m)

    def to_dict(self):
        d = {"variant": self.variant, "m": self.m, "label": self.label}
        if self.variant == LOSS_BASED:
            d.update(h=self.h, c=self.c)
        elif self.variant == BERNOULLI:
            d.update(phi=self.phi)
        else:
            d.update(a=self.a, b=self.b)
        return d

    @classmethod
    def from_dict(cls, d):
        keys = {"h", "c", "phi", "a", "b", "label"}
        return cls(d["variant"], int(d["m"]), **{k: v for k, v in d.items() if k in keys})


def log_prior_size(spec: PriorSpec, k):
    """Unnormalised log prior of any single graph with ``k`` edges."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0) or np.any(k_arr > spec.m):
        raise DomainError(f"edge count outside [0, {spec.m}]")
    m = spec.m
    if spec.variant == LOSS_BASED:
        if spec.h == 0.0:
            out = np.zeros_like(k_arr)
        else:
            out = -spec.h * ((1.0 - spec.c) * k_arr + spec.c * log_binom(m, k_arr))
    elif spec.variant == BERNOULLI:
        out = k_arr * math.log(spec.phi) + (m - k_arr) * math.log1p(-spec.phi)
    else:
        out = betaln(spec.a + k_arr, spec.b + m - k_arr) - betaln(spec.a, spec.b)
    return out if out.ndim else float(out)


def log_prior(spec: PriorSpec, g) -> float:
    if g.m != spec.m:
        raise DomainError(f"graph has m={g.m} but prior was built for m={spec.m}")
    return log_prior_size(spec, g.k)


@dataclass(frozen=True)
class SizeDistribution:
    m: int
    probs: np.ndarray
    weighting: str

    @property
    def sizes(self):
        return np.arange(self.m + 1)


def size_distribution(spec: PriorSpec, weighting: str = PER_SIZE) -> SizeDistribution:
    """Distribution of the edge count implied by ``spec``.

    ``per-size`` treats the unnormalised prior of a size-``k`` graph as the
    mass of size ``k``; ``graph-count-weighted`` multiplies it by the number
    of graphs of that size, C(m, k).
    """
    if spec.m < 1:
        raise DomainError("m must be >= 1")
    k = np.arange(spec.m + 1)
    lw = np.asarray(log_prior_size(spec, k), dtype=float)
    if weighting == WEIGHTED:
        lw = lw + log_binom(spec.m, k)
    elif weighting != PER_SIZE:
        raise DomainError(f"unknown weighting {weighting!r}")
    probs = np.exp(lw - logsumexp(lw))
    return SizeDistribution(spec.m, probs, weighting)


def size_moments(dist: SizeDistribution) -> tuple[float, float]:
    k = dist.sizes
    mean = float(np.dot(dist.probs, k))
    var = float(np.dot(dist.probs, (k - mean) ** 2))
    return mean, var


def _moments(m, h, c, weighting=PER_SIZE):
    return size_moments(size_distribution(PriorSpec.loss_based(m, h, c), weighting))


def _solve_h(m, c, target_mean, weighting):
    """Smallest h in [0, H_MAX] giving the target mean at fixed c, or None."""
    f = lambda h: _moments(m, h, c, weighting)[0] - target_mean
    grid = np.concatenate([[0.0], np.geomspace(1e-4, H_MAX, 120)])
    prev_h, prev_v = grid[0], f(grid[0])
    if prev_v == 0.0:
        return 0.0
    for h in grid[1:]:
        v = f(h)
        if v == 0.0:
            return float(h)
        if (prev_v < 0) != (v < 0):
            return brentq(f, prev_h, h, xtol=1e-14, rtol=1e-14, maxiter=200)
        prev_h, prev_v = h, v
    return None


def calibrate(
    m: int,
    target_mean: float,
    target_variance: float | None = None,
    c: float | None = None,
    weighting: str = PER_SIZE,
    mean_tol: float = 1e-4,
    var_tol: float = 1e-2,
) -> PriorSpec:
    """Choose loss-based ``(h, c)`` to match a prior mean (and variance) of graph size.

    With only a mean, the smallest ``c`` admitting a solution is returned
    (``c`` can also be pinned).  With a variance, ``c`` is scanned on a grid
    and refined by bisection where the variance crosses its target.
    """
    if not 0 < target_mean < m:
        raise DomainError(f"target mean must lie in (0, {m})")

    def finish(h, cc):
        spec = PriorSpec.loss_based(m, h, cc)
        mean, var = size_moments(size_distribution(spec, weighting))
        if abs(mean - target_mean) > mean_tol:
            return None
        if target_variance is not None and abs(var - target_variance) > var_tol:
            return None
        return spec

    if target_variance is None:
        grid = [c] if c is not None else np.linspace(0.0, 1.0, 1001)
        for cc in grid:
            h = _solve_h(m, float(cc), target_mean, weighting)
            if h is not None and (spec := finish(h, float(cc))) is not None:
                return spec
        raise Unattainable(f"no (h, c) in [0, {H_MAX}] x [0, 1] gives mean {target_mean}")

    if target_variance <= 0:
        raise DomainError("target variance must be positive")

    def excess(cc):
        h = _solve_h(m, cc, target_mean, weighting)
        if h is None:
            return None, None
        return _moments(m, h, cc, weighting)[1] - target_variance, h

    grid = np.linspace(0.0, 1.0, 201)
    prev = None
    for cc in grid:
        v, h = excess(float(cc))
        if v is None:
            prev = None
            continue
        if v == 0.0:
            if (spec := finish(h, float(cc))) is not None:
                return spec
        if prev is not None and (prev[1] < 0) != (v < 0):
            lo, hi, vlo = prev[0], float(cc), prev[1]
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                vm, _ = excess(mid)
                if vm is None:
                    break
                if (vm < 0) == (vlo < 0):
                    lo, vlo = mid, vm
                else:
                    hi = mid
                if hi - lo < 1e-13:
                    break
            for cc_final in (lo, hi):
                v2, h2 = excess(cc_final)
                if h2 is not None and (spec := finish(h2, cc_final)) is not None:
                    return spec
        prev = (float(cc), v)
    raise Unattainable(
        f"no (h, c) in [0, {H_MAX}] x [0, 1] gives mean {target_mean} and variance {target_variance}"
    )
