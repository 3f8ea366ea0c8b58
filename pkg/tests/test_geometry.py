import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from lossgraph.errors import NotPD
from lossgraph.graphs import Graph, legal_edge_moves
from lossgraph.geometry import (
    CovarianceModel,
    GWishartSpec,
    iproject,
    kl_gaussian,
    min_kl_by_projection,
    min_kl_complete_to_subgraphs,
    partial_correlations,
    pd_inverse,
    sample_complete_gwishart,
    sample_mvn,
)

from conftest import random_chordal, random_pd


class TestKL:
    def test_equal_is_zero(self, rng):
        s = random_pd(rng, 4)
        assert kl_gaussian(s, s) == 0.0

    def test_identity_vs_double(self):
        assert kl_gaussian(np.eye(2), 2 * np.eye(2)) == pytest.approx(math.log(2) - 0.5, abs=1e-14)

    def test_scalar_quadrature(self):
        for s1, s2 in [(1.0, 2.0), (0.3, 1.7), (4.0, 0.5)]:
            f = lambda x: norm.pdf(x, scale=math.sqrt(s1)) * (
                norm.logpdf(x, scale=math.sqrt(s1)) - norm.logpdf(x, scale=math.sqrt(s2))
            )
            ref, _ = quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)
            assert kl_gaussian([[s1]], [[s2]]) == pytest.approx(ref, abs=1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(20)
        for _ in range(200):
            p = int(rng.integers(1, 6))
            a, b = random_pd(rng, p), random_pd(rng, p)
            assert kl_gaussian(a, b) > 1e-12

    def test_not_pd(self):
        with pytest.raises(NotPD):
            kl_gaussian(np.eye(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestIProject:
    def test_complete_is_identity(self, rng):
        s = random_pd(rng, 5)
        assert np.allclose(iproject(s, Graph.complete(5)).sigma, s, atol=1e-10)

    def test_empty_is_diagonal(self, rng):
        s = random_pd(rng, 5)
        assert np.allclose(iproject(s, Graph.empty(5)).sigma, np.diag(np.diag(s)), atol=1e-12)

    def test_marginals_zeros_trace_and_kl(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            p = int(rng.integers(2, 7))
            s = random_pd(rng, p)
            g = random_chordal(rng, p)
            proj = iproject(s, g)
            k = proj.precision
            for i in range(p):
                for j in range(p):
                    if i == j or g.has_edge(i, j):
                        assert proj.sigma[i, j] == pytest.approx(s[i, j], abs=1e-9)
                    else:
                        assert abs(k[i, j]) <= 1e-8
            assert np.trace(k @ s) == pytest.approx(p, abs=1e-8)
            kl = kl_gaussian(s, proj.sigma)
            half_logdet = 0.5 * (np.linalg.slogdet(proj.sigma)[1] - np.linalg.slogdet(s)[1])
            assert kl == pytest.approx(half_logdet, abs=1e-8) and kl >= 0

    def test_idempotent(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            p = int(rng.integers(2, 7))
            g = random_chordal(rng, p)
            once = iproject(random_pd(rng, p), g).sigma
            assert np.allclose(iproject(once, g).sigma, once, atol=1e-10)

    def test_random_probe_minimality(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            p = int(rng.integers(2, 7))
            s = random_pd(rng, p)
            g = random_chordal(rng, p)
            best = kl_gaussian(s, iproject(s, g).sigma)
            for _ in range(100):
                # any covariance Markov for g is the projection of some PD matrix
                other = iproject(random_pd(rng, p, scale=rng.uniform(0.2, 5)), g).sigma
                assert best <= kl_gaussian(s, other) + 1e-12

    def test_monotone_under_nesting(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            p = int(rng.integers(2, 7))
            s = random_pd(rng, p)
            big = random_chordal(rng, p)
            small = big
            for _ in range(int(rng.integers(1, 4))):
                dels = legal_edge_moves(small)[1]
                if not dels:
                    break
                small = small.toggle(*dels[int(rng.integers(len(dels)))])
            assert kl_gaussian(s, iproject(s, small).sigma) >= kl_gaussian(s, iproject(s, big).sigma) - 1e-12


class TestMinKL:
    def test_identity(self):
        assert min_kl_complete_to_subgraphs(np.eye(4))[0] == 0.0

    @pytest.mark.parametrize("r", [0.1, 0.5, -0.9])
    def test_two_variables(self, r):
        s = np.array([[1.0, r], [r, 1.0]])
        v, e = min_kl_complete_to_subgraphs(s)
        assert v == pytest.approx(-0.5 * math.log(1 - r * r), abs=1e-12) and e == (0, 1)

    def test_matches_projection_path(self):
        rng = np.random.default_rng(25)
        for _ in range(300):
            p = int(rng.integers(2, 7))
            s = random_pd(rng, p)
            a, ea = min_kl_complete_to_subgraphs(s)
            b, eb = min_kl_by_projection(s)
            assert a == pytest.approx(b, abs=1e-8)

    def test_partial_correlation_definition(self, rng):
        s = random_pd(rng, 4)
        k = np.linalg.inv(s)
        r = partial_correlations(s)
        assert r[0, 2] == pytest.approx(-k[0, 2] / math.sqrt(k[0, 0] * k[2, 2]), abs=1e-12)


class TestSamplers:
    def test_scalar_gwishart_mean(self):
        rng = np.random.default_rng(26)
        spec = GWishartSpec(np.eye(1), 3.0)
        draws = np.array([sample_complete_gwishart(spec, rng)[0, 0] for _ in range(100_000)])
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - 3.0) < 3 * se

    def test_identity_scale_diagonal_exchangeable(self):
        rng = np.random.default_rng(27)
        spec = GWishartSpec(np.eye(3), 3.0)
        draws = np.array([np.diag(sample_complete_gwishart(spec, rng)) for _ in range(100_000)])
        means = draws.mean(axis=0)
        se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
        # Wishart mean: (delta + p - 1) * inv(D) = 5 I
        assert np.all(np.abs(means - 5.0) < 3 * se)
        assert abs(means[0] - means[2]) < 3 * math.sqrt(se[0] ** 2 + se[2] ** 2)

    def test_mean_matches_scale(self):
        rng = np.random.default_rng(28)
        d = np.array([[3.0, 2.0], [2.0, 3.0]])
        spec = GWishartSpec(d, 3.0)
        draws = np.array([sample_complete_gwishart(spec, rng) for _ in range(40_000)])
        expected = 4.0 * np.linalg.inv(d)
        se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
        assert np.all(np.abs(draws.mean(axis=0) - expected) < 4 * se)

    def test_gwishart_deterministic(self):
        spec = GWishartSpec(np.eye(4))
        a = [sample_complete_gwishart(spec, np.random.default_rng(5)) for _ in range(2)]
        assert np.array_equal(a[0], a[1])

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            GWishartSpec(np.eye(2), 2.0)

    def test_mvn_covariance(self):
        x = sample_mvn(np.eye(3), 100_000, np.random.default_rng(29))
        cov = x.values.T @ x.values / x.n
        assert np.all(np.abs(cov - np.eye(3)) < 0.02)

    def test_mvn_single_row_and_seed(self):
        s = random_pd(np.random.default_rng(0), 4)
        a = sample_mvn(s, 1, np.random.default_rng(3))
        b = sample_mvn(s, 1, np.random.default_rng(3))
        assert a.values.shape == (1, 4) and np.array_equal(a.values, b.values)

    def test_mvn_not_pd(self):
        with pytest.raises(NotPD):
            sample_mvn(-np.eye(2), 3, np.random.default_rng(0))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_covariance_model_graph_zeros(p, seed):
    rng = np.random.default_rng(seed)
    g = random_chordal(rng, p)
    model = iproject(random_pd(rng, p), g)
    assert isinstance(model, CovarianceModel) and model.graph == g
    k = pd_inverse(model.sigma)
    for i in range(p):
        for j in range(i + 1, p):
            if not g.has_edge(i, j):
                assert abs(k[i, j]) <= 1e-8
