import itertools

import networkx as nx
import numpy as np
import pytest

from lossgraph.graphs import Graph


def brute_force_chordal(g: Graph) -> bool:
    """No induced cycle on four or more vertices (checked over all vertex subsets)."""
    adj = [[g.has_edge(i, j) for j in range(g.p)] for i in range(g.p)]
    for size in range(4, g.p + 1):
        for sub in itertools.combinations(range(g.p), size):
            degs = [sum(adj[v][w] for w in sub) for v in sub]
            if any(d != 2 for d in degs):
                continue
            # 2-regular induced subgraph: chordless cycle iff connected
            seen = {sub[0]}
            stack = [sub[0]]
            while stack:
                v = stack.pop()
                for w in sub:
                    if adj[v][w] and w not in seen:
                        seen.add(w)
                        stack.append(w)
            if len(seen) == size:
                return False
    return True


def all_graphs(p):
    pairs = list(itertools.combinations(range(p), 2))
    for code in range(1 << len(pairs)):
        yield Graph(p, [e for b, e in enumerate(pairs) if code >> b & 1])


def random_graph(rng, p, density=None):
    density = rng.uniform(0.1, 0.8) if density is None else density
    return Graph(p, [e for e in itertools.combinations(range(p), 2) if rng.random() < density])


def random_chordal(rng, p, density=None):
    """Chordal completion by networkx (independent of the package's triangulation)."""
    g = random_graph(rng, p, density)
    nxg = nx.Graph()
    nxg.add_nodes_from(range(p))
    nxg.add_edges_from(g.edges)
    h, _ = nx.complete_to_chordal_graph(nxg)
    return Graph(p, h.edges)


def random_pd(rng, p, scale=1.0):
    a = rng.standard_normal((p, p + 3))
    return scale * (a @ a.T) / (p + 3) + 0.1 * np.eye(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
