"""Undirected graphs, chordality, junction trees and decomposable edge moves.

Graphs are stored as a tuple of neighbour bitmasks (Python ints), one per
vertex.  Vertices are 0-based internally; the text edge-list format is
1-based.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import NotDecomposable, ParseError, TooLarge

ENUMERATE_MAX_P = 6


def _bits(mask: int):
    """Yield the indices of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _mask(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def mask_to_tuple(mask: int) -> tuple[int, ...]:
    return tuple(_bits(mask))


def pair_index(i: int, j: int, p: int) -> int:
    """Row-major index of the pair ``i < j`` in the strict upper triangle."""
    return i * p - i * (i + 1) // 2 + (j - i - 1)


class Graph:
    """Immutable undirected simple graph on ``p`` labelled vertices."""

    __slots__ = ("p", "adj", "_hash", "_k", "_eidx")

    def __init__(self, p: int, edges: Iterable[tuple[int, int]] = ()):
        if p < 1:
            raise ValueError("vertex count must be positive")
        adj = [0] * p
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < p and 0 <= j < p):
                raise ValueError(f"edge ({i}, {j}) out of range for p={p}")
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        self._init(p, tuple(adj))

    def _init(self, p, adj):
        self.p = p
        self.adj = adj
        self._hash = hash((p, adj))
        self._k = None
        self._eidx = None

    @classmethod
    def from_adj(cls, p: int, adj: Sequence[int]) -> "Graph":
        g = cls.__new__(cls)
        g._init(p, tuple(adj))
        return g

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls.from_adj(p, (0,) * p)

    @classmethod
    def complete(cls, p: int) -> "Graph":
        full = (1 << p) - 1
        return cls.from_adj(p, tuple(full & ~(1 << v) for v in range(p)))

    @classmethod
    def from_matrix(cls, a) -> "Graph":
        """Build from a square 0/1 (or boolean) adjacency matrix."""
        p = len(a)
        edges = [(i, j) for i in range(p) for j in range(i + 1, p) if a[i][j]]
        return cls(p, edges)

    @property
    def m(self) -> int:
        return self.p * (self.p - 1) // 2

    @property
    def k(self) -> int:
        if self._k is None:
            self._k = sum(a.bit_count() for a in self.adj) // 2
        return self._k

    def __len__(self) -> int:
        return self.k

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        out = []
        for i, a in enumerate(self.adj):
            a >>= i + 1
            while a:
                low = a & -a
                out.append((i, i + low.bit_length()))
                a ^= low
        return tuple(out)

    def edge_index(self):
        """Upper-triangle pair indices of the edges (cached numpy array)."""
        if self._eidx is None:
            import numpy as np

            p = self.p
            out = []
            for i, a in enumerate(self.adj):
                a >>= i + 1
                base = i * p - i * (i + 1) // 2 - 1
                while a:
                    low = a & -a
                    out.append(base + low.bit_length())
                    a ^= low
            self._eidx = np.array(out, dtype=np.intp)
        return self._eidx

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i] >> j & 1)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return mask_to_tuple(self.adj[v])

    def toggle(self, i: int, j: int) -> "Graph":
        adj = list(self.adj)
        adj[i] ^= 1 << j
        adj[j] ^= 1 << i
        g = Graph.from_adj(self.p, adj)
        if self._k is not None:
            g._k = self._k + (1 if adj[i] >> j & 1 else -1)
        return g

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with vertex ``v`` renamed to ``perm[v]``."""
        return Graph(self.p, [(perm[i], perm[j]) for i, j in self.edges])

    def is_subgraph_of(self, other: "Graph") -> bool:
        return self.p == other.p and all(a & ~b == 0 for a, b in zip(self.adj, other.adj))

    def adjacency_matrix(self):
        import numpy as np

        a = np.zeros((self.p, self.p), dtype=np.int8)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a

    def sort_key(self) -> tuple[int, ...]:
        return self.adj

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.p == other.p and self.adj == other.adj

    def __lt__(self, other: "Graph") -> bool:
        return (self.p, self.adj) < (other.p, other.adj)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        e = ", ".join(f"{i + 1}-{j + 1}" for i, j in self.edges)
        return f"Graph(p={self.p}, k={self.k}, edges=[{e}])"


@dataclass(frozen=True)
class JunctionTree:
    """Clique/separator decomposition in a perfect ordering.

    ``separators[i]`` belongs to ``cliques[i + 1]`` and ``tree_edges[i]`` is
    the pair ``(parent, i + 1)`` of clique indices joined through it.  Cliques
    and separators are stored as vertex bitmasks.
    """

    p: int
    cliques: tuple[int, ...]
    separators: tuple[int, ...]
    tree_edges: tuple[tuple[int, int], ...]

    @property
    def clique_sets(self) -> list[tuple[int, ...]]:
        return [mask_to_tuple(c) for c in self.cliques]

    @property
    def separator_sets(self) -> list[tuple[int, ...]]:
        return [mask_to_tuple(s) for s in self.separators]


def _mcs(adj: Sequence[int], p: int):
    """Maximum cardinality search.

    Returns the visit order, the earlier-numbered neighbourhood of every
    visited vertex (in visit order) and a flag telling whether the ordering
    has zero fill-in, i.e. the graph is chordal.
    """
    weight = [0] * p
    follower = [-1] * p
    buckets = [0] * (p + 1)
    buckets[0] = (1 << p) - 1
    top = 0
    numbered = 0
    order = []
    madj = []
    chordal = True
    for _ in range(p):
        while not buckets[top]:
            top -= 1
        b = buckets[top]
        low = b & -b
        v = low.bit_length() - 1
        buckets[top] ^= low
        mv = adj[v] & numbered
        if chordal and mv:
            u = follower[v]
            # zero fill-in: earlier neighbours minus the last one must be adjacent to it
            if (mv & ~(1 << u)) & ~adj[u]:
                chordal = False
        order.append(v)
        madj.append(mv)
        numbered |= low
        for w in _bits(adj[v] & ~numbered):
            ww = weight[w]
            buckets[ww] &= ~(1 << w)
            buckets[ww + 1] |= 1 << w
            weight[w] = ww + 1
            follower[w] = v
        if top < p and buckets[top + 1]:
            top += 1
    return order, madj, chordal


def is_decomposable(g: Graph) -> bool:
    return _mcs(g.adj, g.p)[2]


def _cliques_from_mcs(order, madj):
    """Maximal cliques and separators, in perfect order, from an MCS run."""
    cliques = []
    seps = []
    p = len(order)
    for i in range(p):
        last = i == p - 1 or madj[i + 1].bit_count() <= madj[i].bit_count()
        if last:
            cliques.append(madj[i] | (1 << order[i]))
    # separator of a clique = its intersection with the union of its predecessors
    seen = 0
    for c in cliques:
        if seen:
            seps.append(c & seen)
        seen |= c
    return cliques, seps


def junction_tree(g: Graph) -> JunctionTree:
    order, madj, chordal = _mcs(g.adj, g.p)
    if not chordal:
        raise NotDecomposable(f"graph is not chordal: {g!r}")
    cliques, seps = _cliques_from_mcs(order, madj)
    tree_edges = []
    for i, s in enumerate(seps, start=1):
        parent = next(j for j in range(i) if s & ~cliques[j] == 0)
        tree_edges.append((parent, i))
    return JunctionTree(g.p, tuple(cliques), tuple(seps), tuple(tree_edges))


def cliques_and_separators(g: Graph) -> tuple[list[int], list[int]]:
    """Clique and separator bitmasks without building tree edges."""
    order, madj, chordal = _mcs(g.adj, g.p)
    if not chordal:
        raise NotDecomposable(f"graph is not chordal: {g!r}")
    return _cliques_from_mcs(order, madj)


# ---------------------------------------------------------------------------
# single-edge moves


def can_delete(adj: Sequence[int], i: int, j: int) -> bool:
    """Edge ``(i, j)`` of a chordal graph lies in exactly one maximal clique."""
    cn = adj[i] & adj[j]
    for w in _bits(cn):
        if cn & ~adj[w] & ~(1 << w):
            return False
    return True


def can_add(adj: Sequence[int], i: int, j: int) -> bool:
    """Adding non-edge ``(i, j)`` to a chordal graph keeps it chordal.

    True iff the common neighbours of ``i`` and ``j`` separate them, i.e.
    there is no chordless ``i``-``j`` path of length three or more.
    """
    blocked = adj[i] & adj[j]
    target = 1 << j
    reach = (1 << i) | blocked
    frontier = 1 << i
    while frontier:
        low = frontier & -frontier
        frontier ^= low
        new = adj[low.bit_length() - 1] & ~reach
        if new & target:
            return False
        reach |= new
        frontier |= new
    return True


def legal_edge_moves(g: Graph, jt: JunctionTree | None = None):
    """Toggles that keep a decomposable graph decomposable.

    Returns ``(additions, deletions)`` as lists of 0-based pairs in
    lexicographic order.  A deletion is legal iff the edge belongs to exactly
    one clique of ``jt``.
    """
    if jt is None:
        jt = junction_tree(g)
    deletions = []
    for i, j in g.edges:
        both = (1 << i) | (1 << j)
        if sum(1 for c in jt.cliques if c & both == both) == 1:
            deletions.append((i, j))
    additions = [
        (i, j)
        for i in range(g.p)
        for j in range(i + 1, g.p)
        if not g.adj[i] >> j & 1 and can_add(g.adj, i, j)
    ]
    return additions, deletions


def local_delta_subsets(adj: Sequence[int], i: int, j: int):
    """Subsets whose terms give the score change of toggling ``(i, j)``.

    For a legal toggle with common neighbourhood ``S`` the log marginal
    likelihood changes by ``t(S+i+j) + t(S) - t(S+i) - t(S+j)`` when adding
    (negated when deleting).
    """
    s = adj[i] & adj[j]
    bi, bj = 1 << i, 1 << j
    return s | bi | bj, s, s | bi, s | bj


# ---------------------------------------------------------------------------
# triangulation and chordal subgraphs


def min_fill_triangulation(g: Graph) -> Graph:
    """Chordal supergraph of ``g`` by greedy minimum-fill elimination.

    Ties are broken by the lowest vertex index.  A chordal input gets zero
    fill-in and is returned unchanged.
    """
    p = g.p
    adj = list(g.adj)
    work = list(g.adj)
    remaining = (1 << p) - 1
    for _ in range(p):
        best, best_fill = -1, None
        for v in _bits(remaining):
            nb = work[v]
            fill = 0
            for w in _bits(nb):
                fill += (nb & ~work[w] & ~(1 << w)).bit_count()
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        nb = work[best]
        if best_fill:
            for w in _bits(nb):
                missing = nb & ~work[w] & ~(1 << w)
                work[w] |= missing
                adj[w] |= missing
        for w in _bits(nb):
            work[w] &= ~(1 << best)
        remaining &= ~(1 << best)
        work[best] = 0
    return Graph.from_adj(p, adj)


def max_decomposable_subgraph(g: Graph, edge_scores: Mapping[tuple[int, int], float] | None = None) -> Graph:
    """Chordal subgraph of ``g`` by greedy deletion of low-score edges.

    Edges are removed in increasing score order (ties lexicographic) until
    the graph is chordal; removed edges are then offered back in decreasing
    score order and kept whenever chordality survives.
    """
    if is_decomposable(g):
        return g
    scores = edge_scores or {}
    ranked = sorted(g.edges, key=lambda e: (scores.get(e, 0.0), e))
    adj = list(g.adj)
    removed = []
    for i, j in ranked:
        adj[i] &= ~(1 << j)
        adj[j] &= ~(1 << i)
        removed.append((i, j))
        if _mcs(adj, g.p)[2]:
            break
    for i, j in reversed(removed[:-1]):
        if can_add(adj, i, j):
            adj[i] |= 1 << j
            adj[j] |= 1 << i
    return Graph.from_adj(g.p, adj)


def enumerate_decomposable(p: int) -> list[Graph]:
    """All chordal graphs on ``p <= 6`` labelled vertices."""
    if p > ENUMERATE_MAX_P:
        raise TooLarge(f"enumeration limited to p <= {ENUMERATE_MAX_P}, got {p}")
    pairs = list(itertools.combinations(range(p), 2))
    out = []
    for code in range(1 << len(pairs)):
        adj = [0] * p
        for b in _bits(code):
            i, j = pairs[b]
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        if _mcs(adj, p)[2]:
            out.append(Graph.from_adj(p, adj))
    return out


# ---------------------------------------------------------------------------
# text formats


def format_edge_list(g: Graph) -> str:
    return "".join(f"{i + 1} {j + 1}\n" for i, j in g.edges)


def parse_edge_list(text: str, p: int | None = None) -> Graph:
    """Parse one ``i j`` pair per line (1-based); ``#`` starts a comment.

    A line ``p N`` declares the vertex count; otherwise ``p`` is the largest
    label seen unless given explicitly.
    """
    edges = []
    declared = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "p" and len(parts) == 2:
            declared = int(parts[1])
            continue
        if len(parts) != 2:
            raise ParseError("expected two vertex labels", row=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError("non-integer vertex label", row=lineno) from None
        if i < 1 or j < 1:
            raise ParseError("vertex labels are 1-based", row=lineno)
        edges.append((i - 1, j - 1))
    n = p or declared or max((max(e) + 1 for e in edges), default=1)
    return Graph(n, edges)


def read_edge_list(path, p: int | None = None) -> Graph:
    return parse_edge_list(Path(path).read_text(), p)


def to_dot(g: Graph, name: str = "G", labels: Sequence[str] | None = None) -> str:
    lines = [f"graph {name} {{"]
    for v in range(g.p):
        label = labels[v] if labels is not None else str(v + 1)
        lines.append(f'  {v + 1} [label="{label}"];')
    for i, j in g.edges:
        lines.append(f"  {i + 1} -- {j + 1};")
    lines.append("}")
    return "\n".join(lines) + "\n"
