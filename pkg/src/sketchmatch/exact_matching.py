"""Exact maximum bipartite matching (Hopcroft-Karp) and a greedy baseline."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx

from .errors import DomainError, ParameterError

_INF = float("inf")


@dataclass(frozen=True)
class Matching:
    """A set of vertex-disjoint edges.

    For bipartite graphs ``(u, v)`` means left vertex ``u`` and right vertex
    ``v``; the two sides are separate vertex sets.  With ``bipartite=False``
    the endpoints share one vertex set.
    """

    edges: tuple[tuple[int, int], ...] = ()
    bipartite: bool = True

    def __post_init__(self) -> None:
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.bipartite:
            lefts = [u for u, _ in edges]
            rights = [v for _, v in edges]
            if len(set(lefts)) != len(lefts) or len(set(rights)) != len(rights):
                raise ValueError("matching edges share an endpoint")
        else:
            ends = [x for e in edges for x in e]
            if len(set(ends)) != len(ends):
                raise ValueError("matching edges share an endpoint")

    @property
    def size(self) -> int:
        return len(self.edges)

    def __len__(self) -> int:
        return len(self.edges)


EMPTY_MATCHING = Matching()


@dataclass(frozen=True)
class BipartiteGraph:
    """Simple bipartite graph; duplicate edges are dropped on construction."""

    n_left: int
    n_right: int
    edges: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n_left < 0 or self.n_right < 0:
            raise ParameterError("side sizes must be non-negative")
        seen = dict.fromkeys((int(u), int(v)) for u, v in self.edges)
        for u, v in seen:
            if not (0 <= u < self.n_left and 0 <= v < self.n_right):
                raise DomainError(f"edge {(u, v)} outside {self.n_left} x {self.n_right}")
        object.__setattr__(self, "edges", tuple(seen))

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_left)]
        for u, v in self.edges:
            adj[u].append(v)
        for row in adj:
            row.sort()
        return adj


def max_matching(g: BipartiteGraph) -> Matching:
    """Maximum-cardinality matching by Hopcroft-Karp, O(E sqrt(V)).

    Free left vertices and neighbours are scanned in increasing order, so the
    returned edge set is deterministic.
    """
    adj = g.adjacency()
    n_left = g.n_left
    mate_left = [-1] * n_left
    mate_right = [-1] * g.n_right
    dist = [0.0] * n_left

    def bfs() -> bool:
        queue: deque[int] = deque()
        for u in range(n_left):
            if mate_left[u] < 0:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = mate_right[v]
                if w < 0:
                    found = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def augment(root: int) -> bool:
        # iterative DFS along the BFS layering; ptr[u] is the next neighbour to try
        stack = [root]
        path: list[int] = []
        while stack:
            u = stack[-1]
            if ptr[u] == len(adj[u]):
                dist[u] = _INF
                stack.pop()
                if path:
                    path.pop()
                continue
            v = adj[u][ptr[u]]
            ptr[u] += 1
            w = mate_right[v]
            if w < 0:
                path.append(v)
                for x, y in zip(stack, path):
                    mate_left[x] = y
                    mate_right[y] = x
                return True
            if dist[w] == dist[u] + 1:
                path.append(v)
                stack.append(w)
        return False

    while bfs():
        ptr = [0] * n_left
        for u in range(n_left):
            if mate_left[u] < 0:
                augment(u)
    return Matching(tuple((u, mate_left[u]) for u in range(n_left) if mate_left[u] >= 0))


def greedy_maximal(g: BipartiteGraph) -> Matching:
    """Maximal matching by a single scan over the edges in their given order."""
    used_left: set[int] = set()
    used_right: set[int] = set()
    out = []
    for u, v in g.edges:
        if u not in used_left and v not in used_right:
            used_left.add(u)
            used_right.add(v)
            out.append((u, v))
    return Matching(tuple(out))


def two_coloring(n: int, edges: Iterable[tuple[int, int]]) -> list[int] | None:
    """Side assignment making every edge cross, or ``None`` for non-bipartite graphs."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    color = [-1] * n
    for start in range(n):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if color[y] < 0:
                    color[y] = 1 - color[x]
                    queue.append(y)
                elif color[y] == color[x]:
                    return None
    return color


def max_matching_general(n: int, edges: Iterable[tuple[int, int]]) -> Matching:
    """Maximum matching of an undirected simple graph on ``[n]``.

    Bipartite inputs go through Hopcroft-Karp; anything with an odd cycle is
    handed to networkx's blossom implementation.
    """
    simple = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
    color = two_coloring(n, simple)
    if color is not None:
        oriented = [(a, b) if color[a] == 0 else (b, a) for a, b in simple]
        m = max_matching(BipartiteGraph(n, n, tuple(oriented)))
        return Matching(tuple(sorted((min(u, v), max(u, v)) for u, v in m.edges)), bipartite=False)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(simple)
    pairs = nx.max_weight_matching(graph, maxcardinality=True)
    return Matching(tuple(sorted((min(a, b), max(a, b)) for a, b in pairs)), bipartite=False)
