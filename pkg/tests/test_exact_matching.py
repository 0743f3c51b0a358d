from __future__ import annotations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_max_matching
from sketchmatch.errors import DomainError
from sketchmatch.exact_matching import (
    BipartiteGraph,
    Matching,
    greedy_maximal,
    max_matching,
    max_matching_general,
    two_coloring,
)


def random_graph(rng, n_left, n_right, m):
    return BipartiteGraph(
        n_left, n_right,
        tuple((int(rng.integers(n_left)), int(rng.integers(n_right))) for _ in range(m)),
    )


def assert_valid(g: BipartiteGraph, m: Matching):
    edges = set(g.edges)
    assert all(e in edges for e in m.edges)
    assert len({u for u, _ in m.edges}) == m.size == len({v for _, v in m.edges})


def test_empty_graph():
    assert max_matching(BipartiteGraph(5, 5)).size == 0
    assert greedy_maximal(BipartiteGraph(0, 0)).size == 0


@pytest.mark.parametrize("m", [1, 2, 7, 30])
def test_complete_bipartite_has_perfect_matching(m):
    g = BipartiteGraph(m, m, tuple((u, v) for u in range(m) for v in range(m)))
    out = max_matching(g)
    assert out.size == m
    assert_valid(g, out)


def test_matches_brute_force_on_random_small_graphs():
    rng = np.random.default_rng(0)
    for _ in range(200):
        nl, nr = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        g = random_graph(rng, nl, nr, int(rng.integers(0, 15)))
        out = max_matching(g)
        assert_valid(g, out)
        assert out.size == brute_max_matching(g.edges)


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=120))
def test_size_agrees_with_networkx(edges):
    g = BipartiteGraph(31, 31, tuple(edges))
    ref = nx.Graph()
    ref.add_nodes_from((("L", u) for u in range(31)))
    ref.add_nodes_from((("R", v) for v in range(31)))
    ref.add_edges_from((("L", u), ("R", v)) for u, v in edges)
    top = [("L", u) for u in range(31)]
    expected = len(nx.bipartite.hopcroft_karp_matching(ref, top_nodes=top)) // 2
    assert max_matching(g).size == expected


def test_path_in_adversarial_order():
    # greedy takes the middle edge first and is then stuck
    g = BipartiteGraph(2, 2, ((1, 0), (0, 0), (1, 1)))
    assert greedy_maximal(g).size == 1
    assert max_matching(g).size == 2


def test_greedy_is_maximal_and_half_optimal():
    rng = np.random.default_rng(1)
    for _ in range(200):
        g = random_graph(rng, 15, 15, int(rng.integers(0, 60)))
        gm = greedy_maximal(g)
        assert_valid(g, gm)
        used_l = {u for u, _ in gm.edges}
        used_r = {v for _, v in gm.edges}
        assert all(u in used_l or v in used_r for u, v in g.edges)
        assert 2 * gm.size >= max_matching(g).size


def test_size_is_monotone_under_edge_addition():
    rng = np.random.default_rng(2)
    edges: list[tuple[int, int]] = []
    last = 0
    for _ in range(150):
        edges.append((int(rng.integers(20)), int(rng.integers(20))))
        size = max_matching(BipartiteGraph(20, 20, tuple(edges))).size
        assert size >= last
        last = size


def test_output_is_deterministic():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 40, 40, 200)
    assert max_matching(g) == max_matching(g)


def test_duplicate_edges_dropped_and_range_checked():
    assert BipartiteGraph(2, 2, ((0, 1), (0, 1))).edges == ((0, 1),)
    with pytest.raises(DomainError):
        BipartiteGraph(2, 2, ((2, 0),))


def test_matching_rejects_shared_endpoints():
    with pytest.raises(ValueError):
        Matching(((0, 1), (0, 2)))
    with pytest.raises(ValueError):
        Matching(((0, 1), (1, 2)), bipartite=False)
    # on separate sides the same number is two different vertices
    assert Matching(((0, 1), (1, 0))).size == 2


def test_two_coloring():
    assert two_coloring(3, [(0, 1), (1, 2), (2, 0)]) is None
    color = two_coloring(4, [(0, 1), (1, 2), (2, 3)])
    assert color is not None and all(color[a] != color[b] for a, b in [(0, 1), (1, 2), (2, 3)])


def test_general_matching_against_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(int(rng.integers(0, 12)), 2)) if a != b]
        norm = sorted({(min(a, b), max(a, b)) for a, b in edges})
        m = max_matching_general(n, edges)
        assert m.size == brute_max_matching(norm, bipartite=False)
        assert all(e in norm for e in m.edges)
