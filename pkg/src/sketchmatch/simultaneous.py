"""Simultaneous-model harness and hard instances built from Ruzsa-Szemeredi graphs.

An (r, t)-RS graph is a graph whose edges split into ``t`` induced matchings of
``r`` edges each.  :func:`gen_hard` turns one into a ``k``-player instance in
which every player holds a half-dropped copy of the graph.  The vertices of
one hidden matching are private to the player, and all other labels are
shared.  :func:`check_trivial_ratio` then measures how badly a matching that
touches few private vertices approximates the true maximum.

:func:`run_simultaneous` plays the one-round protocol.  Every player sketches
its share with the public seed, and the coordinator sums the sketches and
extracts a matching.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

from .errors import BudgetError, IncompatibleSketchError, ParameterError, StreamParseError
from .exact_matching import Matching, max_matching_general
from .field_hash import derive_seed
from .matching_sketch import GuessOptSketch, MatchingSketch, bipartition_reduce
from .stream import EdgeUpdate, StreamSpec, parse_header, parse_update

Edge = tuple[int, int]
MAX_SEARCH_VERTICES = 16
DEFAULT_NODE_BUDGET = 2_000_000

_TAG_REDUCE = 21


def _norm(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class RSGraph:
    """``n_vertices`` vertices and ``t`` matchings of ``r`` edges each.

    Construction only normalises edges to ``(min, max)``; use
    :func:`verify_rs` to check the induced-matching property.
    """

    n_vertices: int
    matchings: tuple[tuple[Edge, ...], ...]

    def __post_init__(self) -> None:
        ms = tuple(tuple(_norm(int(a), int(b)) for a, b in m) for m in self.matchings)
        object.__setattr__(self, "matchings", ms)

    @property
    def t(self) -> int:
        return len(self.matchings)

    @property
    def r(self) -> int:
        return len(self.matchings[0]) if self.matchings else 0

    @property
    def edges(self) -> list[Edge]:
        return [e for m in self.matchings for e in m]


def six_cycle_rs() -> RSGraph:
    """The 6-cycle as a (2, 3)-RS graph: opposite edges form each matching."""
    return RSGraph(6, (((0, 1), (3, 4)), ((1, 2), (4, 5)), ((2, 3), (5, 0))))


@dataclass(frozen=True)
class RSCheck:
    """Outcome of :func:`verify_rs`; on failure names a matching and an edge."""

    ok: bool
    matching: int | None = None
    edge: Edge | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_rs(g: RSGraph) -> RSCheck:
    """Check sizes, disjointness and the induced property of every matching."""
    if g.t == 0:
        return RSCheck(False, reason="no matchings")
    r = g.r
    owner: dict[Edge, int] = {}
    for j, m in enumerate(g.matchings):
        if len(m) != r:
            return RSCheck(False, j, m[0] if m else None, f"matching has {len(m)} edges, expected {r}")
        seen: set[int] = set()
        for a, b in m:
            if a == b or not (0 <= a < g.n_vertices and 0 <= b < g.n_vertices):
                return RSCheck(False, j, (a, b), "edge is a loop or leaves the vertex range")
            if a in seen or b in seen:
                return RSCheck(False, j, (a, b), "edges of the matching share a vertex")
            seen.update((a, b))
            if (a, b) in owner:
                return RSCheck(False, j, (a, b), f"edge also belongs to matching {owner[(a, b)]}")
            owner[(a, b)] = j
    for j, m in enumerate(g.matchings):
        verts = {x for e in m for x in e}
        own = set(m)
        for e in owner:
            if e[0] in verts and e[1] in verts and e not in own:
                return RSCheck(False, j, e, "vertex set of the matching induces an extra edge")
    return RSCheck(True)


def find_rs_decomposition(
    n_vertices: int,
    edges: Sequence[Edge],
    r: int,
    t: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> RSGraph | None:
    """Split ``edges`` into ``t`` induced matchings of size ``r``, if possible.

    Backtracking search.  Each new matching must contain the lowest uncovered
    edge, which removes the symmetry between matchings, and edge sets already
    shown to be undecomposable are remembered.

    Raises:
        BudgetError: more than 16 vertices, or the search visits more than
            ``node_budget`` nodes.
    """
    if n_vertices > MAX_SEARCH_VERTICES:
        raise BudgetError(
            f"exhaustive search is capped at {MAX_SEARCH_VERTICES} vertices, got {n_vertices}"
        )
    if r < 1 or t < 1:
        raise ParameterError("r and t must be positive")
    es = sorted({_norm(int(a), int(b)) for a, b in edges})
    if any(a == b or not 0 <= a < b < n_vertices for a, b in es):
        raise ParameterError("edges must join two distinct vertices in range")
    if len(es) != r * t:
        return None
    adj = [0] * n_vertices
    for a, b in es:
        adj[a] |= 1 << b
        adj[b] |= 1 << a
    m = len(es)
    # an edge may join a matching whose vertex mask is `mask` iff it touches
    # neither the mask nor any neighbour of it
    reach = [adj[a] | adj[b] | (1 << a) | (1 << b) for a, b in es]
    ends = [(1 << a) | (1 << b) for a, b in es]
    dead: set[int] = set()
    nodes = 0

    def grow(remaining: int, chosen: list[int], block: int, start: int) -> list[list[int]] | None:
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise BudgetError(f"RS search exceeded {node_budget} nodes")
        if len(chosen) == r:
            rest = remaining
            for e in chosen:
                rest &= ~(1 << e)
            found = decompose(rest)
            return None if found is None else [chosen[:]] + found
        for e in range(start, m):
            if remaining >> e & 1 and not reach[e] & block:
                chosen.append(e)
                out = grow(remaining, chosen, block | ends[e], e + 1)
                chosen.pop()
                if out is not None:
                    return out
        return None

    def decompose(remaining: int) -> list[list[int]] | None:
        if remaining == 0:
            return []
        if remaining in dead:
            return None
        first = (remaining & -remaining).bit_length() - 1
        out = grow(remaining, [first], ends[first], first + 1)
        if out is None:
            dead.add(remaining)
        return out

    found = decompose((1 << m) - 1)
    if found is None:
        return None
    g = RSGraph(n_vertices, tuple(tuple(es[e] for e in group) for group in found))
    assert verify_rs(g).ok
    return g


@dataclass(frozen=True)
class HardInstance:
    """``k`` player graphs over a shared label universe ``[n]``.

    ``labels[i][v]`` is player ``i``'s global label for RS vertex ``v``;
    ``star_sets[i]`` holds the labels of that player's hidden matching
    ``lambdas[i]``.
    """

    rs: RSGraph
    k: int
    n: int
    player_graphs: tuple[tuple[Edge, ...], ...]
    lambdas: tuple[int, ...]
    star_sets: tuple[frozenset[int], ...]
    labels: tuple[tuple[int, ...], ...]

    @property
    def good_vertices(self) -> frozenset[int]:
        return frozenset().union(*self.star_sets)

    @property
    def alpha(self) -> float:
        """``k r / N``, the value of ``n^eps`` the construction is tuned for."""
        return self.k * self.rs.r / self.rs.n_vertices

    def union_edges(self) -> list[Edge]:
        return sorted({e for g in self.player_graphs for e in g})

    def player_streams(self) -> list[StreamSpec]:
        return [
            StreamSpec(self.n, tuple(EdgeUpdate(a, b, 1) for a, b in g), "general")
            for g in self.player_graphs
        ]


def label_universe(rs: RSGraph, k: int) -> int:
    """Smallest universe holding ``N`` shared labels and ``2r`` private labels per player."""
    return max(k * rs.n_vertices, rs.n_vertices + 2 * rs.r * k)


def gen_hard(rs: RSGraph, k: int, seed: int) -> HardInstance:
    """Sample a ``k``-player instance of the hard distribution over ``rs``.

    Player ``i`` (0-based) picks a hidden matching ``lambda`` uniformly, keeps
    ``floor(r/2)`` uniformly chosen edges of every matching, and labels RS
    vertex ``v`` as ``pi(v)`` unless ``v`` is the ``j``-th vertex of the
    hidden matching, which gets ``pi(N + 2 r i + j)``.
    """
    check = verify_rs(rs)
    if not check.ok:
        raise ParameterError(f"not an RS graph: {check.reason} (matching {check.matching}, edge {check.edge})")
    if k < 2:
        raise ParameterError(f"need at least 2 players, got {k}")
    rng = np.random.default_rng(seed)
    big_n, r, t = rs.n_vertices, rs.r, rs.t
    n = label_universe(rs, k)
    keep = r // 2
    lambdas, kept_sets, stars = [], [], []
    for _ in range(k):
        lam = int(rng.integers(t))
        lambdas.append(lam)
        stars.append(sorted({x for e in rs.matchings[lam] for x in e}))
        kept_sets.append([
            [m[x] for x in sorted(rng.choice(r, size=keep, replace=False).tolist())]
            for m in rs.matchings
        ])
    pi = rng.permutation(n).tolist()
    graphs, star_sets, labels = [], [], []
    for i in range(k):
        lab = list(pi[:big_n])
        for j, v in enumerate(stars[i]):
            lab[v] = pi[big_n + 2 * r * i + j]
        labels.append(tuple(lab))
        star_sets.append(frozenset(lab[v] for v in stars[i]))
        graphs.append(tuple(_norm(lab[a], lab[b]) for m in kept_sets[i] for a, b in m))
    return HardInstance(
        rs=rs, k=k, n=n, player_graphs=tuple(graphs), lambdas=tuple(lambdas),
        star_sets=tuple(star_sets), labels=tuple(labels),
    )


@dataclass(frozen=True)
class TrivialRatioReport:
    """Sizes behind the ``|M| / |M*| <= 4 / alpha`` check for trivial matchings."""

    max_matching: int
    max_trivial: int
    good_vertices: int
    cap: int
    alpha: float
    epsilon: float
    bound: float
    ratio: float
    ok: bool


def max_trivial_matching(n: int, edges: Sequence[Edge], good: frozenset[int], cap: int) -> Matching:
    """Largest matching with at most ``cap`` matched good vertices (integer program)."""
    es = sorted({_norm(a, b) for a, b in edges})
    if not es:
        return Matching((), bipartite=False)
    m = len(es)
    rows = [a for a, _ in es] + [b for _, b in es]
    cols = list(range(m)) * 2
    incidence = coo_matrix((np.ones(2 * m), (rows, cols)), shape=(n, m))
    weight = np.array([(a in good) + (b in good) for a, b in es], dtype=float)
    res = milp(
        c=-np.ones(m),
        constraints=[
            LinearConstraint(incidence, -np.inf, 1),
            LinearConstraint(weight[None, :], -np.inf, cap),
        ],
        integrality=np.ones(m),
        bounds=Bounds(0, 1),
    )
    if not res.success:
        raise RuntimeError(f"integer program failed: {res.message}")
    picked = [es[e] for e in np.flatnonzero(res.x > 0.5)]
    return Matching(tuple(picked), bipartite=False)


def check_trivial_ratio(inst: HardInstance) -> TrivialRatioReport:
    """Exact maximum matching versus the best trivial matching of the union graph.

    A matching is trivial when it matches at most ``N`` good vertices.  The
    bound uses ``alpha = k r / N``, the relation the construction is tuned
    to; ``epsilon`` is the matching exponent ``log_n alpha``.  The bound
    relies on players keeping exactly half of every matching, so for odd
    ``r`` the ``ok`` flag can legitimately come out false.
    """
    edges = inst.union_edges()
    good = inst.good_vertices
    cap = inst.rs.n_vertices
    opt = max_matching_general(inst.n, edges).size
    trivial = max_trivial_matching(inst.n, edges, good, cap).size
    alpha = inst.alpha
    bound = 4.0 / alpha
    ratio = trivial / opt if opt else 0.0
    return TrivialRatioReport(
        max_matching=opt,
        max_trivial=trivial,
        good_vertices=len(good),
        cap=cap,
        alpha=alpha,
        epsilon=float(np.log(alpha) / np.log(inst.n)),
        bound=bound,
        ratio=ratio,
        ok=ratio <= bound,
    )


def format_instance(inst: HardInstance) -> str:
    """Text form: a metadata block, then one stream section per player."""
    rs = inst.rs
    lines = [f"hard k {inst.k} n {inst.n} N {rs.n_vertices} r {rs.r} t {rs.t}"]
    for j, m in enumerate(rs.matchings):
        lines.append(f"matching {j} " + " ".join(f"{a}-{b}" for a, b in m))
    for i in range(inst.k):
        lines.append(f"lambda {i} {inst.lambdas[i]}")
        lines.append(f"labels {i} " + " ".join(map(str, inst.labels[i])))
    for i, g in enumerate(inst.player_graphs):
        lines.append(f"player {i}")
        lines.append(f"n {inst.n} kind general")
        lines += [f"{a} {b} +1" for a, b in g]
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> HardInstance:
    lines = text.splitlines()
    if not lines:
        raise StreamParseError(1, "", "empty instance file")

    def bad(number: int, reason: str) -> StreamParseError:
        return StreamParseError(number, lines[number - 1], reason)

    head = lines[0].split()
    if len(head) != 11 or head[0] != "hard" or head[1::2][1:] != ["n", "N", "r", "t"] or head[1] != "k":
        raise bad(1, "expected 'hard k <k> n <n> N <N> r <r> t <t>'")
    k, n, big_n, r, t = (int(x) for x in head[2::2])
    pos = 1
    matchings = []
    for j in range(t):
        parts = lines[pos].split()
        if parts[:2] != ["matching", str(j)]:
            raise bad(pos + 1, f"expected matching {j}")
        matchings.append(tuple(tuple(int(x) for x in p.split("-")) for p in parts[2:]))
        pos += 1
    rs = RSGraph(big_n, tuple(matchings))
    lambdas, labels = [], []
    for i in range(k):
        lam = lines[pos].split()
        lab = lines[pos + 1].split()
        if lam[:2] != ["lambda", str(i)] or lab[:2] != ["labels", str(i)]:
            raise bad(pos + 1, f"expected lambda and labels for player {i}")
        lambdas.append(int(lam[2]))
        labels.append(tuple(int(x) for x in lab[2:]))
        pos += 2
    graphs = []
    for i in range(k):
        if lines[pos].split() != ["player", str(i)]:
            raise bad(pos + 1, f"expected 'player {i}'")
        if parse_header(lines[pos + 1], pos + 2)[0] != n:
            raise bad(pos + 2, "player stream has the wrong vertex count")
        pos += 2
        g = []
        while pos < len(lines) and not lines[pos].startswith("player"):
            if lines[pos].strip():
                up = parse_update(lines[pos], pos + 1)
                g.append(_norm(up.i, up.j))
            pos += 1
        graphs.append(tuple(g))
    stars = tuple(
        frozenset(labels[i][v] for e in rs.matchings[lambdas[i]] for v in e) for i in range(k)
    )
    return HardInstance(rs, k, n, tuple(graphs), tuple(lambdas), stars, tuple(labels))


def write_instance(inst: HardInstance, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_instance(inst))


def read_instance(path: str | os.PathLike[str]) -> HardInstance:
    with open(path, encoding="ascii") as fh:
        return parse_instance(fh.read())


def read_rs_graph(path: str | os.PathLike[str]) -> RSGraph:
    """Read an RS graph: ``rs N <N>`` then one ``a-b a-b ...`` line per matching."""
    with open(path, encoding="ascii") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise StreamParseError(1, "", "empty RS graph file")
    head = lines[0].split()
    if len(head) != 3 or head[:2] != ["rs", "N"]:
        raise StreamParseError(1, lines[0], "expected 'rs N <N>'")
    try:
        matchings = tuple(
            tuple(tuple(int(x) for x in p.split("-")) for p in ln.split()) for ln in lines[1:]
        )
    except ValueError:
        raise StreamParseError(2, lines[1], "edges must look like 'a-b'") from None
    return RSGraph(int(head[2]), matchings)


# simultaneous protocol ----------------------------------------------------

Sketch = Union[MatchingSketch, GuessOptSketch]


@dataclass(frozen=True)
class SimultaneousResult:
    matching: Matching
    sketch: Sketch
    message_bytes: tuple[int, ...]


def partition_stream(
    stream: StreamSpec, k: int, seed: int = 0, assignment: Sequence[int] | None = None
) -> list[StreamSpec]:
    """Split updates among ``k`` players, uniformly at random unless ``assignment`` is given.

    Shares need not be strict turnstile on their own; only their sum is.
    """
    if k < 1:
        raise ParameterError("k must be positive")
    if assignment is None:
        owner = np.random.default_rng(seed).integers(k, size=len(stream)).tolist()
    else:
        owner = list(assignment)
        if len(owner) != len(stream) or any(not 0 <= o < k for o in owner):
            raise ParameterError("assignment must give every update a player in [0, k)")
    shares: list[list[EdgeUpdate]] = [[] for _ in range(k)]
    for o, up in zip(owner, stream.updates):
        shares[o].append(up)
    return [StreamSpec(stream.n, tuple(s), stream.kind) for s in shares]


def new_player_sketch(n: int, epsilon: float, opt_hat: int | None, seed: int) -> Sketch:
    if opt_hat is None:
        return GuessOptSketch(n, epsilon, seed)
    return MatchingSketch(n, epsilon, opt_hat, seed)


def player_message(share: StreamSpec, epsilon: float, opt_hat: int | None, seed: int) -> Sketch:
    """One player's sketch of its share; general-graph shares are bipartitioned first."""
    if share.kind == "general":
        share = bipartition_reduce(share, derive_seed(seed, _TAG_REDUCE))
    sketch = new_player_sketch(share.n, epsilon, opt_hat, seed)
    sketch.consume(share)
    return sketch


def coordinate(messages: Sequence[Sketch]) -> Sketch:
    """Sum the players' sketches.

    Raises:
        IncompatibleSketchError: the sketches were not built from the same
            public seed and parameters.
    """
    if not messages:
        raise ParameterError("the coordinator needs at least one message")
    total = messages[0].copy()
    for m in messages[1:]:
        if type(m) is not type(total):
            raise IncompatibleSketchError("players used different sketch types")
        total.merge_into(m)
    return total


def run_simultaneous(
    source: StreamSpec | HardInstance,
    k: int | None,
    epsilon: float,
    opt_hat: int | None,
    seed: int,
    *,
    assignment: Sequence[int] | None = None,
    partition_seed: int = 0,
) -> SimultaneousResult:
    """Play the one-round protocol and return the coordinator's matching.

    A :class:`HardInstance` brings its own ``k`` player graphs (``k`` may be
    ``None`` or must agree).  A stream is split among ``k`` players, by
    ``assignment`` if given and uniformly at random otherwise.
    ``opt_hat=None`` runs every estimate of the matching size.
    """
    if isinstance(source, HardInstance):
        if k is not None and k != source.k:
            raise ParameterError(f"instance has {source.k} players, not {k}")
        shares = source.player_streams()
    else:
        if k is None:
            raise ParameterError("k is required for a stream source")
        shares = partition_stream(source, k, partition_seed, assignment)
    messages = [player_message(s, epsilon, opt_hat, seed) for s in shares]
    sizes = tuple(len(m.to_bytes()) for m in messages)
    merged = coordinate(messages)
    return SimultaneousResult(merged.extract(), merged, sizes)

