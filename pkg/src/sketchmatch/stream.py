"""Dynamic graph streams: updates, strict-turnstile validation, generators, text I/O.

File format (ASCII, one token per line)::

    n <n> kind <bipartite|general>
    <i> <j> +1
    <i> <j> -1

For bipartite streams ``i`` is a left vertex and ``j`` a right vertex, both in
``[0, n)``.  For general streams ``(i, j)`` and ``(j, i)`` name the same edge.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Literal, NamedTuple

import numpy as np

from .errors import DomainError, ParameterError, StreamParseError, StrictTurnstileError
from .exact_matching import Matching

Kind = Literal["bipartite", "general"]
MAX_MULTIPLICITY = 4


class EdgeUpdate(NamedTuple):
    i: int
    j: int
    delta: int


@dataclass(frozen=True)
class StreamSpec:
    n: int
    updates: tuple[EdgeUpdate, ...]
    kind: Kind = "bipartite"

    def __post_init__(self) -> None:
        if self.kind not in ("bipartite", "general"):
            raise ParameterError(f"unknown stream kind {self.kind!r}")
        if self.n < 1:
            raise ParameterError("n must be positive")
        ups = tuple(EdgeUpdate(int(i), int(j), int(d)) for i, j, d in self.updates)
        for pos, (i, j, d) in enumerate(ups):
            if d not in (-1, 1):
                raise ParameterError(f"update {pos} has delta {d}; expected +1 or -1")
        object.__setattr__(self, "updates", ups)

    def __len__(self) -> int:
        return len(self.updates)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(i, j, delta)`` as ``int64`` arrays."""
        if not self.updates:
            z = np.zeros(0, dtype=np.int64)
            return z, z.copy(), z.copy()
        a = np.asarray(self.updates, dtype=np.int64)
        return a[:, 0].copy(), a[:, 1].copy(), a[:, 2].copy()

    def edge_key(self, i: int, j: int) -> tuple[int, int]:
        if self.kind == "general" and i > j:
            return j, i
        return i, j


def validate(s: StreamSpec) -> dict[tuple[int, int], int]:
    """Final multiplicities of the non-zero edges.

    Raises:
        DomainError: an endpoint lies outside ``[0, n)``.
        StrictTurnstileError: some prefix makes a multiplicity negative; the
            error carries the offending position.
    """
    mult: Counter[tuple[int, int]] = Counter()
    for pos, (i, j, d) in enumerate(s.updates):
        if not (0 <= i < s.n and 0 <= j < s.n):
            raise DomainError(f"update {pos} endpoint outside [0, {s.n})")
        key = s.edge_key(i, j)
        mult[key] += d
        if mult[key] < 0:
            raise StrictTurnstileError(pos, key, mult[key])
    return {e: m for e, m in sorted(mult.items()) if m}


def final_edges(s: StreamSpec) -> list[tuple[int, int]]:
    return list(validate(s))


def gen_planted(
    n: int,
    opt: int,
    noise_edges: int = 0,
    churn: int = 0,
    seed: int = 0,
) -> tuple[StreamSpec, Matching]:
    """Bipartite stream hiding a matching of size ``opt``.

    The final graph is the planted matching plus ``noise_edges`` uniformly
    random non-matching edge insertions (multiplicity capped at 4).  On top,
    ``churn`` fresh edges are inserted and later deleted, so they never reach
    the final graph.
    """
    if not 0 <= opt <= n:
        raise ParameterError(f"planted size {opt} must lie in [0, {n}]")
    if noise_edges < 0 or churn < 0:
        raise ParameterError("noise_edges and churn must be non-negative")
    rng = np.random.default_rng(seed)
    lefts = rng.permutation(n)[:opt]
    rights = rng.permutation(n)[:opt]
    planted = tuple(sorted(zip(lefts.tolist(), rights.tolist())))
    planted_set = set(planted)

    mult: Counter[tuple[int, int]] = Counter({e: 1 for e in planted})
    tokens: list[tuple[int, int]] = list(planted)
    capacity = n * n - len(planted_set)
    if noise_edges > capacity * MAX_MULTIPLICITY:
        raise ParameterError("too many noise edges for the multiplicity cap")
    while len(tokens) < len(planted) + noise_edges:
        e = (int(rng.integers(n)), int(rng.integers(n)))
        if e in planted_set or mult[e] >= MAX_MULTIPLICITY:
            continue
        mult[e] += 1
        tokens.append(e)

    churned: list[tuple[int, int]] = []
    taken = set(mult)
    if churn > n * n - len(taken):
        raise ParameterError("too many churn edges for the free pair space")
    while len(churned) < churn:
        e = (int(rng.integers(n)), int(rng.integers(n)))
        if e in taken:
            continue
        taken.add(e)
        churned.append(e)

    events = [(u, v, 1) for u, v in tokens]
    events += [(u, v, 1) for u, v in churned] + [(u, v, -1) for u, v in churned]
    order = rng.permutation(len(events))
    stream = [events[k] for k in order]
    # each churn pair must be inserted before it is deleted
    first_seen: set[tuple[int, int]] = set()
    churn_set = set(churned)
    for pos, (u, v, _) in enumerate(stream):
        if (u, v) in churn_set:
            stream[pos] = (u, v, -1 if (u, v) in first_seen else 1)
            first_seen.add((u, v))
    spec = StreamSpec(n, tuple(EdgeUpdate(*t) for t in stream), "bipartite")
    return spec, Matching(planted)


def write_stream(s: StreamSpec, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_stream(s))


def format_stream(s: StreamSpec) -> str:
    lines = [f"n {s.n} kind {s.kind}"]
    lines += [f"{i} {j} {'+1' if d > 0 else '-1'}" for i, j, d in s.updates]
    return "\n".join(lines) + "\n"


def read_stream(path: str | os.PathLike[str]) -> StreamSpec:
    with open(path, encoding="ascii") as fh:
        return parse_stream(fh.read().splitlines())


def parse_header(line: str, line_number: int = 1) -> tuple[int, Kind]:
    parts = line.split()
    if len(parts) != 4 or parts[0] != "n" or parts[2] != "kind":
        raise StreamParseError(line_number, line, "expected 'n <n> kind <bipartite|general>'")
    if parts[3] not in ("bipartite", "general"):
        raise StreamParseError(line_number, line, "unknown kind")
    try:
        n = int(parts[1])
    except ValueError:
        raise StreamParseError(line_number, line, "vertex count is not an integer") from None
    if n < 1:
        raise StreamParseError(line_number, line, "vertex count must be positive")
    return n, parts[3]  # type: ignore[return-value]


def parse_update(line: str, line_number: int) -> EdgeUpdate:
    parts = line.split()
    if len(parts) != 3 or parts[2] not in ("+1", "-1"):
        raise StreamParseError(line_number, line, "expected '<i> <j> +1|-1'")
    try:
        i, j = int(parts[0]), int(parts[1])
    except ValueError:
        raise StreamParseError(line_number, line, "vertex ids must be integers") from None
    return EdgeUpdate(i, j, 1 if parts[2] == "+1" else -1)


def parse_stream(lines: Iterable[str]) -> StreamSpec:
    """Parse the text format.  Turnstile violations are left to :func:`validate`."""
    it = iter(enumerate(lines, start=1))
    header = None
    for number, line in it:
        if line.strip():
            header = parse_header(line, number)
            break
    if header is None:
        raise StreamParseError(1, "", "missing header")
    n, kind = header
    updates = []
    for number, line in it:
        if not line.strip():
            continue
        up = parse_update(line, number)
        if not (0 <= up.i < n and 0 <= up.j < n):
            raise StreamParseError(number, line, f"vertex outside [0, {n})")
        updates.append(up)
    return StreamSpec(n, tuple(updates), kind)
