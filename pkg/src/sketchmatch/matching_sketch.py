"""Mergeable linear sketch for approximate maximum matching in dynamic bipartite streams.

Left and right vertices are hashed into ``alpha`` groups each.  Every left
group picks ``beta`` right groups uniformly with replacement; each distinct
(left group, right group) choice is an *active pair* and owns an l0-sampler
over the edges running between the two groups.  At the end one edge is drawn
from every sampler and a maximum matching of the drawn edges is returned.

With a 2-approximation ``opt_hat`` of the maximum matching size ``opt`` the
returned matching has size ``Omega(opt / n^eps)`` with constant probability,
while the sketch holds ``O~(n^(2 - 3 eps))`` cells.  :class:`GuessOptSketch`
removes the need to know ``opt`` by running all power-of-two estimates side
by side, plus one sampler over all edges for graphs whose matching is tiny.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .errors import DomainError, IncompatibleSketchError, ParameterError
from .exact_matching import EMPTY_MATCHING, BipartiteGraph, Matching, max_matching
from .field_hash import (
    GOLDEN,
    MASK64,
    HashFamily,
    derive_seed,
    derive_seed_array,
    new_family,
    splitmix64_array,
)
from .l0_sampler import (
    Found,
    L0Sketch,
    aggregate,
    buckets_per_level,
    cell_contributions,
    num_levels,
)
from .stream import EdgeUpdate, StreamSpec

_TAG_LEFT = 11
_TAG_RIGHT = 12
_TAG_PARTNER = 13
_TAG_PAIR = 14
_TAG_ESTIMATE = 15
_TAG_GLOBAL = 16
_TAG_SIDE = 17

_MS_MAGIC = b"MSK1"
_GO_MAGIC = b"GOS1"
_VERSION = 1
_MS_HEADER = struct.Struct("<4sHQdQQHIQII")
_PAIR = struct.Struct("<III")
_GO_HEADER = struct.Struct("<4sHQdQHI")
_BLOB = struct.Struct("<I")

Updates = Union[StreamSpec, Iterable[tuple[int, int, int]]]


def snapped_power(n: int, e: float) -> float:
    """``n ** e`` snapped to the nearest integer when it is one up to rounding."""
    v = float(n) ** e
    r = round(v)
    return float(r) if abs(v - r) <= 1e-9 * max(1.0, v) else v


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True)
class Params:
    """Group count, partner count and hash independence for one estimate.

    ``alpha = ceil(opt_hat / n^eps)``,
    ``beta = 6 ceil(opt_hat / n^(2 eps)) ceil(log2 n)`` and
    ``gamma = 4 ceil(n^eps)``.
    """

    n: int
    epsilon: float
    opt_hat: int
    alpha: int = field(init=False)
    beta: int = field(init=False)
    gamma: int = field(init=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ParameterError(f"n must be at least 2, got {self.n}")
        if not 0.0 < self.epsilon <= 0.5:
            raise ParameterError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if not 1 <= self.opt_hat <= self.n:
            raise ParameterError(f"opt_hat must lie in [1, {self.n}], got {self.opt_hat}")
        root = snapped_power(self.n, self.epsilon)
        square = snapped_power(self.n, 2 * self.epsilon)
        object.__setattr__(self, "alpha", math.ceil(self.opt_hat / root))
        object.__setattr__(
            self, "beta", 6 * math.ceil(self.opt_hat / square) * max(1, ceil_log2(self.n))
        )
        object.__setattr__(self, "gamma", 4 * math.ceil(root))

    @property
    def l0_delta(self) -> float:
        """Per-sampler failure probability ``n^-5``."""
        return float(self.n) ** -5


class MatchingSketch:
    """Sketch for one estimate ``opt_hat`` of the maximum matching size.

    Args:
        n: vertices per side.
        epsilon: approximation exponent in ``(0, 1/2]``.
        opt_hat: estimate of the maximum matching size, in ``[1, n]``.
        seed: master seed; players sharing it produce mergeable sketches.
        repetitions: rounds of ``beta`` partner draws per left group (the
            boosting knob; default 1).

    Samplers are created lazily on the first update routed to their pair.  A
    missing sampler is indistinguishable from a fresh one, including in the
    serialised form.
    """

    def __init__(self, n: int, epsilon: float, opt_hat: int, seed: int, repetitions: int = 1) -> None:
        if repetitions < 1:
            raise ParameterError("repetitions must be positive")
        self.params = Params(n, epsilon, opt_hat)
        self.seed = int(seed) & MASK64
        self.repetitions = int(repetitions)
        p = self.params
        self.h_left: HashFamily = new_family(p.gamma, n, p.alpha, derive_seed(self.seed, _TAG_LEFT))
        self.h_right: HashFamily = new_family(p.gamma, n, p.alpha, derive_seed(self.seed, _TAG_RIGHT))
        self.left_groups = self.h_left.table()
        self.right_groups = self.h_right.table()
        self._active = self._draw_partners()
        self._active_keys = np.flatnonzero(self._active.ravel())
        self.l0_domain = n * n
        self.l0_delta = p.l0_delta
        self._levels = num_levels(self.l0_domain)
        self._buckets = buckets_per_level(self.l0_delta)
        self._samplers: dict[int, L0Sketch] = {}

    def _draw_partners(self) -> np.ndarray:
        p = self.params
        draws = p.beta * self.repetitions
        group_seeds = derive_seed_array(self.seed, _TAG_PARTNER, np.arange(p.alpha, dtype=np.int64))
        steps = (np.arange(1, draws + 1, dtype=np.uint64) * np.uint64(GOLDEN))
        picks = splitmix64_array(group_seeds[:, None] + steps[None, :]) % np.uint64(p.alpha)
        active = np.zeros((p.alpha, p.alpha), dtype=bool)
        rows = np.repeat(np.arange(p.alpha), draws)
        active[rows, picks.ravel().astype(np.int64)] = True
        return active

    # structure -------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def active_pairs(self) -> list[tuple[int, int]]:
        a = self.params.alpha
        return [(int(k) // a, int(k) % a) for k in self._active_keys]

    @property
    def num_active_pairs(self) -> int:
        return int(self._active_keys.size)

    def is_active(self, left_group: int, right_group: int) -> bool:
        return bool(self._active[left_group, right_group])

    def pair_seed(self, left_group: int, right_group: int) -> int:
        return derive_seed(self.seed, _TAG_PAIR, left_group, right_group)

    def sampler(self, left_group: int, right_group: int) -> L0Sketch:
        """The pair's sampler (a fresh one if nothing has been routed to it yet)."""
        if not self._active[left_group, right_group]:
            raise KeyError(f"({left_group}, {right_group}) is not an active pair")
        key = left_group * self.params.alpha + right_group
        s = self._samplers.get(key)
        if s is None:
            s = L0Sketch(self.l0_domain, self.l0_delta, self.pair_seed(left_group, right_group))
        return s

    def _sampler_for_write(self, key: int, seed: int | None = None) -> L0Sketch:
        s = self._samplers.get(key)
        if s is None:
            a = self.params.alpha
            if seed is None:
                seed = self.pair_seed(key // a, key % a)
            s = L0Sketch(self.l0_domain, self.l0_delta, seed)
            self._samplers[key] = s
        return s

    def route(self, u: int, v: int) -> tuple[int, int] | None:
        """Active pair receiving edge ``(u, v)``, or ``None``."""
        gl, gr = int(self.left_groups[u]), int(self.right_groups[v])
        return (gl, gr) if self._active[gl, gr] else None

    def compatible(self, other: "MatchingSketch") -> bool:
        return (
            isinstance(other, MatchingSketch)
            and self.params == other.params
            and self.seed == other.seed
            and self.repetitions == other.repetitions
        )

    # updates ---------------------------------------------------------------

    def update(self, u: int, v: int, delta_val: int) -> None:
        n = self.n
        if not (0 <= u < n and 0 <= v < n):
            raise DomainError(f"edge ({u}, {v}) outside [0, {n})^2")
        gl, gr = int(self.left_groups[u]), int(self.right_groups[v])
        if self._active[gl, gr]:
            self._sampler_for_write(gl * self.params.alpha + gr).update(u * n + v, delta_val)

    def update_many(self, u: np.ndarray, v: np.ndarray, delta: np.ndarray) -> None:
        """Vectorised :meth:`update` over parallel arrays."""
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        d = np.asarray(delta, dtype=np.int64).ravel()
        if not (u.shape == v.shape == d.shape):
            raise ParameterError("u, v and delta must have equal length")
        if u.size == 0:
            return
        n = self.n
        if min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n:
            raise DomainError(f"edges outside [0, {n})^2")
        a = self.params.alpha
        keys = self.left_groups[u] * a + self.right_groups[v]
        hit = self._active.ravel()[keys]
        if not hit.any():
            return
        keys, idx, d = keys[hit], u[hit] * n + v[hit], d[hit]
        uniq, inv = np.unique(keys, return_inverse=True)
        seeds = derive_seed_array(self.seed, _TAG_PAIR, uniq // a, uniq % a)
        rows, cells, w, s, fp = cell_contributions(
            seeds[inv], idx, d, self._levels, self._buckets, 1
        )
        n_cells = self._levels * self._buckets
        groups, w, s, fp = aggregate(inv[rows] * n_cells + cells, w, s, fp)
        who, cell = np.divmod(groups, n_cells)
        # groups are sorted, so each sampler's cells form one run
        bounds = np.flatnonzero(np.r_[True, who[1:] != who[:-1], True])
        for lo, hi in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
            k = who[lo]
            self._sampler_for_write(int(uniq[k]), int(seeds[k])).apply(
                cell[lo:hi], w[lo:hi], s[lo:hi], fp[lo:hi]
            )

    def consume(self, updates: Updates) -> None:
        self.update_many(*_as_arrays(updates))

    # merging ---------------------------------------------------------------

    def copy(self) -> "MatchingSketch":
        out = object.__new__(MatchingSketch)
        out.__dict__.update(self.__dict__)
        out._samplers = {k: s.copy() for k, s in self._samplers.items()}
        return out

    def merge_into(self, other: "MatchingSketch") -> None:
        if not self.compatible(other):
            raise IncompatibleSketchError("matching sketches differ in parameters or seed")
        for key, s in other._samplers.items():
            mine = self._samplers.get(key)
            if mine is None:
                self._samplers[key] = s.copy()
            else:
                mine.merge_into(s)

    def merge(self, other: "MatchingSketch") -> "MatchingSketch":
        out = self.copy()
        out.merge_into(other)
        return out

    __add__ = merge

    # extraction ------------------------------------------------------------

    def sampled_edges(self) -> list[tuple[int, int]]:
        """One edge per non-empty sampler, in active-pair order."""
        n = self.n
        edges = []
        for key in sorted(self._samplers):
            out = self._samplers[key].sample()
            if isinstance(out, Found):
                edges.append(divmod(out.index, n))
        return edges

    def extract(self) -> Matching:
        """Maximum matching among the sampled edges."""
        edges = self.sampled_edges()
        if not edges:
            return EMPTY_MATCHING
        return max_matching(BipartiteGraph(self.n, self.n, tuple(edges)))

    def sampler_counts(self) -> dict[str, int]:
        found = empty = fail = 0
        for key in self._active_keys.tolist():
            s = self._samplers.get(key)
            if s is None or s.is_zero():
                empty += 1
                continue
            out = s.sample()
            if isinstance(out, Found):
                found += 1
            else:
                fail += 1
        return {"active": self.num_active_pairs, "found": found, "empty": empty, "fail": fail}

    # serialisation -----------------------------------------------------------

    @property
    def num_cells(self) -> int:
        return self.num_active_pairs * self._levels * self._buckets

    @property
    def dense_nbytes(self) -> int:
        per_pair = _PAIR.size + L0Sketch(self.l0_domain, self.l0_delta, 0).dense_nbytes
        return _MS_HEADER.size + self.num_active_pairs * per_pair

    def to_bytes(self, dense: bool = False) -> bytes:
        p = self.params
        parts = [
            _MS_HEADER.pack(
                _MS_MAGIC, _VERSION, p.n, p.epsilon, p.opt_hat, self.seed, self.repetitions,
                p.alpha, p.beta, p.gamma, self.num_active_pairs,
            )
        ]
        a = p.alpha
        for key in self._active_keys.tolist():
            s = self._samplers.get(key)
            if s is None:
                s = L0Sketch(self.l0_domain, self.l0_delta, self.pair_seed(key // a, key % a))
            blob = s.to_bytes(dense)
            parts.append(_PAIR.pack(key // a, key % a, len(blob)))
            parts.append(blob)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MatchingSketch":
        sketch, end = cls._read(data, 0)
        if end != len(data):
            raise ValueError("trailing bytes after matching sketch")
        return sketch

    @classmethod
    def _read(cls, data: bytes, offset: int) -> tuple["MatchingSketch", int]:
        (magic, version, n, eps, opt_hat, seed, reps, alpha, beta, gamma, npairs) = (
            _MS_HEADER.unpack_from(data, offset)
        )
        if magic != _MS_MAGIC or version != _VERSION:
            raise ValueError("not a matching sketch serialisation")
        sketch = cls(n, eps, opt_hat, seed, reps)
        p = sketch.params
        if (p.alpha, p.beta, p.gamma, sketch.num_active_pairs) != (alpha, beta, gamma, npairs):
            raise ValueError("matching sketch header disagrees with its parameters")
        offset += _MS_HEADER.size
        for key in sketch._active_keys.tolist():
            left, right, length = _PAIR.unpack_from(data, offset)
            offset += _PAIR.size
            if (left, right) != divmod(key, alpha):
                raise ValueError("active pairs out of order")
            s = L0Sketch.from_bytes(data[offset:offset + length])
            offset += length
            if not s.is_zero():
                sketch._samplers[key] = s
        return sketch, offset

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatchingSketch):
            return NotImplemented
        if not self.compatible(other):
            return False
        mine = {k: s for k, s in self._samplers.items() if not s.is_zero()}
        theirs = {k: s for k, s in other._samplers.items() if not s.is_zero()}
        return mine == theirs

    def __repr__(self) -> str:
        p = self.params
        return (
            f"MatchingSketch(n={p.n}, epsilon={p.epsilon}, opt_hat={p.opt_hat}, "
            f"alpha={p.alpha}, beta={p.beta}, gamma={p.gamma}, active={self.num_active_pairs})"
        )


def estimate_grid(n: int) -> list[int]:
    """Powers of two ``1, 2, ..., 2^ceil(log2 n)``, clamped to ``n``."""
    return sorted({min(1 << j, n) for j in range(ceil_log2(n) + 1)})


class GuessOptSketch:
    """Matching sketches for every power-of-two estimate plus one global sampler.

    The global sampler covers graphs whose maximum matching is below
    ``n^eps``, where a single edge is already a good enough answer.
    """

    def __init__(self, n: int, epsilon: float, seed: int, repetitions: int = 1) -> None:
        self.n = int(n)
        self.epsilon = float(epsilon)
        self.seed = int(seed) & MASK64
        self.repetitions = int(repetitions)
        self.estimates = estimate_grid(self.n)
        self.sketches = [
            MatchingSketch(n, epsilon, oh, derive_seed(self.seed, _TAG_ESTIMATE, oh), repetitions)
            for oh in self.estimates
        ]
        self.global_sampler = L0Sketch(n * n, float(n) ** -5, derive_seed(self.seed, _TAG_GLOBAL))

    def update(self, u: int, v: int, delta_val: int) -> None:
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise DomainError(f"edge ({u}, {v}) outside [0, {self.n})^2")
        self.global_sampler.update(u * self.n + v, delta_val)
        for s in self.sketches:
            s.update(u, v, delta_val)

    def update_many(self, u: np.ndarray, v: np.ndarray, delta: np.ndarray) -> None:
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        for s in self.sketches:
            s.update_many(u, v, delta)
        self.global_sampler.update_many(u * self.n + v, delta)

    def consume(self, updates: Updates) -> None:
        self.update_many(*_as_arrays(updates))

    def compatible(self, other: "GuessOptSketch") -> bool:
        return (
            isinstance(other, GuessOptSketch)
            and (self.n, self.epsilon, self.seed, self.repetitions)
            == (other.n, other.epsilon, other.seed, other.repetitions)
        )

    def copy(self) -> "GuessOptSketch":
        out = object.__new__(GuessOptSketch)
        out.__dict__.update(self.__dict__)
        out.sketches = [s.copy() for s in self.sketches]
        out.global_sampler = self.global_sampler.copy()
        return out

    def merge_into(self, other: "GuessOptSketch") -> None:
        if not self.compatible(other):
            raise IncompatibleSketchError("guess-opt sketches differ in parameters or seed")
        for mine, theirs in zip(self.sketches, other.sketches):
            mine.merge_into(theirs)
        self.global_sampler.merge_into(other.global_sampler)

    def merge(self, other: "GuessOptSketch") -> "GuessOptSketch":
        out = self.copy()
        out.merge_into(other)
        return out

    __add__ = merge

    def extract_all(self) -> list[tuple[int, Matching]]:
        """``(opt_hat, matching)`` per estimate; the global sampler is reported as ``opt_hat=0``."""
        single = self.global_sampler.sample()
        first = EMPTY_MATCHING
        if isinstance(single, Found):
            first = Matching((divmod(single.index, self.n),))
        return [(0, first)] + [(oh, s.extract()) for oh, s in zip(self.estimates, self.sketches)]

    def extract(self) -> Matching:
        best = EMPTY_MATCHING
        for _, m in self.extract_all():
            if m.size > best.size:
                best = m
        return best

    def sampler_counts(self) -> dict[str, int]:
        total = {"active": 0, "found": 0, "empty": 0, "fail": 0}
        for s in self.sketches:
            for key, value in s.sampler_counts().items():
                total[key] += value
        return total

    @property
    def num_active_pairs(self) -> int:
        return sum(s.num_active_pairs for s in self.sketches)

    @property
    def num_cells(self) -> int:
        return self.global_sampler.num_cells + sum(s.num_cells for s in self.sketches)

    @property
    def dense_nbytes(self) -> int:
        return (
            _GO_HEADER.size
            + _BLOB.size * (1 + len(self.sketches))
            + self.global_sampler.dense_nbytes
            + sum(s.dense_nbytes for s in self.sketches)
        )

    def to_bytes(self, dense: bool = False) -> bytes:
        parts = [
            _GO_HEADER.pack(_GO_MAGIC, _VERSION, self.n, self.epsilon, self.seed,
                            self.repetitions, len(self.sketches))
        ]
        for blob in [self.global_sampler.to_bytes(dense)] + [s.to_bytes(dense) for s in self.sketches]:
            parts.append(_BLOB.pack(len(blob)))
            parts.append(blob)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "GuessOptSketch":
        magic, version, n, eps, seed, reps, count = _GO_HEADER.unpack_from(data, 0)
        if magic != _GO_MAGIC or version != _VERSION:
            raise ValueError("not a guess-opt sketch serialisation")
        out = cls(n, eps, seed, reps)
        if count != len(out.sketches):
            raise ValueError("estimate count disagrees with n")
        offset = _GO_HEADER.size
        blobs = []
        for _ in range(count + 1):
            (length,) = _BLOB.unpack_from(data, offset)
            offset += _BLOB.size
            blobs.append(data[offset:offset + length])
            offset += length
        if offset != len(data):
            raise ValueError("trailing bytes after guess-opt sketch")
        out.global_sampler = L0Sketch.from_bytes(blobs[0])
        out.sketches = [MatchingSketch.from_bytes(b) for b in blobs[1:]]
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GuessOptSketch):
            return NotImplemented
        return (
            self.compatible(other)
            and self.global_sampler == other.global_sampler
            and self.sketches == other.sketches
        )


def _as_arrays(updates: Updates) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(updates, StreamSpec):
        return updates.arrays()
    a = np.asarray(list(updates), dtype=np.int64).reshape(-1, 3)
    return a[:, 0], a[:, 1], a[:, 2]


def ms_new(n: int, epsilon: float, opt_hat: int, seed: int) -> MatchingSketch:
    return MatchingSketch(n, epsilon, opt_hat, seed)


def ms_update(s: MatchingSketch, u: int, v: int, delta_val: int) -> None:
    s.update(u, v, delta_val)


def ms_merge(a: MatchingSketch, b: MatchingSketch) -> MatchingSketch:
    return a.merge(b)


def ms_extract(s: MatchingSketch) -> Matching:
    return s.extract()


def guess_opt_extract(stream: Updates, n: int, epsilon: float, seed: int) -> Matching:
    """One pass over ``stream`` with every estimate of ``opt``; returns the largest matching."""
    sketch = GuessOptSketch(n, epsilon, seed)
    sketch.consume(stream)
    return sketch.extract()


def bipartition_sides(n: int, seed: int) -> np.ndarray:
    """Seeded uniform side (0 = left, 1 = right) for every vertex."""
    bits = derive_seed_array(seed, _TAG_SIDE, np.arange(n, dtype=np.int64)) & np.uint64(1)
    return bits.astype(np.int8)


def bipartition_reduce(stream: StreamSpec, seed: int) -> StreamSpec:
    """Map a general-graph stream to a bipartite one on ``(n, n)``.

    Vertices keep their labels; an update survives only if its endpoints fall
    on different sides, and is re-oriented as ``(left, right)``.  Any fixed
    matching keeps half of its edges in expectation.
    """
    if stream.kind != "general":
        raise ParameterError("bipartition_reduce expects a general-graph stream")
    side = bipartition_sides(stream.n, seed)
    out = []
    for pos, (i, j, d) in enumerate(stream.updates):
        if i == j:
            raise DomainError(f"update {pos} is a self-loop on vertex {i}")
        if not (0 <= i < stream.n and 0 <= j < stream.n):
            raise DomainError(f"update {pos} endpoint outside [0, {stream.n})")
        if side[i] == side[j]:
            continue
        out.append(EdgeUpdate(i, j, d) if side[i] == 0 else EdgeUpdate(j, i, d))
    return StreamSpec(stream.n, tuple(out), "bipartite")
