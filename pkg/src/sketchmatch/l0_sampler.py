"""Mergeable linear l0-sampler.

The sketch of a vector ``f`` over ``[domain]`` is a grid of one-sparse
recovery cells.  Level ``j`` keeps only the indices whose membership hash has
at least ``j`` trailing zero bits, so it sees about a ``2^-j`` fraction of the
support; inside a level a pairwise-independent hash spreads indices over
``buckets`` cells.  Each cell stores

    weight       = sum f_i
    weighted_sum = sum i * f_i
    fingerprint  = sum f_i * z^i   (mod 2^61 - 1, z drawn per cell)

All three are linear in ``f``, so updates commute and two sketches built from
the same seed add up to the sketch of the summed vectors.

Only non-zero cells are stored.  A cell that cancels back to zero is dropped,
which keeps the representation (and the serialised bytes) canonical.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import DomainError, IncompatibleSketchError, ParameterError
from .field_hash import (
    GOLDEN,
    MASK64,
    MERSENNE_61,
    counter_stream_array,
    derive_seed,
    derive_seed_array,
    mulmod61,
    powmod61,
    splitmix64,
    trailing_zeros,
    trailing_zeros_int,
)

FINGERPRINT_PRIME = MERSENNE_61
BUCKET_CONSTANT = 2

_TAG_MEMBER = 1
_TAG_BUCKET = 2
_TAG_POINT = 3

_MAGIC = b"L0SK"
_VERSION = 1
_HEADER = struct.Struct("<4sHHQdQHHII")
_SPARSE_CELL = struct.Struct("<IqqQ")
_DENSE_CELL = struct.Struct("<qqQ")


@dataclass(frozen=True)
class Found:
    index: int
    frequency: int


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Fail:
    pass


SampleOutcome = Union[Found, Empty, Fail]
EMPTY = Empty()
FAIL = Fail()


def num_levels(domain: int) -> int:
    """``ceil(log2(domain)) + 1`` subsampling levels."""
    return (domain - 1).bit_length() + 1


def buckets_per_level(delta: float) -> int:
    return BUCKET_CONSTANT * max(1, math.ceil(-math.log2(delta) - 1e-9))


def _coef(seed: int, j: int) -> int:
    return splitmix64(seed + (j + 1) * GOLDEN) % MERSENNE_61


def _pairwise(seed: int, x: int) -> int:
    return (_coef(seed, 0) + _coef(seed, 1) * x) % MERSENNE_61


def _pairwise_array(seeds: np.ndarray, x: np.ndarray) -> np.ndarray:
    c0 = counter_stream_array(seeds, 0)
    c1 = counter_stream_array(seeds, 1)
    v = mulmod61(c1, x.astype(np.uint64)) + c0
    return np.where(v >= np.uint64(MERSENNE_61), v - np.uint64(MERSENNE_61), v)


def _point(seed: int, rep: int, level: int, bucket: int) -> int:
    z = _coef(derive_seed(seed, _TAG_POINT, rep, level, bucket), 0)
    return z or 1


def _point_array(seeds: np.ndarray, rep: int, level, bucket: np.ndarray) -> np.ndarray:
    z = counter_stream_array(derive_seed_array(seeds, _TAG_POINT, rep, level, bucket), 0)
    return np.where(z == 0, np.uint64(1), z)


def cell_contributions(
    seeds: np.ndarray,
    indices: np.ndarray,
    deltas: np.ndarray,
    levels: int,
    buckets: int,
    repetitions: int,
) -> tuple[np.ndarray, ...]:
    """Per-update cell contributions for sketches identified by ``seeds``.

    Update ``u`` adds ``deltas[u]`` at ``indices[u]`` to the sketch with seed
    ``seeds[u]``.  Returns ``(row, cell, weight, weighted_sum, fingerprint)``
    arrays with one entry per touched (update, cell) pair; ``row`` points back
    into the input arrays.  Summing the entries cell by cell reproduces
    :meth:`L0Sketch.update` applied to every update.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    idx = np.asarray(indices, dtype=np.int64)
    d = np.asarray(deltas, dtype=np.int64)
    out_rows, out_cells, out_fp = [], [], []
    for rep in range(repetitions):
        member = _pairwise_array(derive_seed_array(seeds, _TAG_MEMBER, rep), idx)
        top = trailing_zeros(member, levels - 1)
        # one entry per (update, admitted level)
        counts = top + 1
        rows = np.repeat(np.arange(idx.size, dtype=np.int64), counts)
        starts = np.cumsum(counts) - counts
        level = np.arange(rows.size, dtype=np.int64) - np.repeat(starts, counts)
        s = seeds[rows]
        x = idx[rows]
        b = (_pairwise_array(derive_seed_array(s, _TAG_BUCKET, rep, level), x)
             % np.uint64(buckets)).astype(np.int64)
        z = _point_array(s, rep, level, b)
        d_mod = (d[rows] % FINGERPRINT_PRIME).astype(np.uint64)
        out_rows.append(rows)
        out_cells.append((level * repetitions + rep) * buckets + b)
        out_fp.append(mulmod61(powmod61(z, x), d_mod))
    rows = np.concatenate(out_rows)
    cells = np.concatenate(out_cells)
    fp = np.concatenate(out_fp)
    return rows, cells, d[rows], d[rows] * idx[rows], fp


def aggregate(groups: np.ndarray, weight: np.ndarray, wsum: np.ndarray, fp: np.ndarray):
    """Sum contributions sharing a group id; fingerprints are summed mod the prime."""
    if groups.size == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, np.zeros(0, dtype=np.uint64)
    order = np.argsort(groups, kind="stable")
    g = groups[order]
    starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
    w = np.add.reduceat(weight[order], starts)
    s = np.add.reduceat(wsum[order], starts)
    f = fp[order]
    lo = np.add.reduceat((f & np.uint64(0xFFFFFFFF)).astype(np.int64), starts)
    hi = np.add.reduceat((f >> np.uint64(32)).astype(np.int64), starts)
    p = np.uint64(FINGERPRINT_PRIME)
    total = mulmod61(hi.astype(np.uint64) % p, np.uint64(1 << 32)) + lo.astype(np.uint64) % p
    total = np.where(total >= p, total - p, total)
    return g[starts], w, s, total


class L0Sketch:
    """Linear l0-sampler over ``[domain]`` with failure probability ``delta``.

    Args:
        domain: length of the sketched vector.
        delta: target failure probability; sets ``2 * ceil(log2(1/delta))``
            buckets per level.
        seed: 64-bit seed.  Sketches with equal ``(domain, delta, seed)`` are
            structurally identical and can be merged.
        repetitions: independent copies of the level grid (default 1).

    A sketch has a single writer; reading it (sampling, serialising) from
    several threads is fine as long as nobody updates it meanwhile.
    """

    __slots__ = ("domain", "delta", "seed", "repetitions", "levels", "buckets", "_cells")

    def __init__(self, domain: int, delta: float, seed: int, repetitions: int = 1) -> None:
        if domain < 1:
            raise ParameterError(f"domain must be positive, got {domain}")
        if not 0.0 < delta < 1.0:
            raise ParameterError(f"delta must lie in (0, 1), got {delta}")
        if repetitions < 1:
            raise ParameterError(f"repetitions must be positive, got {repetitions}")
        self.domain = int(domain)
        self.delta = float(delta)
        self.seed = int(seed) & MASK64
        self.repetitions = int(repetitions)
        self.levels = num_levels(self.domain)
        self.buckets = buckets_per_level(self.delta)
        self._cells: dict[int, list[int]] = {}

    # structure -----------------------------------------------------------

    @property
    def num_cells(self) -> int:
        """Dimension of the sketch in one-sparse cells."""
        return self.levels * self.repetitions * self.buckets

    def cell_id(self, level: int, rep: int, bucket: int) -> int:
        return (level * self.repetitions + rep) * self.buckets + bucket

    def split_cell_id(self, cell: int) -> tuple[int, int, int]:
        lr, bucket = divmod(cell, self.buckets)
        level, rep = divmod(lr, self.repetitions)
        return level, rep, bucket

    def top_level(self, index: int, rep: int = 0) -> int:
        """Highest level admitting ``index`` in repetition ``rep``."""
        h = _pairwise(derive_seed(self.seed, _TAG_MEMBER, rep), index)
        return trailing_zeros_int(h, self.levels - 1)

    def bucket(self, index: int, level: int, rep: int = 0) -> int:
        return _pairwise(derive_seed(self.seed, _TAG_BUCKET, rep, level), index) % self.buckets

    def point(self, level: int, rep: int, bucket: int) -> int:
        return _point(self.seed, rep, level, bucket)

    def compatible(self, other: "L0Sketch") -> bool:
        return (
            isinstance(other, L0Sketch)
            and self.domain == other.domain
            and self.delta == other.delta
            and self.seed == other.seed
            and self.repetitions == other.repetitions
        )

    # updates ---------------------------------------------------------------

    def update(self, index: int, delta_val: int) -> None:
        """Add ``delta_val`` to coordinate ``index``."""
        if not 0 <= index < self.domain:
            raise DomainError(f"index {index} outside [0, {self.domain})")
        if delta_val == 0:
            return
        q = FINGERPRINT_PRIME
        for rep in range(self.repetitions):
            for level in range(self.top_level(index, rep) + 1):
                b = self.bucket(index, level, rep)
                fp = delta_val % q * pow(self.point(level, rep, b), index, q) % q
                self._add(self.cell_id(level, rep, b), delta_val, delta_val * index, fp)

    def update_many(self, indices: Iterable[int], deltas: Iterable[int]) -> None:
        """Vectorised :meth:`update` over parallel index/delta arrays."""
        idx = np.asarray(indices, dtype=np.int64).ravel()
        d = np.asarray(deltas, dtype=np.int64).ravel()
        if idx.shape != d.shape:
            raise ParameterError("indices and deltas must have equal length")
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.domain:
            raise DomainError(f"indices outside [0, {self.domain})")
        seeds = np.full(idx.size, self.seed, dtype=np.uint64)
        _, cells, w, s, fp = cell_contributions(
            seeds, idx, d, self.levels, self.buckets, self.repetitions
        )
        self.apply(*aggregate(cells, w, s, fp))

    def apply(self, cells, weights, wsums, fps) -> None:
        """Add pre-aggregated cell contributions (see :func:`cell_contributions`)."""
        for c, w, s, f in zip(cells.tolist(), weights.tolist(), wsums.tolist(), fps.tolist()):
            self._add(c, w, s, f)

    def _add(self, cell: int, w: int, s: int, fp: int) -> None:
        cur = self._cells.get(cell)
        if cur is None:
            if w or s or fp:
                self._cells[cell] = [w, s, fp % FINGERPRINT_PRIME]
            return
        cur[0] += w
        cur[1] += s
        cur[2] = (cur[2] + fp) % FINGERPRINT_PRIME
        if not (cur[0] or cur[1] or cur[2]):
            del self._cells[cell]

    # merging ---------------------------------------------------------------

    def copy(self) -> "L0Sketch":
        out = L0Sketch.__new__(L0Sketch)
        for name in ("domain", "delta", "seed", "repetitions", "levels", "buckets"):
            setattr(out, name, getattr(self, name))
        out._cells = {c: list(v) for c, v in self._cells.items()}
        return out

    def merge_into(self, other: "L0Sketch") -> None:
        """In-place ``self += other``."""
        if not self.compatible(other):
            raise IncompatibleSketchError(
                "l0 sketches differ in domain, delta, seed or repetitions"
            )
        for c, (w, s, f) in other._cells.items():
            self._add(c, w, s, f)

    def merge(self, other: "L0Sketch") -> "L0Sketch":
        out = self.copy()
        out.merge_into(other)
        return out

    __add__ = merge

    # sampling --------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self._cells

    def decode(self, cell: int) -> Found | None:
        """One-sparse decode of a single cell, or ``None``."""
        entry = self._cells.get(cell)
        if entry is None:
            return None
        w, s, fp = entry
        if w == 0 or s % w:
            return None
        i = s // w
        if not 0 <= i < self.domain:
            return None
        level, rep, bucket = self.split_cell_id(cell)
        q = FINGERPRINT_PRIME
        if fp != w % q * pow(self.point(level, rep, bucket), i, q) % q:
            return None
        return Found(i, w)

    def sample(self) -> SampleOutcome:
        """Return ``Found(index, frequency)``, ``EMPTY`` or ``FAIL``.

        Levels are scanned from the sparsest down; the first cell that decodes
        as one-sparse wins.
        """
        if not self._cells:
            return EMPTY
        order = sorted(self._cells, key=lambda c: (-self.split_cell_id(c)[0], c))
        for cell in order:
            hit = self.decode(cell)
            if hit is not None:
                return hit
        return FAIL

    # serialisation ---------------------------------------------------------

    def cells(self) -> dict[int, tuple[int, int, int]]:
        return {c: tuple(v) for c, v in sorted(self._cells.items())}

    @property
    def dense_nbytes(self) -> int:
        """Length of the dense serialisation, i.e. the full sketch dimension in bytes."""
        return _HEADER.size + self.num_cells * _DENSE_CELL.size

    def to_bytes(self, dense: bool = False) -> bytes:
        """Canonical little-endian serialisation.

        The sparse form (default) lists non-zero cells in level-major order as
        ``(cell id, weight, weighted sum, fingerprint)``; the dense form
        writes every cell without ids.
        """
        parts = [
            _HEADER.pack(
                _MAGIC, _VERSION, 1 if dense else 0, self.domain, self.delta, self.seed,
                self.levels, self.repetitions, self.buckets,
                self.num_cells if dense else len(self._cells),
            )
        ]
        if dense:
            zero = (0, 0, 0)
            parts.extend(_DENSE_CELL.pack(*self._cells.get(c, zero)) for c in range(self.num_cells))
        else:
            parts.extend(_SPARSE_CELL.pack(c, *v) for c, v in sorted(self._cells.items()))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "L0Sketch":
        sketch, end = cls._read(data, 0)
        if end != len(data):
            raise ValueError("trailing bytes after l0 sketch")
        return sketch

    @classmethod
    def _read(cls, data: bytes, offset: int) -> tuple["L0Sketch", int]:
        magic, version, flags, domain, delta, seed, levels, reps, buckets, count = (
            _HEADER.unpack_from(data, offset)
        )
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not an l0 sketch serialisation")
        sketch = cls(domain, delta, seed, reps)
        if (sketch.levels, sketch.buckets) != (levels, buckets):
            raise ValueError("inconsistent l0 sketch header")
        offset += _HEADER.size
        if flags & 1:
            for c in range(count):
                w, s, f = _DENSE_CELL.unpack_from(data, offset)
                offset += _DENSE_CELL.size
                if w or s or f:
                    sketch._cells[c] = [w, s, f]
        else:
            for _ in range(count):
                c, w, s, f = _SPARSE_CELL.unpack_from(data, offset)
                offset += _SPARSE_CELL.size
                sketch._cells[c] = [w, s, f]
        return sketch, offset

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, L0Sketch):
            return NotImplemented
        return self.compatible(other) and self._cells == other._cells

    def __repr__(self) -> str:
        return (
            f"L0Sketch(domain={self.domain}, delta={self.delta!r}, seed={self.seed}, "
            f"levels={self.levels}, buckets={self.buckets}, nonzero={len(self._cells)})"
        )


def build_sketches(
    domain: int,
    delta: float,
    seeds: Iterable[int],
    owner: np.ndarray,
    indices: np.ndarray,
    deltas: np.ndarray,
    repetitions: int = 1,
) -> list[L0Sketch]:
    """Build one sketch per seed from a single flat batch of updates.

    Update ``u`` goes to the sketch ``owner[u]``.  Equivalent to creating
    ``L0Sketch(domain, delta, seeds[k])`` for every ``k`` and calling
    :meth:`L0Sketch.update` for each update, but vectorised across sketches.
    """
    seed_list = [int(x) & MASK64 for x in seeds]
    sketches = [L0Sketch(domain, delta, s, repetitions) for s in seed_list]
    owner = np.asarray(owner, dtype=np.int64)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return sketches
    if idx.min() < 0 or idx.max() >= domain:
        raise DomainError(f"indices outside [0, {domain})")
    seed_arr = np.asarray(seed_list, dtype=np.uint64)[owner]
    ref = sketches[0]
    rows, cells, w, s, fp = cell_contributions(
        seed_arr, idx, deltas, ref.levels, ref.buckets, repetitions
    )
    groups, w, s, fp = aggregate(owner[rows] * ref.num_cells + cells, w, s, fp)
    who, cell = np.divmod(groups, ref.num_cells)
    for k, c, wk, sk, fk in zip(who.tolist(), cell.tolist(), w.tolist(), s.tolist(), fp.tolist()):
        sketches[k]._add(c, wk, sk, fk)
    return sketches


FOUND, EMPTY_CODE, FAIL_CODE = 0, 1, 2


def sample_batch(
    domain: int,
    delta: float,
    seeds: Iterable[int],
    owner: np.ndarray,
    indices: np.ndarray,
    deltas: np.ndarray,
    repetitions: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample every sketch of a :func:`build_sketches` batch without materialising it.

    Returns ``(status, index, frequency)`` arrays, one entry per seed, with
    ``status`` one of ``FOUND``, ``EMPTY_CODE`` or ``FAIL_CODE``.  The outcome
    for each sketch is exactly what :meth:`L0Sketch.sample` would return.
    """
    seed_arr = np.asarray([int(x) & MASK64 for x in seeds], dtype=np.uint64)
    n_sk = seed_arr.size
    status = np.full(n_sk, EMPTY_CODE, dtype=np.int8)
    index = np.full(n_sk, -1, dtype=np.int64)
    freq = np.zeros(n_sk, dtype=np.int64)
    owner = np.asarray(owner, dtype=np.int64)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return status, index, freq
    if idx.min() < 0 or idx.max() >= domain:
        raise DomainError(f"indices outside [0, {domain})")
    levels, buckets = num_levels(domain), buckets_per_level(delta)
    n_cells = levels * repetitions * buckets
    rows, cells, w, s, fp = cell_contributions(
        seed_arr[owner], idx, deltas, levels, buckets, repetitions
    )
    groups, w, s, fp = aggregate(owner[rows] * n_cells + cells, w, s, fp)
    live = (w != 0) | (s != 0) | (fp != 0)
    groups, w, s, fp = groups[live], w[live], s[live], fp[live]
    who, cell = np.divmod(groups, n_cells)
    status[np.unique(who)] = FAIL_CODE

    safe_w = np.where(w == 0, 1, w)
    i = s // safe_w
    ok = (w != 0) & (s % safe_w == 0) & (i >= 0) & (i < domain)
    who, cell, w, fp, i = who[ok], cell[ok], w[ok], fp[ok], i[ok]
    lr, bucket = np.divmod(cell, buckets)
    level, rep = np.divmod(lr, repetitions)
    p = np.uint64(FINGERPRINT_PRIME)
    expect = mulmod61((w % FINGERPRINT_PRIME).astype(np.uint64),
                      powmod61(_point_array(seed_arr[who], rep, level, bucket), i))
    ok = expect == fp % p
    who, cell, w, i, level = who[ok], cell[ok], w[ok], i[ok], level[ok]
    order = np.lexsort((cell, -level, who))
    who, w, i = who[order], w[order], i[order]
    first = np.r_[True, who[1:] != who[:-1]]
    status[who[first]] = FOUND
    index[who[first]] = i[first]
    freq[who[first]] = w[first]
    return status, index, freq


def l0_new(domain: int, delta: float, seed: int) -> L0Sketch:
    return L0Sketch(domain, delta, seed)


def l0_update(s: L0Sketch, index: int, delta_val: int) -> None:
    s.update(index, delta_val)


def l0_merge(a: L0Sketch, b: L0Sketch) -> L0Sketch:
    return a.merge(b)


def l0_sample(s: L0Sketch) -> SampleOutcome:
    return s.sample()
