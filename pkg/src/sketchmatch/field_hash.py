"""k-wise independent hashing over the Mersenne field GF(2^61 - 1).

Every random choice in the package comes from here: hash coefficients,
per-sketch seeds and fingerprint evaluation points are all produced by a
SplitMix64 generator run in counter mode, so equal seeds give equal
randomness on every machine and in every process.  That is what makes two
independently built sketches mergeable.

Both a scalar (Python ``int``) and a vectorised (``numpy.uint64``) path are
provided.  They compute bit-identical values; the tests check this.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError, ParameterError

MERSENNE_61 = (1 << 61) - 1
MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)
_P = np.uint64(MERSENNE_61)

ArrayLike = Union[int, np.ndarray]


def splitmix64(x: int) -> int:
    """SplitMix64 finaliser of a 64-bit integer."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`splitmix64`; ``x`` is cast to ``uint64``."""
    z = np.asarray(x).astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def derive_seed(seed: int, *words: int) -> int:
    """Mix ``seed`` with a tuple of integer words into a fresh 64-bit seed."""
    h = splitmix64(seed)
    for w in words:
        h = splitmix64(h ^ splitmix64((w + GOLDEN) & MASK64))
    return h


def derive_seed_array(seed: ArrayLike, *words: ArrayLike) -> np.ndarray:
    """Vectorised :func:`derive_seed`; arguments broadcast against each other."""
    h = splitmix64_array(_as_u64(seed))
    for w in words:
        h = splitmix64_array(h ^ splitmix64_array(_as_u64(w) + np.uint64(GOLDEN)))
    return h


def counter_stream(seed: int, count: int, modulus: int = MERSENNE_61) -> list[int]:
    """First ``count`` outputs of a counter-mode SplitMix64 stream, reduced mod ``modulus``."""
    return [splitmix64(seed + (j + 1) * GOLDEN) % modulus for j in range(count)]


def counter_stream_array(seed: ArrayLike, j: int, modulus: int = MERSENNE_61) -> np.ndarray:
    """Output ``j`` of the counter stream for each seed in ``seed``."""
    s = _as_u64(seed) + np.uint64(((j + 1) * GOLDEN) & MASK64)
    return splitmix64_array(s) % np.uint64(modulus)


def _as_u64(x: ArrayLike) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype == np.uint64:
        return a
    if a.dtype.kind == "i":
        return a.astype(np.uint64)
    if a.dtype == object or a.dtype.kind == "u":
        return np.asarray([int(v) & MASK64 for v in a.ravel()], dtype=np.uint64).reshape(a.shape)
    raise TypeError(f"cannot interpret {a.dtype} as uint64")


def mulmod61(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a * b mod (2^61 - 1)`` for ``uint64`` arrays with entries below the prime."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
    ah, al = a >> np.uint64(32), a & _MASK32
    bh, bl = b >> np.uint64(32), b & _MASK32
    # 2^61 = 1 and 2^64 = 8 in the field
    mid = ah * bl
    mid += al * bh
    ah *= bh
    ah <<= np.uint64(3)
    al *= bl
    s = mid >> np.uint64(29)
    mid &= _MASK29
    mid <<= np.uint64(32)
    s += mid
    s += ah
    s += al >> np.uint64(61)
    al &= _P
    s += al
    t = s >> np.uint64(61)
    s &= _P
    s += t
    s -= _P * (s >= _P)
    return s


_CHUNK = 1 << 14


def powmod61(base: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """Elementwise ``base ** exponent mod (2^61 - 1)`` by square and multiply."""
    b, e = np.broadcast_arrays(np.asarray(base, dtype=np.uint64), np.asarray(exponent, dtype=np.int64))
    b = b.ravel()
    e = e.ravel()
    out = np.empty(b.shape, dtype=np.uint64)
    # chunked so the temporaries stay in cache
    for lo in range(0, b.size, _CHUNK):
        bc = b[lo:lo + _CHUNK].copy()
        ec = e[lo:lo + _CHUNK].copy()
        result = np.ones(bc.shape, dtype=np.uint64)
        one = np.ones_like(result)
        for _ in range(int(ec.max(initial=0)).bit_length()):
            result = mulmod61(result, np.where(ec & 1, bc, one))
            bc = mulmod61(bc, bc)
            ec >>= 1
        out[lo:lo + _CHUNK] = result
    return out.reshape(np.broadcast(np.asarray(base), np.asarray(exponent)).shape)


def trailing_zeros(x: np.ndarray, cap: int) -> np.ndarray:
    """Number of trailing zero bits of each ``uint64`` entry, clipped at ``cap``.

    Zero has no set bit and is reported as ``cap``.
    """
    x = np.asarray(x, dtype=np.uint64)
    low = x & (~x + np.uint64(1))
    out = np.full(x.shape, cap, dtype=np.int64)
    nz = low != 0
    # powers of two up to 2^63 are exact in float64
    out[nz] = np.log2(low[nz].astype(np.float64)).astype(np.int64)
    return np.minimum(out, cap)


def trailing_zeros_int(x: int, cap: int) -> int:
    if x == 0:
        return cap
    return min((x & -x).bit_length() - 1, cap)


@dataclass(frozen=True)
class HashFamily:
    """A member of a k-wise independent family ``[domain] -> [range]``.

    The member is the polynomial ``c[0] + c[1] x + ... + c[k-1] x^(k-1)``
    over GF(2^61 - 1), reduced modulo ``range``.  The reduction leaves a bias
    of order ``range / prime``, far below anything measurable here.
    """

    k: int
    domain: int
    range: int
    seed: int
    prime: int = MERSENNE_61
    coefficients: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if self.k < 1 or self.domain < 1 or self.range < 1:
            raise ParameterError(
                f"k, domain and range must be positive (got {self.k}, {self.domain}, {self.range})"
            )
        if max(self.domain, self.range) > self.prime:
            raise ParameterError(f"domain and range must not exceed the field size {self.prime}")
        if not self.coefficients:
            object.__setattr__(self, "coefficients", tuple(counter_stream(self.seed, self.k, self.prime)))
        if len(self.coefficients) != self.k or not all(0 <= c < self.prime for c in self.coefficients):
            raise ParameterError("coefficients must be k field elements")

    def __call__(self, x: int) -> int:
        return self.eval(x)

    def eval(self, x: int) -> int:
        if not 0 <= x < self.domain:
            raise DomainError(f"{x} is outside the hash domain [0, {self.domain})")
        p = self.prime
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc * x + c) % p
        return acc % self.range

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate on an integer array; returns ``int64`` values in ``[0, range)``."""
        xs = np.asarray(xs)
        if xs.size and (xs.min() < 0 or xs.max() >= self.domain):
            raise DomainError(f"inputs outside the hash domain [0, {self.domain})")
        if self.prime != MERSENNE_61:
            return np.array([self.eval(int(x)) for x in xs.ravel()], dtype=np.int64).reshape(xs.shape)
        x = xs.astype(np.uint64)
        acc = np.zeros(x.shape, dtype=np.uint64)
        for c in reversed(self.coefficients):
            acc = mulmod61(acc, x) + np.uint64(c)
            acc = np.where(acc >= _P, acc - _P, acc)
        return (acc % np.uint64(self.range)).astype(np.int64)

    def table(self) -> np.ndarray:
        """Values on the whole domain, as an ``int64`` lookup array."""
        return self.eval_many(np.arange(self.domain, dtype=np.int64))


def new_family(k: int, domain: int, range: int, seed: int) -> HashFamily:
    """Draw the member of the degree-``k`` family selected by ``seed``."""
    return HashFamily(k=k, domain=domain, range=range, seed=seed & MASK64)
