"""Monte Carlo checks of the probabilistic facts the matching sketch relies on.

Each check returns a :class:`Report` with the raw metrics, Wilson intervals
for the measured frequencies and one boolean per asserted property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import binomtest

from .errors import ParameterError
from .field_hash import derive_seed_array
from .l0_sampler import FAIL_CODE, FOUND, sample_batch
from .matching_sketch import MatchingSketch, snapped_power

_TAG_TRIAL = 31
_CHUNK_UPDATES = 1 << 18

BALLS_BINS_GRID = (4, 16, 64, 256)


@dataclass(frozen=True)
class Report:
    name: str
    params: dict[str, Any]
    metrics: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def wilson(successes: int, trials: int) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def slack(p: float, trials: int) -> float:
    """Three binomial standard deviations at rate ``p``."""
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


def nonempty_bins(x: int, y: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Occupied-bin counts for ``trials`` throws of ``x`` balls into ``y`` bins."""
    throws = np.sort(rng.integers(y, size=(trials, x)), axis=1)
    return 1 + np.count_nonzero(np.diff(throws, axis=1), axis=1)


def balls_bins(
    xs: Sequence[int] = BALLS_BINS_GRID,
    ys: Sequence[int] = BALLS_BINS_GRID,
    trials: int = 10_000,
    seed: int = 0,
    threshold: float = 0.5,
) -> Report:
    """Frequency of at least ``min(x, y) / 3`` occupied bins, per grid cell."""
    if trials < 1:
        raise ParameterError("trials must be positive")
    rng = np.random.default_rng(seed)
    metrics: dict[str, float] = {}
    checks: dict[str, bool] = {}
    for x in xs:
        for y in ys:
            hits = int(np.count_nonzero(nonempty_bins(x, y, trials, rng) >= min(x, y) / 3))
            freq = hits / trials
            lo, hi = wilson(hits, trials)
            key = f"x={x},y={y}"
            metrics[f"{key}:frequency"] = freq
            metrics[f"{key}:ci_low"] = lo
            metrics[f"{key}:ci_high"] = hi
            checks[key] = freq >= threshold - slack(threshold, trials)
    return Report("balls_bins", {"xs": list(xs), "ys": list(ys), "trials": trials, "seed": seed}, metrics, checks)


def spanning_fraction(sketch: MatchingSketch, perm: np.ndarray) -> float:
    """Share of left groups whose edges of the matching ``u -> perm[u]`` reach
    at least ``min(n^eps, alpha) / 3`` distinct right groups."""
    p = sketch.params
    need = min(snapped_power(p.n, p.epsilon), p.alpha) / 3
    gl = sketch.left_groups
    gr = sketch.right_groups[perm]
    pairs = np.unique(gl * p.alpha + gr)
    reached = np.bincount(pairs // p.alpha, minlength=p.alpha)
    return float(np.count_nonzero(reached >= need)) / p.alpha


def spanning(
    n: int = 1024,
    epsilon: float = 0.5,
    trials: int = 200,
    seed: int = 0,
    threshold: float = 0.4,
) -> Report:
    """Frequency with which at least a quarter of the left groups are spanning.

    Each trial draws a fresh sketch (hence fresh group hashes) and a fresh
    planted perfect matching, with ``opt_hat = n``.
    """
    if trials < 1:
        raise ParameterError("trials must be positive")
    rng = np.random.default_rng(seed)
    seeds = derive_seed_array(seed, _TAG_TRIAL, np.arange(trials, dtype=np.int64)).tolist()
    fractions = []
    for s in seeds:
        sketch = MatchingSketch(n, epsilon, n, s)
        fractions.append(spanning_fraction(sketch, rng.permutation(n)))
    fr = np.asarray(fractions)
    hits = int(np.count_nonzero(fr >= 0.25))
    lo, hi = wilson(hits, trials)
    return Report(
        "spanning",
        {"n": n, "epsilon": epsilon, "trials": trials, "seed": seed},
        {
            "frequency": hits / trials,
            "ci_low": lo,
            "ci_high": hi,
            "median_fraction": float(np.median(fr)),
            "min_fraction": float(fr.min()),
        },
        {"frequency": hits / trials >= threshold - slack(threshold, trials)},
    )


@dataclass(frozen=True)
class SamplerTrials:
    support: np.ndarray
    frequencies: np.ndarray
    status: np.ndarray
    index: np.ndarray
    returned: np.ndarray


def run_sampler_trials(
    support_size: int,
    domain: int,
    delta: float,
    trials: int,
    seed: int,
) -> SamplerTrials:
    """Sketch one fixed vector under ``trials`` independent sampler seeds.

    The support is drawn uniformly from ``[domain]`` and the multiplicities
    uniformly from ``1..4``.
    """
    if not 1 <= support_size <= domain:
        raise ParameterError("support size must lie in [1, domain]")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(domain, size=support_size, replace=False))
    freqs = rng.integers(1, 5, size=support_size)
    seeds = derive_seed_array(seed, _TAG_TRIAL, np.arange(trials, dtype=np.int64))
    status = np.empty(trials, dtype=np.int8)
    index = np.empty(trials, dtype=np.int64)
    returned = np.empty(trials, dtype=np.int64)
    per_chunk = max(1, _CHUNK_UPDATES // support_size)
    for lo in range(0, trials, per_chunk):
        chunk = seeds[lo:lo + per_chunk]
        m = chunk.size
        owner = np.repeat(np.arange(m), support_size)
        st, ix, fq = sample_batch(
            domain, delta, chunk, owner, np.tile(support, m), np.tile(freqs, m)
        )
        status[lo:lo + m], index[lo:lo + m], returned[lo:lo + m] = st, ix, fq
    return SamplerTrials(support, freqs, status, index, returned)


def sampler_uniformity(
    support_size: int = 64,
    domain: int = 1 << 16,
    delta: float = 2.0 ** -10,
    trials: int = 10_000,
    seed: int = 0,
    tv_tolerance: float = 0.05,
) -> Report:
    """Fail rate, frequency exactness and distance from uniform of returned indices."""
    res = run_sampler_trials(support_size, domain, delta, trials, seed)
    found = res.status == FOUND
    fails = int(np.count_nonzero(res.status == FAIL_CODE))
    pos = np.searchsorted(res.support, res.index[found])
    in_support = (pos < support_size) & (res.support[np.minimum(pos, support_size - 1)] == res.index[found])
    exact = in_support & (res.frequencies[np.minimum(pos, support_size - 1)] == res.returned[found])
    counts = np.bincount(pos[in_support], minlength=support_size)
    n_found = int(found.sum())
    tv = 0.5 * float(np.abs(counts / max(n_found, 1) - 1.0 / support_size).sum()) if n_found else 1.0
    fail_rate = fails / trials
    return Report(
        "sampler_uniformity",
        {"support": support_size, "domain": domain, "delta": delta, "trials": trials, "seed": seed},
        {
            "fail_rate": fail_rate,
            "fail_bound": delta + slack(delta, trials),
            "exact_rate": float(exact.mean()) if n_found else 0.0,
            "tv_distance": tv,
            "found": n_found,
        },
        {
            "fail_rate": fail_rate <= delta + slack(delta, trials),
            "exact": bool(exact.all()) and n_found + fails == trials,
            "uniform": tv <= tv_tolerance,
        },
    )


DIAGNOSTICS = {
    "balls_bins": balls_bins,
    "spanning": spanning,
    "sampler_uniformity": sampler_uniformity,
}
