"""Planted-matching trials shared by the command line runner and the calibration."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from ._calibration import APPROX_CONSTANT, WORD_BYTES
from .exact_matching import BipartiteGraph, max_matching
from .field_hash import derive_seed
from .matching_sketch import GuessOptSketch, snapped_power
from .simultaneous import run_simultaneous
from .stream import gen_planted, validate

OptHatPolicy = Literal["known", "guess"]

APPROX_CONFIGS: tuple[tuple[int, float], ...] = ((256, 1 / 3), (1024, 1 / 3), (1024, 0.5))
CALIBRATION_SEED = 0xC0FFEE


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    n: int
    epsilon: float
    opt_hat: str
    players: int
    planted: int
    opt: int
    extracted: int
    ratio: float
    bound: float
    ratio_ok: bool
    active: int
    found: int
    empty: int
    fail: int
    sketch_bytes: int
    dense_bytes: int
    max_message_bytes: int
    cells: int
    time_s: float | None = None

    def row(self) -> dict[str, object]:
        return asdict(self)


def approx_bound(n: int, epsilon: float, constant: float = APPROX_CONSTANT) -> float:
    """Largest allowed ``opt / extracted`` ratio, ``C n^eps``."""
    return constant * snapped_power(n, epsilon)


def ratio(opt: int, extracted: int) -> float:
    if opt == 0:
        return 1.0
    return opt / extracted if extracted else math.inf


def run_trial(
    trial: int,
    seed: int,
    n: int,
    epsilon: float,
    planted: int,
    noise: int = 0,
    churn: int = 0,
    policy: OptHatPolicy = "guess",
    players: int = 1,
    timing: bool = False,
    constant: float = APPROX_CONSTANT,
) -> TrialResult:
    """Generate a planted stream, sketch it across ``players`` and extract.

    ``seed`` is the trial's own seed; the stream, the sketch and the player
    partition each get an independent seed derived from it.
    """
    start = time.perf_counter()
    stream, _ = gen_planted(n, planted, noise, churn, derive_seed(seed, 1))
    final = validate(stream)
    opt = max_matching(BipartiteGraph(n, n, tuple(final))).size
    opt_hat = min(n, max(1, opt)) if policy == "known" else None
    res = run_simultaneous(
        stream, players, epsilon, opt_hat, derive_seed(seed, 2), partition_seed=derive_seed(seed, 3)
    )
    counts = res.sketch.sampler_counts()
    extracted = res.matching.size
    bound = approx_bound(n, epsilon, constant)
    r = ratio(opt, extracted)
    return TrialResult(
        trial=trial,
        seed=seed,
        n=n,
        epsilon=epsilon,
        opt_hat=policy,
        players=players,
        planted=planted,
        opt=opt,
        extracted=extracted,
        ratio=r,
        bound=bound,
        ratio_ok=r <= bound,
        active=counts["active"],
        found=counts["found"],
        empty=counts["empty"],
        fail=counts["fail"],
        sketch_bytes=len(res.sketch.to_bytes()),
        dense_bytes=res.sketch.dense_nbytes,
        max_message_bytes=max(res.message_bytes),
        cells=res.sketch.num_cells,
        time_s=time.perf_counter() - start if timing else None,
    )


def approx_trials(
    n: int,
    epsilon: float,
    planted: int,
    trials: int,
    base_seed: int,
    noise: int | None = None,
    churn: int | None = None,
    policy: OptHatPolicy = "known",
) -> list[TrialResult]:
    """The approximation experiment; noise defaults to ``n`` edges and churn to ``n / 2``."""
    noise = n if noise is None else noise
    churn = n // 2 if churn is None else churn
    return [
        run_trial(t, derive_seed(base_seed, n, round(epsilon * 1000), planted, t), n, epsilon,
                  planted, noise=noise, churn=churn, policy=policy)
        for t in range(trials)
    ]


def calibration_grid() -> list[dict[str, object]]:
    """The approximation grid plus the small guess-mode run used as the CLI example."""
    grid: list[dict[str, object]] = [
        {"n": n, "epsilon": eps, "planted": planted}
        for n, eps in APPROX_CONFIGS
        for planted in (n // 4, n)
    ]
    grid.append({"n": 64, "epsilon": 1 / 3, "planted": 64, "noise": 0, "churn": 0, "policy": "guess"})
    return grid


def calibrate(trials: int = 50, base_seed: int = CALIBRATION_SEED) -> float:
    """Worst observed ``opt / (extracted n^eps)`` over :func:`calibration_grid`.

    Uses its own seeds, disjoint from those of the acceptance run.
    """
    worst = 0.0
    for cfg in calibration_grid():
        n, eps = int(cfg["n"]), float(cfg["epsilon"])  # type: ignore[arg-type]
        extra = {k: v for k, v in cfg.items() if k not in ("n", "epsilon", "planted")}
        for res in approx_trials(n, eps, int(cfg["planted"]), trials, base_seed, **extra):  # type: ignore[arg-type]
            worst = max(worst, res.ratio / snapped_power(n, eps))
    return worst


SPACE_EPSILONS: tuple[float, ...] = (1 / 3, 0.4, 0.5)


def space_scale(n: int, epsilon: float) -> float:
    """``n^(2 - 3 eps) log2(n)^4``, the growth the sketch size is measured against."""
    return n ** (2 - 3 * epsilon) * math.log2(n) ** 4


def space_constants(
    n: int = 1024, epsilons: tuple[float, ...] = SPACE_EPSILONS, seeds: range = range(30)
) -> dict[str, float]:
    """Largest cells and dense words per unit of :func:`space_scale` in guess mode.

    Both counts depend only on the hashed structure, so no stream is needed.
    """
    cells = words = 0.0
    for eps in epsilons:
        scale = space_scale(n, eps)
        for s in seeds:
            g = GuessOptSketch(n, eps, s)
            cells = max(cells, g.num_cells / scale)
            words = max(words, g.dense_nbytes / WORD_BYTES / scale)
    return {"cells": cells, "words": words}


def summarize(values: list[float]) -> dict[str, float]:
    a = np.asarray(values, dtype=float)
    return {"median": float(np.median(a)), "p10": float(np.percentile(a, 10))}
