"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``python3 tests/test_acceptance.py`` or ``pytest tests/test_acceptance.py -s``.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import brute_max_matching, paired_turnstile  # noqa: E402
from sketchmatch._calibration import (  # noqa: E402
    APPROX_CONSTANT,
    BYTE_CONSTANT,
    CELL_CONSTANT,
    WORD_BYTES,
)
from sketchmatch.diagnostics import balls_bins, sampler_uniformity, spanning  # noqa: E402
from sketchmatch.errors import StrictTurnstileError  # noqa: E402
from sketchmatch.exact_matching import BipartiteGraph, max_matching  # noqa: E402
from sketchmatch.experiments import (  # noqa: E402
    APPROX_CONFIGS,
    CALIBRATION_SEED,
    approx_trials,
    space_scale,
)
from sketchmatch.matching_sketch import GuessOptSketch, MatchingSketch, ms_new  # noqa: E402
from sketchmatch.simultaneous import (  # noqa: E402
    check_trivial_ratio,
    coordinate,
    gen_hard,
    read_rs_graph,
    six_cycle_rs,
)
from sketchmatch.stream import EdgeUpdate, StreamSpec, gen_planted, validate  # noqa: E402

DATA = Path(__file__).parent / "data"
ACCEPTANCE_SEED = 0xACCE97


def report(number: int, name: str, ok: bool, detail: str, seconds: float, limit: float | None) -> None:
    timed = f"{seconds:.1f}s" + (f" (limit {limit:.0f}s)" if limit else "")
    line = f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}; {timed}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# 1 -------------------------------------------------------------------------

def test_1_merge_is_byte_identical():
    start = time.perf_counter()
    mismatches = 0
    for i in range(100):
        rng = np.random.default_rng([ACCEPTANCE_SEED, 1, i])
        ups = np.stack(paired_turnstile(256, 10_000, rng), axis=1)
        opt_hat = (4, 32, 256)[i % 3]
        fresh = ms_new(256, 1 / 3, opt_hat, i)
        whole = fresh.copy()
        whole.update_many(*ups.T)
        want = whole.to_bytes()
        for k in (2, 4, 8):
            owner = rng.integers(k, size=len(ups))
            players = []
            for p in range(k):
                s = fresh.copy()
                s.update_many(*ups[owner == p].T)
                players.append(s)
            mismatches += coordinate(players).to_bytes() != want
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 30
    report(1, "linearity/merge", ok, f"{mismatches} mismatches in 300 merges", elapsed, 30)
    assert ok


# 2 -------------------------------------------------------------------------

def test_2_sampler_contract():
    start = time.perf_counter()
    delta = 2.0 ** -10
    parts, ok = [], True
    for support in (1, 10, 100, 1000):
        rep = sampler_uniformity(support, 1 << 16, delta, 10_000, seed=ACCEPTANCE_SEED + support)
        fine = rep.checks["fail_rate"] and rep.checks["exact"]
        ok &= fine
        parts.append(f"s={support} fail={rep.metrics['fail_rate']:.4f} exact={rep.metrics['exact_rate']:.3f}")
    rep = sampler_uniformity(64, 1 << 16, delta, 100_000, seed=ACCEPTANCE_SEED + 64)
    ok &= rep.passed
    parts.append(f"s=64 tv={rep.metrics['tv_distance']:.4f}")
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < 120
    report(2, "l0 sampler contract", ok, ", ".join(parts), elapsed, 120)
    assert ok


# 3 -------------------------------------------------------------------------

def test_3_approximation_with_pinned_constant():
    start = time.perf_counter()
    assert ACCEPTANCE_SEED != CALIBRATION_SEED
    parts, ok = [], APPROX_CONSTANT <= 32
    for n, eps in APPROX_CONFIGS:
        for planted in (n // 4, n):
            results = approx_trials(n, eps, planted, 50, ACCEPTANCE_SEED)
            freq = sum(r.ratio_ok for r in results) / len(results)
            ok &= freq >= 0.9
            worst = max(r.ratio for r in results)
            parts.append(f"n={n} eps={eps:.2f} opt={planted}: {freq:.2f} (worst ratio {worst:.2f})")
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < 300
    report(3, f"approximation C={APPROX_CONSTANT}", ok, "; ".join(parts), elapsed, 300)
    assert ok


# 4 -------------------------------------------------------------------------

def test_4_space_scaling():
    start = time.perf_counter()
    n = 1024
    stream, _ = gen_planted(n, n, n, n // 2, seed=ACCEPTANCE_SEED)
    sizes, cells = {}, {}
    for eps in (1 / 3, 0.4, 0.5):
        g = GuessOptSketch(n, eps, ACCEPTANCE_SEED)
        g.consume(stream)
        sizes[eps], cells[eps] = g.dense_nbytes, g.num_cells
    fits = {eps: b / (WORD_BYTES * space_scale(n, eps)) for eps, b in sizes.items()}
    # one constant covers every eps, and none is looser than a factor 8
    single = all(BYTE_CONSTANT / 8 <= c <= BYTE_CONSTANT for c in fits.values())
    spread = max(fits.values()) / min(fits.values())
    drop = sizes[1 / 3] / sizes[0.5]
    cell_ok = all(cells[eps] <= CELL_CONSTANT * space_scale(n, eps) for eps in cells)
    small = GuessOptSketch(64, 1 / 3, 1)
    small.consume(gen_planted(64, 32, 20, 10, seed=2)[0])
    exact = len(small.to_bytes(dense=True)) == small.dense_nbytes
    elapsed = time.perf_counter() - start
    ok = single and spread <= 8 and drop >= math.sqrt(n) / 8 and cell_ok and exact and elapsed < 60
    detail = (
        "bytes " + ", ".join(f"{b}" for b in sizes.values())
        + f"; c = " + ", ".join(f"{c:.2f}" for c in fits.values())
        + f" (spread {spread:.2f}); b(1/3)/b(1/2) = {drop:.1f} >= {math.sqrt(n) / 8:.0f}"
    )
    report(4, "space scaling", ok, detail, elapsed, 60)
    assert ok


# 5 -------------------------------------------------------------------------

def test_5_exact_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng([ACCEPTANCE_SEED, 5])
    agree = 0
    for _ in range(200):
        nl, nr = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        m = int(rng.integers(0, 13))
        edges = tuple((int(rng.integers(nl)), int(rng.integers(nr))) for _ in range(m))
        g = BipartiteGraph(nl, nr, edges)
        agree += max_matching(g).size == brute_max_matching(g.edges)
    elapsed = time.perf_counter() - start
    ok = agree == 200 and elapsed < 10
    report(5, "Hopcroft-Karp vs brute force", ok, f"{agree}/200 agree", elapsed, 10)
    assert ok


# 6 -------------------------------------------------------------------------

def test_6_trivial_matchings_are_poor():
    start = time.perf_counter()
    parts, ok = [], True
    for name, rs in (("6-cycle", six_cycle_rs()), ("torus", read_rs_graph(DATA / "torus4x4_rs.txt"))):
        for k in (2, 4):
            reps = [check_trivial_ratio(gen_hard(rs, k, ACCEPTANCE_SEED + s)) for s in range(20)]
            good = sum(r.ok for r in reps)
            ok &= good == 20
            parts.append(f"{name} k={k}: {good}/20, max ratio {max(r.ratio for r in reps):.2f} <= {reps[0].bound:.2f}")
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < 60
    report(6, "hard instances", ok, "; ".join(parts), elapsed, 60)
    assert ok


# 7 -------------------------------------------------------------------------

def test_7_diagnostics():
    start = time.perf_counter()
    bb = balls_bins(trials=10_000, seed=ACCEPTANCE_SEED)
    sp = spanning(n=1024, epsilon=0.5, trials=200, seed=ACCEPTANCE_SEED)
    lowest = min(v for k, v in bb.metrics.items() if k.endswith(":frequency"))
    elapsed = time.perf_counter() - start
    ok = bb.passed and sp.passed and elapsed < 120
    detail = f"balls-bins min frequency {lowest:.3f}; spanning frequency {sp.metrics['frequency']:.3f}"
    report(7, "diagnostics", ok, detail, elapsed, 120)
    assert ok


# 8 -------------------------------------------------------------------------

def first_violation(updates: list[tuple[int, int, int]]) -> int | None:
    mult: dict[tuple[int, int], int] = {}
    for pos, (u, v, d) in enumerate(updates):
        mult[(u, v)] = mult.get((u, v), 0) + d
        if mult[(u, v)] < 0:
            return pos
    return None


def test_8_strict_turnstile_enforcement():
    start = time.perf_counter()
    rng = np.random.default_rng([ACCEPTANCE_SEED, 8])
    exact = 0
    for trial in range(100):
        ups = list(zip(*(a.tolist() for a in paired_turnstile(16, 200, rng))))
        pos = int(rng.integers(len(ups) + 1))
        live: dict[tuple[int, int], int] = {}
        for u, v, d in ups[:pos]:
            live[(u, v)] = live.get((u, v), 0) + d
        dead = [(u, v) for u in range(16) for v in range(16) if live.get((u, v), 0) == 0]
        u, v = dead[int(rng.integers(len(dead)))]
        bad = ups[:pos] + [(u, v, -1)] + ups[pos:]
        assert first_violation(bad) == pos
        try:
            validate(StreamSpec(16, tuple(EdgeUpdate(*x) for x in bad)))
        except StrictTurnstileError as err:
            exact += err.position == pos and err.edge == (u, v)
    elapsed = time.perf_counter() - start
    ok = exact == 100
    report(8, "strict turnstile", ok, f"{exact}/100 rejected at the first offending position", elapsed, None)
    assert ok


if __name__ == "__main__":
    import subprocess

    sys.exit(subprocess.call([sys.executable, "-m", "pytest", __file__, "-q", "-s", "-p", "no:cacheprovider"]))
