from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from sketchmatch.diagnostics import (
    balls_bins,
    nonempty_bins,
    run_sampler_trials,
    sampler_uniformity,
    spanning,
    spanning_fraction,
    wilson,
)
from sketchmatch.errors import ParameterError
from sketchmatch.l0_sampler import FOUND
from sketchmatch.matching_sketch import ms_new


def exact_occupancy(x, y):
    """Distribution of occupied bins by enumerating all y^x throws."""
    dist: dict[int, Fraction] = {}
    for throw in itertools.product(range(y), repeat=x):
        k = len(set(throw))
        dist[k] = dist.get(k, Fraction(0)) + Fraction(1, y ** x)
    return dist


@pytest.mark.parametrize("x,y", [(3, 3), (4, 2), (2, 5), (5, 4)])
def test_nonempty_bins_matches_exact_distribution(x, y):
    counts = nonempty_bins(x, y, 40_000, np.random.default_rng(0))
    for k, p in exact_occupancy(x, y).items():
        freq = np.mean(counts == k)
        assert abs(freq - float(p)) <= 4 * np.sqrt(float(p) * (1 - float(p)) / 40_000)


def test_single_ball_and_single_bin():
    rng = np.random.default_rng(1)
    assert (nonempty_bins(1, 50, 100, rng) == 1).all()
    assert (nonempty_bins(50, 1, 100, rng) == 1).all()


def test_balls_bins_small_grid_passes():
    rep = balls_bins(xs=(4, 64), ys=(4, 64), trials=2000, seed=3)
    assert rep.passed
    assert set(rep.checks) == {"x=4,y=4", "x=4,y=64", "x=64,y=4", "x=64,y=64"}
    for key in rep.checks:
        lo, hi = rep.metrics[f"{key}:ci_low"], rep.metrics[f"{key}:ci_high"]
        assert lo <= rep.metrics[f"{key}:frequency"] <= hi


def test_balls_bins_rejects_zero_trials():
    with pytest.raises(ParameterError):
        balls_bins(trials=0)


def test_wilson_interval():
    lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi and hi - lo < 0.25
    assert wilson(0, 10)[0] == 0.0


def test_spanning_fraction_by_hand():
    s = ms_new(256, 0.5, 256, 4)
    p = s.params
    perm = np.arange(256)
    need = min(16, p.alpha) / 3
    reached = [len({int(s.right_groups[u]) for u in range(256) if s.left_groups[u] == g}) for g in range(p.alpha)]
    assert spanning_fraction(s, perm) == sum(r >= need for r in reached) / p.alpha


def test_spanning_small_run_is_deterministic():
    a = spanning(n=256, epsilon=0.5, trials=20, seed=5)
    assert a == spanning(n=256, epsilon=0.5, trials=20, seed=5)
    assert 0.0 <= a.metrics["min_fraction"] <= a.metrics["median_fraction"] <= 1.0


def test_sampler_trials_single_support():
    res = run_sampler_trials(1, 1 << 16, 2.0 ** -10, 300, seed=2)
    assert (res.status == FOUND).all()
    assert (res.index == res.support[0]).all()
    assert (res.returned == res.frequencies[0]).all()


def test_sampler_uniformity_reports_all_checks():
    rep = sampler_uniformity(support_size=16, trials=4000, seed=1)
    assert set(rep.checks) == {"fail_rate", "exact", "uniform"}
    assert rep.passed and rep.metrics["exact_rate"] == 1.0


def test_sampler_trials_reject_bad_support():
    with pytest.raises(ParameterError):
        run_sampler_trials(0, 100, 0.1, 10, 0)
    with pytest.raises(ParameterError):
        run_sampler_trials(101, 100, 0.1, 10, 0)
