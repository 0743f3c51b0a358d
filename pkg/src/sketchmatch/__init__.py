"""Linear sketches for approximate maximum matching in dynamic graph streams."""

from __future__ import annotations

from .errors import (
    BudgetError,
    DomainError,
    IncompatibleSketchError,
    ParameterError,
    StreamParseError,
    StrictTurnstileError,
)
from .exact_matching import BipartiteGraph, Matching, greedy_maximal, max_matching, max_matching_general
from .field_hash import HashFamily, new_family
from .l0_sampler import EMPTY, FAIL, Empty, Fail, Found, L0Sketch, l0_merge, l0_new, l0_sample, l0_update
from .matching_sketch import (
    GuessOptSketch,
    MatchingSketch,
    Params,
    bipartition_reduce,
    guess_opt_extract,
    ms_extract,
    ms_merge,
    ms_new,
    ms_update,
)
from .simultaneous import (
    HardInstance,
    RSGraph,
    check_trivial_ratio,
    find_rs_decomposition,
    gen_hard,
    run_simultaneous,
    verify_rs,
)
from .stream import EdgeUpdate, StreamSpec, gen_planted, read_stream, validate, write_stream

__all__ = [
    "BipartiteGraph", "BudgetError", "DomainError", "EMPTY", "EdgeUpdate", "Empty", "FAIL", "Fail",
    "Found", "GuessOptSketch", "HardInstance", "HashFamily", "IncompatibleSketchError", "L0Sketch",
    "Matching", "MatchingSketch", "ParameterError", "Params", "RSGraph", "StreamParseError",
    "StreamSpec", "StrictTurnstileError", "bipartition_reduce", "check_trivial_ratio",
    "find_rs_decomposition", "gen_hard", "gen_planted", "greedy_maximal", "guess_opt_extract",
    "l0_merge", "l0_new", "l0_sample", "l0_update", "max_matching", "max_matching_general",
    "ms_extract", "ms_merge", "ms_new", "ms_update", "new_family", "read_stream", "run_simultaneous",
    "validate", "verify_rs", "write_stream",
]
