"""Command line experiment runner.

Subcommands::

    sketchmatch run       planted-matching trials, one row per trial plus aggregates
    sketchmatch diagnose  Monte Carlo checks (balls_bins, spanning, sampler_uniformity)
    sketchmatch hard      hard instances from an RS graph, with the trivial-matching check

Every command is deterministic given ``--seed``.  The exit code is 0 when all
asserted properties hold, 1 when one fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Any, Sequence

from ._calibration import APPROX_CONSTANT
from .diagnostics import DIAGNOSTICS, Report
from .errors import BudgetError, ParameterError
from .experiments import TrialResult, run_trial, summarize
from .field_hash import derive_seed
from .simultaneous import (
    check_trivial_ratio,
    find_rs_decomposition,
    gen_hard,
    read_rs_graph,
    write_instance,
)
from .stream import write_stream

SCHEMA_VERSION = 1
RUN_PASS_FREQUENCY = 0.9


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    n: int = 64
    epsilon: float = 1 / 3
    trials: int = 1
    seed: int = 0
    opt_hat: str = "guess"
    out: str | None = None
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ParameterError(f"n: must be at least 2, got {self.n}")
        if not 0.0 < self.epsilon <= 0.5:
            raise ParameterError(f"epsilon: must lie in (0, 1/2], got {self.epsilon}")
        if self.trials < 1:
            raise ParameterError(f"trials: must be positive, got {self.trials}")
        if self.seed < 0:
            raise ParameterError(f"seed: must be non-negative, got {self.seed}")
        if self.opt_hat not in ("known", "guess"):
            raise ParameterError(f"opt_hat: expected 'known' or 'guess', got {self.opt_hat!r}")
        if self.format not in ("csv", "json"):
            raise ParameterError(f"format: expected 'csv' or 'json', got {self.format!r}")


def _number(text: str) -> float:
    """Parse ``0.25`` or ``1/4``."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _json_value(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _csv_text(fieldnames: Sequence[str], rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fieldnames})
    return buf.getvalue()


def _json_text(obj: dict[str, Any]) -> str:
    def clean(x: Any) -> Any:
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, list):
            return [clean(v) for v in x]
        return _json_value(x)

    return json.dumps(clean(obj), indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# run -----------------------------------------------------------------------

RUN_FIELDS = ["schema_version", "row"] + [f for f in TrialResult.__dataclass_fields__]
AGGREGATED = ("opt", "extracted", "ratio", "sketch_bytes", "dense_bytes")


def cmd_run(config: ExperimentConfig, planted: int | None = None, noise: int = 0, churn: int = 0,
            players: int = 1, workers: int = 1, timing: bool = False,
            constant: float = APPROX_CONSTANT) -> tuple[str, bool]:
    """Run the trials; returns the rendered table and whether the ratio property held."""
    planted = config.n if planted is None else planted
    if not 0 <= planted <= config.n:
        raise ParameterError(f"planted: must lie in [0, {config.n}], got {planted}")
    if players < 1:
        raise ParameterError(f"players: must be positive, got {players}")
    job = partial(
        _trial_job, n=config.n, epsilon=config.epsilon, planted=planted, noise=noise, churn=churn,
        policy=config.opt_hat, players=players, timing=timing, constant=constant,
    )
    args = [(t, derive_seed(config.seed, t)) for t in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, args))
    else:
        results = [job(a) for a in args]
    ok_frac = sum(r.ratio_ok for r in results) / len(results)
    passed = ok_frac >= RUN_PASS_FREQUENCY
    aggregates = {
        stat: {k: summarize([float(getattr(r, k)) for r in results])[stat] for k in AGGREGATED}
        for stat in ("median", "p10")
    }
    if config.format == "csv":
        rows = [{"schema_version": SCHEMA_VERSION, "row": "trial", **r.row()} for r in results]
        rows += [{"schema_version": SCHEMA_VERSION, "row": stat, **vals} for stat, vals in aggregates.items()]
        return _csv_text(RUN_FIELDS, rows), passed
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "config": {**{k: v for k, v in asdict(config).items() if k != "out"}, "planted": planted, "noise": noise, "churn": churn,
                   "players": players, "constant": constant},
        "trials": [r.row() for r in results],
        "aggregate": aggregates,
        "ratio_ok_frequency": ok_frac,
        "passed": passed,
    }
    return _json_text(doc), passed


def _trial_job(arg: tuple[int, int], **kwargs: Any) -> TrialResult:
    trial, seed = arg
    return run_trial(trial, seed, **kwargs)


# diagnose ------------------------------------------------------------------

def cmd_diagnose(which: str, config: ExperimentConfig, trials: int | None = None,
                 support: int = 64, domain: int = 1 << 16, delta: float = 2.0 ** -10) -> tuple[str, bool]:
    if which not in DIAGNOSTICS:
        raise ParameterError(f"diagnose: unknown diagnostic {which!r}; choose from {sorted(DIAGNOSTICS)}")
    kw: dict[str, Any] = {"seed": config.seed}
    if trials is not None:
        kw["trials"] = trials
    if which == "spanning":
        kw.update(n=config.n, epsilon=config.epsilon)
    elif which == "sampler_uniformity":
        kw.update(support_size=support, domain=domain, delta=delta)
    report: Report = DIAGNOSTICS[which](**kw)
    if config.format == "csv":
        rows = [{"schema_version": SCHEMA_VERSION, "kind": "param", "name": k, "value": json.dumps(v)}
                for k, v in report.params.items()]
        rows += [{"schema_version": SCHEMA_VERSION, "kind": "metric", "name": k, "value": v}
                 for k, v in report.metrics.items()]
        rows += [{"schema_version": SCHEMA_VERSION, "kind": "check", "name": k, "value": v}
                 for k, v in report.checks.items()]
        rows.append({"schema_version": SCHEMA_VERSION, "kind": "result", "name": "passed", "value": report.passed})
        return _csv_text(["schema_version", "kind", "name", "value"], rows), report.passed
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "diagnose",
        "name": report.name,
        "params": report.params,
        "metrics": report.metrics,
        "checks": report.checks,
        "passed": report.passed,
    }
    return _json_text(doc), report.passed


# hard ----------------------------------------------------------------------

HARD_FIELDS = ["schema_version", "instance", "seed", "k", "n", "N", "r", "t", "max_matching",
               "max_trivial", "good_vertices", "alpha", "epsilon", "bound", "ratio", "ok"]


def _cycle(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def _read_edges(path: str) -> tuple[int, list[tuple[int, int]]]:
    """Edge list file: ``n <N>`` then ``a b`` per line."""
    lines = [ln.split() for ln in Path(path).read_text(encoding="ascii").splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2 or lines[0][0] != "n":
        raise ParameterError(f"graph: {path} must start with 'n <N>'")
    return int(lines[0][1]), [(int(a), int(b)) for a, b in lines[1:]]


def cmd_hard(big_n: int, r: int, t: int, k: int, seed: int, out: str, trials: int = 1,
             rs_path: str | None = None, graph_path: str | None = None,
             fmt: str = "csv") -> tuple[str, bool]:
    """Write ``trials`` instances and their player streams under ``out``; return the report.

    The RS graph comes from ``rs_path``, or is searched for in the graph of
    ``graph_path`` (default: the cycle on ``N`` vertices).
    """
    if trials < 1:
        raise ParameterError(f"trials: must be positive, got {trials}")
    if rs_path is not None:
        rs = read_rs_graph(rs_path)
    else:
        n_vertices, edges = _read_edges(graph_path) if graph_path else (big_n, _cycle(big_n))
        rs = find_rs_decomposition(n_vertices, edges, r, t)
        if rs is None:
            raise ParameterError(f"no ({r}, {t})-RS decomposition of the {n_vertices}-vertex base graph")
    os.makedirs(out, exist_ok=True)
    rows = []
    for i in range(trials):
        s = derive_seed(seed, i)
        inst = gen_hard(rs, k, s)
        write_instance(inst, Path(out) / f"instance_{i}.txt")
        for p, stream in enumerate(inst.player_streams()):
            write_stream(stream, Path(out) / f"instance_{i}_player_{p}.txt")
        rep = check_trivial_ratio(inst)
        rows.append({
            "schema_version": SCHEMA_VERSION, "instance": i, "seed": s, "k": k, "n": inst.n,
            "N": rs.n_vertices, "r": rs.r, "t": rs.t, "max_matching": rep.max_matching,
            "max_trivial": rep.max_trivial, "good_vertices": rep.good_vertices, "alpha": rep.alpha,
            "epsilon": rep.epsilon, "bound": rep.bound, "ratio": rep.ratio, "ok": rep.ok,
        })
    passed = all(row["ok"] for row in rows)
    if fmt == "csv":
        text = _csv_text(HARD_FIELDS, rows)
    else:
        text = _json_text({"schema_version": SCHEMA_VERSION, "command": "hard", "instances": rows,
                           "passed": passed})
    Path(out, f"report.{fmt}").write_text(text, encoding="utf-8")
    return text, passed


# entry point ---------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=64, help="vertices per side")
    p.add_argument("--epsilon", type=_number, default=1 / 3, help="exponent in (0, 1/2], e.g. 1/3")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="planted-matching trials")
    _common(run)
    run.add_argument("--opt-hat", choices=("known", "guess"), default="guess")
    run.add_argument("--planted", type=int, default=None, help="planted matching size (default n)")
    run.add_argument("--noise", type=int, default=0)
    run.add_argument("--churn", type=int, default=0)
    run.add_argument("--players", type=int, default=1)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--constant", type=float, default=APPROX_CONSTANT,
                     help="C in the asserted ratio bound opt/extracted <= C n^eps")
    run.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identical output)")

    diag = sub.add_parser("diagnose", help="Monte Carlo diagnostics")
    _common(diag)
    diag.add_argument("name", nargs="?", choices=sorted(DIAGNOSTICS))
    diag.add_argument("--diagnose", dest="name_flag", choices=sorted(DIAGNOSTICS))
    diag.add_argument("--support", type=int, default=64)
    diag.add_argument("--domain", type=int, default=1 << 16)
    diag.add_argument("--delta", type=_number, default=2.0 ** -10)

    hard = sub.add_parser("hard", help="hard instances and the trivial-matching ratio")
    hard.add_argument("--N", dest="big_n", type=int, default=6, help="RS graph vertex count")
    hard.add_argument("--r", type=int, default=2)
    hard.add_argument("--t", type=int, default=3)
    hard.add_argument("--k", "--players", dest="k", type=int, default=2)
    hard.add_argument("--seed", type=int, default=0)
    hard.add_argument("--trials", type=int, default=1, help="number of instances")
    hard.add_argument("--rs", dest="rs_path", default=None, help="RS graph file")
    hard.add_argument("--graph", dest="graph_path", default=None, help="base graph to decompose")
    hard.add_argument("--out", required=True, help="output directory")
    hard.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    trials = 1 if getattr(args, "trials", None) is None else args.trials
    try:
        if args.command == "run":
            cfg = ExperimentConfig("run", args.n, args.epsilon, trials, args.seed,
                                   args.opt_hat, args.out, args.format)
            text, passed = cmd_run(cfg, args.planted, args.noise, args.churn, args.players,
                                   args.workers, args.timing, args.constant)
            _emit(text, args.out)
        elif args.command == "diagnose":
            name = args.name_flag or args.name
            if name is None:
                raise ParameterError("diagnose: name a diagnostic")
            cfg = ExperimentConfig("diagnose", args.n, args.epsilon, trials, args.seed,
                                   "guess", args.out, args.format)
            text, passed = cmd_diagnose(name, cfg, args.trials, args.support, args.domain, args.delta)
            _emit(text, args.out)
        else:
            text, passed = cmd_hard(args.big_n, args.r, args.t, args.k, args.seed, args.out,
                                    args.trials, args.rs_path, args.graph_path, args.format)
            sys.stdout.write(text)
    except (ValueError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
