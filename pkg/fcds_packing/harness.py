"""Experiment commands: graph generation, single runs, seed sweeps and verification reports."""

import csv
import io
import json
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .config import GENERATORS, ConfigError, RunConfig, load_graph_source
from .congest_sim import ProtocolError
from .fcds_protocol import PreconditionError, ProtocolParams, RunResult, run_full
from .graph_core import Graph, GraphStats, graph_stats, load_graph, save_graph
from .oracle_verifier import (
    LEVEL_FULL,
    VerificationError,
    VerifierReport,
    check_domination,
    verify_packing,
    verify_run,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "seed",
    "rounds_total",
    "rounds_component_id",
    "rounds_helper",
    "rounds_matching",
    "valid_cds_count",
    "domination_all",
    "initial_M",
    "final_M",
)


def cmd_generate(kind: str, args: Sequence[str], out: Union[str, Path]) -> GraphStats:
    """
    Write a generated graph, or a validated copy of a graph file, to out.

    Args:
        kind: "harary", "ringclique", "complete" or "file".
        args: Generator integers, or the source path for "file".

    Raises:
        ConfigError: unknown kind or wrong argument count.
        GraphParameterError: invalid generator arguments.
        GraphFormatError: the source file is malformed.
    """
    if kind == "file":
        if len(args) != 1:
            raise ConfigError("generate file takes exactly one source path")
        graph = load_graph(args[0])
        shutil.copyfile(args[0], out)
        return graph_stats(graph)

    if kind not in GENERATORS:
        raise ConfigError(f"Unknown generator {kind!r}; expected one of {', '.join(sorted(GENERATORS))}, file")

    arity, generator = GENERATORS[kind]
    if len(args) != arity:
        raise ConfigError(f"generate {kind} takes {arity} integer argument(s), got {len(args)}")
    try:
        values = [int(a) for a in args]
    except ValueError:
        raise ConfigError(f"generate {kind} arguments must be integers, got {' '.join(args)}")

    graph = generator(*values)
    save_graph(graph, out)
    return graph_stats(graph)


def protocol_params(config: RunConfig, graph: Graph, seed: int,
                    stats: Optional[GraphStats] = None) -> ProtocolParams:
    kappa = stats.vertex_connectivity if stats is not None else None
    return ProtocolParams.for_graph(graph, seed=seed, t=config.t, lmul=config.lmul, kappa=kappa)


@dataclass
class RunOutcome:
    graph_stats: GraphStats
    result: RunResult
    verification: VerifierReport

    @property
    def ok(self) -> bool:
        return self.verification.ok


def execute(config: RunConfig, level: Optional[str] = None) -> RunOutcome:
    """Load the graph, run the protocol once and verify the run."""
    graph = load_graph_source(config.graph)
    stats = graph_stats(graph)
    params = protocol_params(config, graph, config.seed, stats)
    result = run_full(graph, params, keep_artifacts=True)
    verification = verify_run(
        result,
        level=level or config.verify_level,
        exact_matching_cap=config.exact_matching_cap,
        max_paths_cap=config.max_disjoint_paths_cap,
    )
    return RunOutcome(stats, result, verification)


def build_report(config: RunConfig, outcome: RunOutcome) -> Dict[str, object]:
    result = outcome.result
    verification = outcome.verification
    return {
        "schema_version": SCHEMA_VERSION,
        "config": dict(config.as_dict(), **{"params": result.params.as_dict()}),
        "graph_stats": outcome.graph_stats.as_dict(),
        "rounds": result.report.as_dict(),
        "ml_trajectory": result.trajectory.as_dict(),
        "verification": verification.as_dict(),
        "packing": {
            "valid_cds_count": verification.valid_cds_count,
            "packing_size": str(verification.packing_size),
            "valid": verification.packing_valid,
            "truncated": result.truncated,
            **result.packing.as_dict(),
        },
    }


def render_report(report: Dict[str, object]) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def cmd_run(config: RunConfig, level: Optional[str] = None) -> Tuple[RunOutcome, str]:
    """
    Run once and emit the JSON report to config.out when set.

    Returns:
        The outcome and the rendered report text.
    """
    outcome = execute(config, level)
    text = render_report(build_report(config, outcome))
    if config.out:
        Path(config.out).write_text(text, encoding="utf-8")
    return outcome, text


def cmd_verify(config: RunConfig) -> Tuple[RunOutcome, str]:
    """cmd_run at the full oracle level."""
    return cmd_run(config, level=LEVEL_FULL)


@dataclass
class SweepRow:
    values: Dict[str, object]
    violations: List[str]


@dataclass
class SweepOutcome:
    rows: List[Dict[str, object]]
    text: str
    violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def sweep_row(graph: Graph, config: RunConfig, kappa: int, seed: int) -> SweepRow:
    """
    One CSV row with the structural violations of its seed.

    A seed whose run raises a protocol or verification error keeps a row
    holding only its seed and records the error as a violation.
    """
    try:
        params = ProtocolParams.for_graph(graph, seed=seed, t=config.t, lmul=config.lmul, kappa=kappa)
        result = run_full(graph, params)
        vg = result.virtual_graph
        packing = verify_packing(result.packing, vg, result.assignment)
    except (ProtocolError, VerificationError) as e:
        logger.warning("Seed %d failed: %s", seed, e)
        return SweepRow({"seed": seed}, [f"seed {seed}: {type(e).__name__}: {e}"])

    violations = [f"seed {seed}: {problem}" for problem in packing.problems]
    phases = result.report.rounds_per_phase
    domination_all = all(
        check_domination(vg, result.assignment, class_id) for class_id in range(1, params.t + 1)
    )
    values = {
        "seed": seed,
        "rounds_total": result.report.rounds_total,
        "rounds_component_id": phases.get("component_id", 0) + phases.get("final_components", 0),
        "rounds_helper": phases.get("helper", 0),
        "rounds_matching": phases.get("matching", 0),
        "valid_cds_count": packing.valid_cds_count,
        "domination_all": int(domination_all),
        "initial_M": result.trajectory.initial_total,
        "final_M": result.trajectory.final_total,
    }
    return SweepRow(values, violations)


def _sweep_worker(task: Tuple[Graph, RunConfig, int, int]) -> SweepRow:
    return sweep_row(*task)


def cmd_sweep(config: RunConfig) -> SweepOutcome:
    """
    Run seeds seed .. seed+seeds-1, up to config.jobs in parallel.

    Rows are ordered by seed. The graph is loaded before any seed runs, so
    an unusable graph raises and no CSV is written. Failing seeds do not
    stop the sweep; their violations are collected in the outcome.
    """
    graph = load_graph_source(config.graph)
    kappa = graph_stats(graph).vertex_connectivity
    if kappa < 1:
        raise PreconditionError("Protocol needs a connected graph with at least two nodes (κ ≥ 1)")
    seeds = range(config.seed, config.seed + config.seeds)
    tasks = [(graph, config, kappa, seed) for seed in seeds]

    if config.jobs == 1:
        results = [_sweep_worker(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))

    results.sort(key=lambda row: row.values["seed"])
    rows = [row.values for row in results]
    violations = [violation for row in results for violation in row.violations]

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = buffer.getvalue()

    if config.out:
        Path(config.out).write_text(text, encoding="utf-8")
    return SweepOutcome(rows, text, violations)
