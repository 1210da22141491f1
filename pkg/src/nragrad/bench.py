"""Instance harness: run the searcher over a directory and report CSV rows.

``solve_problem`` glues frontend, engine and verifier together for one
instance and is shared by the CLI.  A ``sat`` status always means one of
the sound verification outcomes was recorded, never just a low loss.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .engine import Candidate, SearchConfig, SearchOutcome, SearchStatus, search
from .errors import NragradError, ProtocolError, SpawnFailure
from .parser import ParsedProblem, parse_script
from .verify import (
    ExternalSat,
    NeedsExternal,
    SatByIVT,
    SignPairProblem,
    VerificationOutcome,
    VerificationPath,
    Verified,
    check_exact,
    check_sign_pair,
    classify,
    emit_bounded_query,
    interval_transform,
    run_external,
)

CSV_COLUMNS = [
    "instance",
    "mode",
    "status",
    "wall_ms",
    "iterations",
    "rounds",
    "batch_size",
    "epsilon",
    "seed",
]

DEFAULT_DELTA = Fraction(1, 1000)


@dataclass
class SolveResult:
    status: str  # "sat" | "unknown"
    mode_used: str  # "direct" | "interval"
    outcome: VerificationOutcome | None
    candidate: Candidate | None
    search_outcome: SearchOutcome | None
    sign_pair: SignPairProblem | None = None
    problem: ParsedProblem | None = None


def solve_problem(
    problem: ParsedProblem,
    cfg: SearchConfig,
    mode: str = "direct",
    verify_cmd: str | None = None,
    delta: Fraction = DEFAULT_DELTA,
    external_timeout: float = 60.0,
    on_progress: Callable[[dict], None] | None = None,
) -> SolveResult:
    """Search for a model and return a soundly verified result.

    ``mode="interval"`` applies the sign-pair transformation when the
    problem shape allows it and otherwise falls back to a direct search.
    Candidates that fail verification restart their sample; the search
    runs until verification succeeds or the budget is spent.
    """
    if mode not in ("direct", "interval"):
        raise ValueError(f"unknown mode {mode!r}")
    path = classify(problem)
    sign_pair: SignPairProblem | None = None
    if mode == "interval" and path is VerificationPath.SIGN_PAIR_ELIGIBLE:
        sign_pair = interval_transform(problem)
        target = sign_pair.problem
        mode_used = "interval"
    else:
        target = problem
        mode_used = "direct"

    verified: dict[str, object] = {}

    def on_candidate(cand: Candidate) -> bool:
        outcome: VerificationOutcome
        if sign_pair is not None:
            outcome = check_sign_pair(cand.assignment, sign_pair)
            ok = isinstance(outcome, SatByIVT)
        elif path is VerificationPath.EXACT_INEQUALITY:
            outcome = check_exact(cand.assignment, problem.formula)
            ok = isinstance(outcome, Verified)
        else:
            query = emit_bounded_query(problem, cand.assignment, delta)
            if verify_cmd is None:
                # No way to confirm an equality candidate soundly; keep
                # searching so the caller ends with "unknown", not a guess.
                verified.setdefault("unconfirmed", NeedsExternal(query))
                return False
            outcome = run_external(verify_cmd, query, timeout=external_timeout)
            ok = isinstance(outcome, ExternalSat)
        if ok:
            verified["outcome"] = outcome
            verified["candidate"] = cand
        return ok

    search_outcome = search(target, cfg, on_candidate=on_candidate, on_progress=on_progress)
    if search_outcome.status is SearchStatus.CANDIDATE_FOUND and "outcome" in verified:
        return SolveResult(
            status="sat",
            mode_used=mode_used,
            outcome=verified["outcome"],  # type: ignore[arg-type]
            candidate=verified["candidate"],  # type: ignore[arg-type]
            search_outcome=search_outcome,
            sign_pair=sign_pair,
            problem=problem,
        )
    return SolveResult(
        status="unknown",
        mode_used=mode_used,
        outcome=verified.get("unconfirmed"),  # type: ignore[arg-type]
        candidate=None,
        search_outcome=search_outcome,
        sign_pair=sign_pair,
        problem=problem,
    )


@dataclass
class BenchRecord:
    instance: str
    mode: str
    status: str  # "sat" | "unknown" | "error"
    wall_ms: int
    iterations: int
    rounds: int
    batch_size: int
    epsilon: float
    seed: int
    # not part of the CSV schema:
    result: SolveResult | None = field(default=None, repr=False)
    error: str = field(default="", repr=False)

    def csv_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def _run_instance(
    path: Path,
    cfg: SearchConfig,
    mode: str,
    verify_cmd: str | None,
    delta: Fraction,
    external_timeout: float,
) -> BenchRecord:
    start = time.monotonic()

    def record(status: str, result: SolveResult | None = None, error: str = "") -> BenchRecord:
        wall_ms = max(1, int((time.monotonic() - start) * 1000))
        so = result.search_outcome if result is not None else None
        return BenchRecord(
            instance=str(path),
            mode=result.mode_used if result is not None else mode,
            status=status,
            wall_ms=wall_ms,
            iterations=so.stats.iterations if so else 0,
            rounds=so.stats.rounds if so else 0,
            batch_size=cfg.batch_size,
            epsilon=cfg.epsilon,
            seed=cfg.seed,
            result=result,
            error=error,
        )

    try:
        problem = parse_script(path.read_text(encoding="utf-8"))
        result = solve_problem(
            problem,
            cfg,
            mode=mode,
            verify_cmd=verify_cmd,
            delta=delta,
            external_timeout=external_timeout,
        )
        return record(result.status, result)
    except (NragradError, SpawnFailure, ProtocolError, OSError, ValueError) as e:
        return record("error", error=f"{type(e).__name__}: {e}")


def run_bench(
    directory: str | Path,
    cfg: SearchConfig,
    mode: str = "direct",
    csv_out: str | Path | None = None,
    verify_cmd: str | None = None,
    delta: Fraction = DEFAULT_DELTA,
    external_timeout: float = 60.0,
    jobs: int = 1,
) -> list[BenchRecord]:
    """Solve every ``*.smt2`` file in a directory; one CSV row each.

    Instance failures are isolated into error rows, the run continues.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"not a readable directory: {directory}")
    paths = sorted(directory.glob("*.smt2"))

    def work(p: Path) -> BenchRecord:
        return _run_instance(p, cfg, mode, verify_cmd, delta, external_timeout)

    if jobs > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(work, paths))
    else:
        records = [work(p) for p in paths]

    if csv_out is not None:
        write_csv(records, csv_out)
    return records


def write_csv(records: list[BenchRecord], csv_out: str | Path) -> None:
    with open(csv_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.csv_row())
