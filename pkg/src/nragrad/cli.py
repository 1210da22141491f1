"""Command-line interface.

Subcommands: ``solve FILE``, ``gen-mbo``, ``gen-kissing``, ``bench DIR``.
Every flag can also be set through an environment variable with the
``NRAGRAD_`` prefix (explicit flags win), e.g. ``NRAGRAD_BATCH=2000``.

Exit codes: 0 sat/success, 1 unknown, 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

from .bench import DEFAULT_DELTA, SolveResult, run_bench, solve_problem, write_csv
from .engine import SearchConfig
from .errors import SmtParseError
from .generators import KissingConfig, MboGenConfig, gen_kissing, gen_mbo
from .parser import format_fraction, parse_script
from .verify import ExternalSat, SatByIVT, Verified

ENV_PREFIX = "NRAGRAD_"

EXIT_SAT = 0
EXIT_UNKNOWN = 1
EXIT_USAGE = 2


def _env_default(name: str, fallback=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), fallback)


def parse_duration(text: str) -> float:
    """Seconds from '90', '90s', '10m' or '1h'."""
    m = re.fullmatch(r"\s*([0-9.]+)\s*([smh]?)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration: {text!r}")
    value = float(m.group(1))
    return value * {"": 1.0, "s": 1.0, "m": 60.0, "h": 3600.0}[m.group(2)]


def _add_search_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--batch", type=int, default=_env_default("batch", 10_000))
    sp.add_argument("--lr", type=float, default=_env_default("lr", 1e-3))
    sp.add_argument("--epsilon", type=float, default=_env_default("epsilon", 1e-4))
    sp.add_argument(
        "--timeout", type=parse_duration, default=_env_default("timeout", "600s")
    )
    sp.add_argument("--seed", type=int, default=_env_default("seed", 0))
    sp.add_argument(
        "--mode", choices=("direct", "interval"), default=_env_default("mode", "direct")
    )
    sp.add_argument("--verify-cmd", default=_env_default("verify_cmd"))
    sp.add_argument("--delta", type=Fraction, default=_env_default("delta", DEFAULT_DELTA))
    sp.add_argument("--deterministic", action="store_true", default=bool(_env_default("deterministic")))
    sp.add_argument("--tighten-box", action="store_true", default=bool(_env_default("tighten_box")))


def _config_from_args(args) -> SearchConfig:
    return SearchConfig(
        batch_size=int(args.batch),
        lr=float(args.lr),
        epsilon=float(args.epsilon),
        wall_timeout=float(args.timeout) if not isinstance(args.timeout, str) else parse_duration(args.timeout),
        seed=int(args.seed),
        deterministic=bool(args.deterministic),
        tighten_box_from_bounds=bool(args.tighten_box),
    )


def _print_model(result: SolveResult) -> None:
    outcome = result.outcome
    if isinstance(outcome, Verified):
        print("(model")
        for name, value in zip(result.problem.variables, outcome.model):
            print(f"  (define-fun {name} () Real {format_fraction(value)})")
        print(")")
    elif isinstance(outcome, SatByIVT):
        names = result.sign_pair.base.variables
        print("; root bracketing witnesses (negative side / positive side)")
        print("(model")
        for name, lo_v, hi_v in zip(names, outcome.lower_witness, outcome.upper_witness):
            print(f"  (define-fun {name}_under () Real {format_fraction(lo_v)})")
            print(f"  (define-fun {name}_over () Real {format_fraction(hi_v)})")
        print(")")
    elif isinstance(outcome, ExternalSat):
        if outcome.model_text:
            print(outcome.model_text)


def _cmd_solve(args) -> int:
    path = Path(args.file)
    try:
        problem = parse_script(path.read_text(encoding="utf-8"))
    except (OSError, SmtParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    cfg = _config_from_args(args)

    last = [0.0]

    def progress(ev: dict) -> None:
        now = time.monotonic()
        if now - last[0] >= 5.0:
            last[0] = now
            print(
                f"; round {ev['round']} iter {ev['iter']} "
                f"min-loss {ev['min_loss']:.3g} candidates {ev['emitted']}",
                file=sys.stderr,
            )

    result = solve_problem(
        problem,
        cfg,
        mode=args.mode,
        verify_cmd=args.verify_cmd,
        delta=Fraction(args.delta),
        on_progress=progress,
    )
    if result.status == "sat":
        print("sat")
        _print_model(result)
        return EXIT_SAT
    print("unknown")
    return EXIT_UNKNOWN


def _cmd_gen_mbo(args) -> int:
    cfg = MboGenConfig(
        products=args.products,
        degree=args.degree,
        j2_prob=args.j2_prob,
        coeff_lo=args.coeff_lo,
        coeff_hi=args.coeff_hi,
        neg_prob=args.neg_prob,
        seed=int(args.seed),
        exp_scheme=args.exp_scheme,
    )
    text = gen_mbo(cfg)
    _write_out(args.out, text)
    return EXIT_SAT


def _cmd_gen_kissing(args) -> int:
    text = gen_kissing(KissingConfig(points=args.points, dims=args.dims))
    _write_out(args.out, text)
    return EXIT_SAT


def _write_out(out: str | None, text: str) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    try:
        records = run_bench(
            args.dir,
            cfg,
            mode=args.mode,
            csv_out=None,
            verify_cmd=args.verify_cmd,
            delta=Fraction(args.delta),
            jobs=int(args.jobs),
        )
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    csv_path = args.csv or "bench.csv"
    write_csv(records, csv_path)
    sat = sum(1 for r in records if r.status == "sat")
    print(f"{sat}/{len(records)} sat -> {csv_path}")
    return EXIT_SAT


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nragrad", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="search one instance and verify the result")
    solve.add_argument("file")
    _add_search_flags(solve)
    solve.set_defaults(fn=_cmd_solve)

    mbo = sub.add_parser("gen-mbo", help="generate a random sum-of-products instance")
    mbo.add_argument("--products", type=int, required=True)
    mbo.add_argument("--degree", type=int, required=True)
    mbo.add_argument("--j2-prob", type=float, default=0.4)
    mbo.add_argument("--coeff-lo", type=int, default=1)
    mbo.add_argument("--coeff-hi", type=int, default=20)
    mbo.add_argument("--neg-prob", type=float, default=0.2)
    mbo.add_argument("--seed", type=int, default=_env_default("seed", 0))
    mbo.add_argument(
        "--exp-scheme",
        choices=("multinomial", "composition"),
        default=_env_default("exp_scheme", "multinomial"),
    )
    mbo.add_argument("--out")
    mbo.set_defaults(fn=_cmd_gen_mbo)

    kiss = sub.add_parser("gen-kissing", help="generate a sphere point-placement instance")
    kiss.add_argument("--points", type=int, required=True)
    kiss.add_argument("--dims", type=int, required=True)
    kiss.add_argument("--out")
    kiss.set_defaults(fn=_cmd_gen_kissing)

    bench = sub.add_parser("bench", help="run every instance in a directory")
    bench.add_argument("dir")
    _add_search_flags(bench)
    bench.add_argument("--jobs", type=int, default=_env_default("jobs", 1))
    bench.add_argument("--csv", default=_env_default("csv"))
    bench.set_defaults(fn=_cmd_bench)

    return ap


def cli_main(argv: list[str] | None = None) -> int:
    ap = build_arg_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    return args.fn(args)


def main() -> None:
    sys.exit(cli_main())
