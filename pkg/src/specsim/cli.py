"""Command-line front end.

    specsim PROGRAM.sir [--pattern P.json ...] [predictor/cache options]

Analyzes one SIR program for speculative cache leaks and prints a verdict.
Exit codes: 0 leakage-free, 1 findings, 2 undecided (a query overran its
budget or exploration was truncated), 3 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from . import sir
from .cache import CacheConfig
from .engine import Engine, RunResult
from .monitor import PatternError, load_pattern_file
from .predictor import PRESETS, PredictorConfig

EXIT_CLEAN = 0
EXIT_LEAK = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="specsim",
        description="Prediction-aware symbolic execution for speculative "
                    "cache-leak detection in SIR programs.")
    p.add_argument("program", help="SIR source file")
    p.add_argument("--pattern", action="append", default=[], metavar="FILE",
                   help="pattern JSON to monitor (repeatable)")
    p.add_argument("--mode", choices=("prediction-aware", "baseline", "both"),
                   default="prediction-aware")

    pred = p.add_argument_group("predictor")
    pred.add_argument("--preset", choices=sorted(PRESETS),
                      help="named processor model (overridden by explicit flags)")
    pred.add_argument("--pht-bits", type=int, default=None,
                      help="history bits of the two-level direction predictor")
    pred.add_argument("--pht-init-counter", type=int, default=None,
                      help="initial 2-bit counter value (default 2, weakly taken)")
    pred.add_argument("--btb-sets", type=int, default=None)
    pred.add_argument("--btb-ways", type=int, default=None)
    pred.add_argument("--btb-tag-bits", type=int, default=None)
    pred.add_argument("--btfnt", action="store_true",
                      help="backward-taken/forward-not-taken static fallback")
    pred.add_argument("--window", type=int, default=None,
                      help="speculation window in instructions (default 16)")

    cache = p.add_argument_group("cache")
    cache.add_argument("--cache-line", type=int, default=64)
    cache.add_argument("--cache-sets", type=int, default=64)
    cache.add_argument("--cache-ways", type=int, default=4)
    cache.add_argument("--granularity", choices=("line", "set"), default="line")

    p.add_argument("--bit-budget", type=int, default=20,
                   help="max symbolic bits per enumeration query")
    p.add_argument("--step-limit", type=int, default=200_000)
    p.add_argument("--report", metavar="FILE",
                   help="write findings as JSON")
    p.add_argument("--stats", metavar="FILE",
                   help="write exploration statistics as JSON")
    p.add_argument("--quiet", action="store_true",
                   help="suppress per-finding output")
    return p


def predictor_config(args) -> PredictorConfig:
    if args.preset:
        base = PRESETS[args.preset]
        fields = dict(pht_bits=base.pht_bits, btb_sets=base.btb_sets,
                      btb_ways=base.btb_ways, btb_tag_bits=base.btb_tag_bits,
                      window=base.window, fallback=base.fallback,
                      init_counter=base.init_counter,
                      preset_name=base.preset_name)
    else:
        fields = dict(pht_bits=None, btb_sets=None, btb_ways=1,
                      btb_tag_bits=4, window=16, fallback="none",
                      init_counter=2, preset_name=None)
    if args.pht_bits is not None:
        fields["pht_bits"] = args.pht_bits
    if args.pht_init_counter is not None:
        fields["init_counter"] = args.pht_init_counter
    if args.btb_sets is not None:
        fields["btb_sets"] = args.btb_sets
    if args.btb_ways is not None:
        fields["btb_ways"] = args.btb_ways
    if args.btb_tag_bits is not None:
        fields["btb_tag_bits"] = args.btb_tag_bits
    if args.btfnt:
        fields["fallback"] = "btfnt"
    if args.window is not None:
        fields["window"] = args.window
    return PredictorConfig(**fields)


def _stats_dict(result: RunResult) -> dict:
    st = result.stats
    return {
        "paths": st.paths,
        "arch_instructions": st.arch_instructions,
        "spec_instructions": st.spec_instructions,
        "spec_traces": st.spec_traces,
        "predictor_updates": st.predictor_updates,
        "solver_queries": st.solver_queries,
        "budget_exceeded": st.budget_exceeded,
        "step_limit_hit": st.step_limit_hit,
    }


def _common_traces(a: List[tuple], b: List[tuple]) -> int:
    """Multiset intersection size of two trace-identity lists."""
    from collections import Counter
    ca, cb = Counter(a), Counter(b)
    return sum(min(n, cb[k]) for k, n in ca.items())


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0

    try:
        with open(args.program, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        print(f"error: cannot read {args.program}: {e.strerror}", file=sys.stderr)
        return EXIT_USAGE
    try:
        program = sir.layout_regions(sir.parse_program(text),
                                     line_size=args.cache_line)
    except (sir.ParseError, sir.LayoutError) as e:
        print(f"error: {args.program}: {e}", file=sys.stderr)
        return EXIT_USAGE

    patterns = []
    for path in args.pattern:
        try:
            patterns.append(load_pattern_file(path))
        except OSError as e:
            print(f"error: cannot read {path}: {e.strerror}", file=sys.stderr)
            return EXIT_USAGE
        except PatternError as e:
            print(f"error: {path}: {e}", file=sys.stderr)
            return EXIT_USAGE

    try:
        predictor_cfg = predictor_config(args)
        cache_cfg = CacheConfig(line_size=args.cache_line, sets=args.cache_sets,
                                ways=args.cache_ways,
                                granularity=args.granularity)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    def make_engine() -> Engine:
        return Engine(program, predictor_cfg, cache_cfg, patterns,
                      bit_budget=args.bit_budget, step_limit=args.step_limit)

    results = {}
    if args.mode in ("prediction-aware", "both"):
        results["prediction-aware"] = make_engine().run()
    if args.mode in ("baseline", "both"):
        results["baseline"] = make_engine().run(baseline=True)
    primary = results.get("prediction-aware") or results["baseline"]

    for mode, result in results.items():
        label = f"[{mode}] " if len(results) > 1 else ""
        if not args.quiet:
            for f in result.findings:
                chain = " -> ".join(
                    f"{name}@{pc}{'*' if spec else ''}"
                    for pc, name, spec in f.chain)
                where = f.pattern or "engine"
                print(f"{label}{f.kind}: {where}: {chain} [{f.config}]")
            for d in result.diagnostics:
                print(f"{label}note: {d}")
        print(f"{label}verdict: {result.verdict} "
              f"({len(result.findings)} finding(s), "
              f"{result.stats.spec_traces} speculative trace(s))")

    if args.report:
        report = {
            mode: {
                "program": args.program,
                "verdict": result.verdict,
                "findings": [f.to_dict() for f in result.findings],
                "diagnostics": result.diagnostics,
            }
            for mode, result in results.items()
        }
        if len(report) == 1:
            report = next(iter(report.values()))
        with open(args.report, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")

    if args.stats:
        stats = {mode: _stats_dict(result) for mode, result in results.items()}
        if args.mode == "both":
            pl = results["prediction-aware"].stats.trace_identities
            nopl = results["baseline"].stats.trace_identities
            stats["spec_traces_pl"] = len(pl)
            stats["spec_traces_nopl"] = len(nopl)
            stats["common"] = _common_traces(pl, nopl)
        elif len(stats) == 1:
            stats = next(iter(stats.values()))
        with open(args.stats, "w", encoding="utf-8") as f:
            json.dump(stats, f, indent=2, sort_keys=True)
            f.write("\n")

    verdict = primary.verdict
    if verdict == "leak":
        return EXIT_LEAK
    if verdict == "unknown":
        return EXIT_UNKNOWN
    return EXIT_CLEAN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
