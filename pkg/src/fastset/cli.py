"""``fastset`` command line: run scenarios, sweep seeds, check theorems, dump ASTs.

Exit codes: 0 when everything checked passes, 1 when an assertion fails
(the counterexample is written out), 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from . import oracle
from .scenario import ScenarioError, effective_seed, load_scenario, run as run_scenario
from .setl.ast import dump
from .setl.parser import ParseError, parse, parse_statements

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 as well; keep the message on stderr
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_seeds(text: str) -> List[int]:
    """``3``, ``0..9`` (inclusive) or ``1,4,7``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad seed range {text!r}") from None


def parse_bounds(text: Optional[str]) -> dict:
    out = {"A": 3, "B": 4, "len": 5, "samples": 300}
    if not text:
        return out
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in out or not value:
            raise UsageError(f"bad bound {part!r}; known bounds are {', '.join(out)}")
        try:
            out[key] = int(value)
        except ValueError:
            raise UsageError(f"bad bound {part!r}") from None
    return out


def _counterexample_path(args, name: str, seed: int) -> Path:
    if args.trace:
        return Path(args.trace)
    return Path(f"counterexample-{name}-seed{seed}.ndjson")


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = effective_seed(scenario, args.seed)
    t0 = time.perf_counter()
    result = run_scenario(scenario, seed)
    elapsed = time.perf_counter() - t0
    if args.trace and result.passed:
        result.trace.write(args.trace)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} {scenario.name} seed={seed} ({elapsed:.2f}s)")
    print(json.dumps(result.metrics(), sort_keys=True))
    if result.passed:
        return EXIT_OK
    for f in result.failures:
        print(f"  {f}", file=sys.stderr)
    path = _counterexample_path(args, scenario.name, seed)
    result.trace.write(path)
    print(f"counterexample trace written to {path}", file=sys.stderr)
    return EXIT_FAIL


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    seeds = parse_seeds(args.seeds)
    failed = []
    for seed in seeds:
        result = run_scenario(scenario, seed)
        if not result.passed:
            failed.append(seed)
            for f in result.failures:
                print(f"seed {seed}: {f}", file=sys.stderr)
            if args.trace_dir:
                out = Path(args.trace_dir) / f"{scenario.name}-seed{seed}.ndjson"
                out.parent.mkdir(parents=True, exist_ok=True)
                result.trace.write(out)
    print(f"{scenario.name}: {len(seeds) - len(failed)} passed, {len(failed)} failed"
          + (f" (seeds {failed})" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_theorems(args) -> int:
    b = parse_bounds(args.bounds)
    space = oracle.SmallStateSpace(A=b["A"], B=b["B"])
    ok = True
    alphabet = oracle.payment_alphabet(space)
    report = oracle.check_theorems(alphabet, space, samples=b["samples"], seed=args.seed)
    print("sampled theorems over the payment workload")
    print(report.render())
    ok &= report.ok
    t0 = time.perf_counter()
    ex = oracle.monotonicity_exhaustive(space, alphabet, max_len=b["len"])
    print(f"exhaustive monotonicity: {ex.lanes} lane tuples, {ex.cases} non-trivial cases, "
          f"{len(ex.counterexamples)} counterexamples ({time.perf_counter() - t0:.1f}s)")
    for c in ex.counterexamples:
        print(f"  counterexample: {c}", file=sys.stderr)
    if ex.rejected:
        print(f"  alphabet rejected: {ex.rejected}", file=sys.stderr)
    ok &= ex.ok
    print("OK" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_parse(args) -> int:
    source = Path(args.file).read_text()
    if args.statements or args.file.endswith(".stmts"):
        tree = [dump(s) for s in parse_statements(source)]
    else:
        tree = dump(parse(source))
    print(json.dumps(tree, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fastset", description="FastSet settlement simulator and checkers")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario and check its assertions")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--trace", help="write the NDJSON trace here")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over a seed range")
    s.add_argument("scenario")
    s.add_argument("--seeds", default="0..9", help="a..b inclusive, or a comma list")
    s.add_argument("--trace-dir", help="write traces of failing seeds here")
    s.set_defaults(fn=cmd_sweep)

    t = sub.add_parser("theorems", help="check determinism, monotonicity and liveness on a small state space")
    t.add_argument("--bounds", help="comma list of A=,B=,len=,samples=")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(fn=cmd_theorems)

    a = sub.add_parser("parse", help="dump the AST of a SETL file")
    a.add_argument("file")
    a.add_argument("--statements", action="store_true", help="parse a client statement list")
    a.set_defaults(fn=cmd_parse)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.fn(args)
    except UsageError as exc:
        print(f"fastset: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ParseError, FileNotFoundError) as exc:
        print(f"fastset: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
