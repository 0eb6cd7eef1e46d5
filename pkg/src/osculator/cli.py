"""Command line: ``osculator verify`` and ``osculator dump``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .expr import EvaluationError
from .report import dump, run
from .scenario import ScenarioError, bundled_names, load
from .submanifold import FrameBreakdownError, RankDeficiencyError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _resolve(path: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(path)
    if p.exists() or p.suffix:
        return p
    if path in bundled_names():
        from importlib import resources

        return Path(str(resources.files("osculator") / "scenarios" / f"{path}.json"))
    return p


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="osculator",
        description="Verify connection identities of submanifolds of second-order jet bundles.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the full check suite on a scenario")
    v.add_argument("scenario", help="scenario JSON file or bundled scenario name")
    v.add_argument("--tol", type=float, help="override every residual tolerance")
    v.add_argument("--seed", type=int, help="override the scenario seed")
    v.add_argument("--report", help="write the JSON report here (default: stdout)")
    v.add_argument("--trials", type=int, default=50, help="random fields per property check")
    v.add_argument("--quiet", action="store_true", help="suppress the summary on stderr")
    d = sub.add_parser("dump", help="print numeric objects at one sample point as JSON")
    d.add_argument("scenario")
    d.add_argument("--what", required=True, choices=("coefficients", "frames", "deflections"))
    d.add_argument("--point", type=int, default=0)
    sub.add_parser("list", help="list bundled scenarios")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(bundled_names()))
        return EXIT_OK
    try:
        sc = load(_resolve(args.scenario))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.command == "dump":
            out = dump(sc, args.what, args.point)
            print(json.dumps(out, sort_keys=True, indent=2))
            return EXIT_OK
        if args.trials < 1:
            print("error: --trials must be positive", file=sys.stderr)
            return EXIT_INPUT
        if args.seed is not None and args.seed < 0:
            print("error: --seed must be non-negative", file=sys.stderr)
            return EXIT_INPUT
        report = run(sc, tol=args.tol, seed=args.seed, trials=args.trials)
    except (IndexError, RankDeficiencyError, FrameBreakdownError, EvaluationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if not args.quiet:
        s = report.summary()
        print(
            f"{sc.name}: {s['pass']} pass, {s['fail']} fail, "
            f"{s['precondition-unmet']} precondition-unmet, {s['info']} info",
            file=sys.stderr,
        )
        for c in report.failed:
            print(f"  FAIL {c.id} point={c.point} i={c.i} residual={c.residual} tol={c.tol}", file=sys.stderr)
    return EXIT_FAIL if report.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
