"""Command-line front end: ``meshbal run`` and ``meshbal sweep``.

Exit codes: 0 success, 1 usage error, 2 scenario error, 3 runtime error.
"""

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import __version__
from .builtin import BUILTINS, SWEEP_KEYWORDS, builtin_scenario
from .engine import run
from .errors import (
    MeshbalError,
    ScenarioSyntaxError,
    UnknownScenario,
    ValidationError,
)
from .report import ReportRow, csv_text, summary_text
from .scenario import dump_defaults, parse_scenario, policy_from_label, validate

EXIT_USAGE = 1
EXIT_SCENARIO = 2
EXIT_RUNTIME = 3

SWEEP_VARS = sorted(SWEEP_KEYWORDS) + ["policy"]


class UsageError(Exception):
    pass


class ScenarioFileError(MeshbalError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="meshbal", description="Deterministic 802.11 mesh association simulator.")
    p.add_argument("--version", action="version", version=f"meshbal {__version__}")
    p.add_argument("--dump-defaults", action="store_true",
                   help="print a scenario file with every default and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, help_text in (("run", "simulate one scenario"),
                            ("sweep", "simulate a scenario over a range of values")):
        sp = sub.add_parser(name, help=help_text)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--scenario", metavar="PATH", help="scenario file")
        src.add_argument("--builtin", metavar="NAME", choices=sorted(BUILTINS),
                         help="generated scenario: " + ", ".join(sorted(BUILTINS)))
        sp.add_argument("--policies", metavar="LIST",
                        help="comma-separated labels, e.g. rssi,airtime+coop,crosslayer+lb+coop")
        sp.add_argument("--reps", type=int, default=1, help="repetitions (seeds) per point")
        sp.add_argument("--seed", type=int, help="first seed (default: $MESHBAL_SEED or 1)")
        sp.add_argument("--out", metavar="PATH", help="CSV output (default: stdout)")
        sp.add_argument("--trace", metavar="PATH", help="event trace output")
        sp.add_argument("--baseline", default="rssi", help="policy for improvement percentages")
        sp.add_argument("--jobs", type=int, default=1, help="parallel runs")
        if name == "sweep":
            sp.add_argument("--var", required=True, choices=SWEEP_VARS)
            sp.add_argument("--values", required=True, metavar="LIST")
        sp.add_argument("--dump-defaults", action="store_true", help=argparse.SUPPRESS)
    return p


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MESHBAL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"MESHBAL_SEED must be an integer, got {env!r}") from None
    return None


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _number(text):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise UsageError(f"sweep value {text!r} is not a number") from None


def plan_runs(args):
    """Expand arguments into ``(sweep_var, value, policy_label, scenario)`` jobs."""
    if not args.scenario and not args.builtin:
        raise UsageError("one of --scenario or --builtin is required")
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    first_seed = _seed(args)
    base_text = None
    if args.scenario:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                base_text = fh.read()
        except OSError as exc:
            raise ScenarioFileError(f"cannot read {args.scenario}: {exc}") from None
        file_scenario = parse_scenario(base_text)
    var = getattr(args, "var", None)
    if var is None:
        var, values = "none", ["-"]
    elif var == "policy":
        values = _split(args.values)
    else:
        if args.scenario:
            raise UsageError(f"--var {var} needs --builtin; scenario files only sweep policy")
        values = [_number(v) for v in _split(args.values)]
    if not values:
        raise UsageError("--values is empty")

    jobs = []
    for value in values:
        for rep in range(args.reps):
            if args.scenario:
                seed = (file_scenario.seed if first_seed is None else first_seed) + rep
                scenario = validate(replace(file_scenario, seed=seed))
            else:
                seed = (1 if first_seed is None else first_seed) + rep
                kwargs = {}
                if var not in ("none", "policy"):
                    kwargs[SWEEP_KEYWORDS[var]] = value
                scenario = builtin_scenario(args.builtin, seed=seed, **kwargs)
            if var == "policy":
                labels = [value]
            elif args.policies:
                labels = _split(args.policies)
            else:
                labels = [scenario.policy.label]
            for label in labels:
                try:
                    policy = policy_from_label(label, scenario.policy)
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
                s = validate(replace(scenario, policy=policy))
                jobs.append((var, value, policy.label, s))
    return jobs


def _trace_path(base, index, total):
    if total == 1:
        return base
    root, ext = os.path.splitext(base)
    return f"{root}.{index}{ext}"


def _execute(job):
    var, value, label, scenario, trace_path = job
    if trace_path is None:
        metrics = run(scenario)
    else:
        with open(trace_path, "w", encoding="utf-8") as fh:
            metrics = run(scenario, trace=fh)
    return ReportRow.from_metrics(var, value, label, scenario.seed, metrics)


def execute(jobs, trace=None, workers=1):
    full = [(*job, None if trace is None else _trace_path(trace, i, len(jobs)))
            for i, job in enumerate(jobs)]
    if workers == 1 or len(full) == 1:
        return [_execute(j) for j in full]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute, full))


def write_atomic(path, text):
    """Write-then-rename so a reader never sees a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".meshbal-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.dump_defaults:
            sys.stdout.write(dump_defaults())
            return 0
        if args.command is None:
            raise UsageError(parser.format_usage() + "meshbal: error: a command is required")
        jobs = plan_runs(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioSyntaxError, ValidationError, UnknownScenario, ScenarioFileError) as exc:
        print(f"meshbal: scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO

    try:
        rows = execute(jobs, args.trace, args.jobs)
        text = csv_text(rows)
        summary = summary_text(rows, args.baseline)
        if args.out:
            write_atomic(args.out, text)
            sys.stdout.write(summary)
        else:
            sys.stdout.write(text)
            sys.stderr.write(summary)
    except (MeshbalError, OSError) as exc:
        print(f"meshbal: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
