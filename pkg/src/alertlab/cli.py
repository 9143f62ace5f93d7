"""``alertlab`` command line.

Exit codes: 0 success, 1 validation/parse error, 2 runtime error,
3 an ``--assert`` expression did not hold.
"""

from __future__ import annotations

import argparse
import json
import logging
import operator
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import yaml

from . import experiment, rulelang, sim
from .errors import AlertLabError, ParseError, PipelineError, ScheduleOverlap, ValidationError
from .matcher import GRANULARITIES, UNDEFINED, MatchPolicy
from .timeseries import load_series_csv

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_ASSERT = 0, 1, 2, 3

ASSERT_METRICS = ("recall", "precision", "episodes", "median_ttd", "patterns_detected")
_CMP = {">=": operator.ge, "<=": operator.le, "==": operator.eq, "!=": operator.ne,
        ">": operator.gt, "<": operator.lt}
_TERM = r"([A-Za-z_]+)\s*\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*\)"
_NUM = r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?"
_ASSERT_RE = re.compile(rf"^\s*{_TERM}\s*(>=|<=|==|!=|>|<)\s*(?:{_TERM}|({_NUM}))\s*$")


class UsageError(AlertLabError):
    pass


# -- assertions --------------------------------------------------------------

def parse_assertion(text: str) -> tuple:
    """``metric(rule) CMP number`` or ``metric(rule) CMP metric(rule)``."""
    m = _ASSERT_RE.match(text)
    if not m:
        raise UsageError(f"cannot parse assertion {text!r}; expected e.g. 'recall(HighErrorRate) >= 0.8'")
    lm, lr, cmp, rm, rr, num = m.groups()
    for metric in (lm, rm):
        if metric is not None and metric not in ASSERT_METRICS:
            raise UsageError(f"unknown metric {metric!r} in {text!r} (known: {', '.join(ASSERT_METRICS)})")
    right = (rm, rr) if rm else float(num)
    return (lm, lr), cmp, right


def check_assertions(assertions: Sequence[str], reports: dict[str, dict]) -> list[tuple[str, bool, str]]:
    """Evaluate assertions against report dicts; ``(text, held, detail)`` per assertion.

    Raises :class:`UsageError` for unknown rules or metrics. A comparison
    involving an undefined value does not hold.
    """
    parsed = [(a, *parse_assertion(a)) for a in assertions]

    def lookup(term):
        metric, rule = term
        if rule not in reports:
            raise UsageError(f"unknown rule {rule!r} (known: {', '.join(reports)})")
        return reports[rule][metric]

    results = []
    for text, left, cmp, right in parsed:
        lv = lookup(left)
        rv = lookup(right) if isinstance(right, tuple) else right
        held = lv != UNDEFINED and rv != UNDEFINED and _CMP[cmp](lv, rv)
        detail = f"{left[0]}({left[1]}) = {_fmt(lv)}"
        if isinstance(right, tuple):
            detail += f", {right[0]}({right[1]}) = {_fmt(rv)}"
        results.append((text, held, detail))
    return results


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}".rstrip("0").rstrip(".") if v != int(v) else str(int(v))
    return str(v)


# -- output helpers ------------------------------------------------------------

def summary_table(reports: dict[str, dict]) -> str:
    header = ("rule", "detected", "episodes", "fp", "median_ttd", "precision", "recall")
    rows = [header]
    for name, r in reports.items():
        rows.append((name, f"{r['patterns_detected']}/{r['fault_units']}", str(r["episodes"]), str(r["fp"]),
                     _fmt(r["median_ttd"]), _fmt(r["precision"]), _fmt(r["recall"])))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _report_assertions(assertions, reports, out) -> int:
    if not assertions:
        return EXIT_OK
    failed = 0
    for text, held, detail in check_assertions(assertions, reports):
        print(f"{'PASS' if held else 'FAIL'}  {text}  ({detail})", file=out)
        failed += not held
    return EXIT_ASSERT if failed else EXIT_OK


def _policy_from_args(args, base: MatchPolicy | None = None) -> MatchPolicy:
    policy = base or MatchPolicy()
    changes = {k: getattr(args, k) for k in ("grace_after_end", "grace_before_start", "granularity",
                                             "pattern_merge_gap") if getattr(args, k, None) is not None}
    try:
        return replace(policy, **changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _dicts(result) -> dict[str, dict]:
    return {name: rep.to_dict() for name, rep in result.reports.items()}


# -- subcommands -------------------------------------------------------------

def cmd_run(args) -> int:
    spec = experiment.load_spec(args.spec)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    spec = experiment.apply_overrides(spec, overrides) if overrides else spec
    spec = replace(spec, policy=_policy_from_args(args, spec.policy))
    if args.assertions:
        for a in args.assertions:
            parse_assertion(a)
    result = experiment.run_experiment(spec)
    experiment.emit_outputs(result, args.out)
    reports = _dicts(result)
    print(f"{spec.name}: seed {spec.seed}, {len(result.schedule)} fault windows, t_end {result.t_end}s, "
          f"outputs in {args.out}")
    print(summary_table(reports))
    return _report_assertions(args.assertions, reports, sys.stdout)


def cmd_replay(args) -> int:
    series = {}
    for p in args.series:
        s = load_series_csv(p)
        series[s.name] = s
    schedule = sim.load_fault_schedule_csv(args.schedule)
    rules_path = Path(args.rules)
    try:
        rules_text = rules_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read rules: {exc.strerror or exc}", str(rules_path)) from exc
    rules = _parse_rules_file(rules_text, str(rules_path))
    policy = _policy_from_args(args)
    if args.assertions:
        for a in args.assertions:
            parse_assertion(a)
    t_end = max((int(s.timestamps[-1]) for s in series.values() if len(s)), default=0)
    episodes, reports = experiment.evaluate_and_classify(rules, series, schedule, policy, t_end)
    spec = experiment.ExperimentSpec(name=rules_path.stem, rules=tuple(rulelang.format_rule(r) for r in rules),
                                     policy=policy, mode="replay",
                                     replay_series=tuple(str(p) for p in args.series),
                                     replay_schedule=str(args.schedule))
    result = experiment.RunResult(spec, spec.digest, series, schedule, episodes, reports, t_end)
    if args.out:
        experiment.emit_outputs(result, args.out)
    out = _dicts(result)
    print(summary_table(out))
    return _report_assertions(args.assertions, out, sys.stdout)


def cmd_batch(args) -> int:
    spec = experiment.load_spec(args.spec)
    variations: list[dict] = []
    if args.variations:
        try:
            variations = yaml.safe_load(Path(args.variations).read_text(encoding="utf-8")) or []
        except OSError as exc:
            raise ParseError(f"cannot read variations: {exc.strerror or exc}", args.variations) from exc
        except yaml.YAMLError as exc:
            raise ParseError(f"invalid YAML: {exc}", args.variations) from exc
        if not isinstance(variations, list) or not all(isinstance(v, dict) for v in variations):
            raise ParseError("variations file must be a list of mappings", args.variations)
    variations += [{} for _ in range(args.seeds or 0)]
    results = experiment.run_batch(spec, variations, parallelism=args.parallelism)
    failures = 0
    out = Path(args.out)
    for i, res in enumerate(results):
        print(f"== variation {i}: {json.dumps(variations[i], sort_keys=True)}")
        if isinstance(res, experiment.VariationFailure):
            failures += 1
            print(f"   FAILED: {res.error}")
            continue
        experiment.emit_outputs(res, out / f"var-{i:03d}")
        print(f"   seed {res.spec.seed}")
        print("   " + summary_table(_dicts(res)).replace("\n", "\n   "))
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_lint(args) -> int:
    path = Path(args.file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read rules: {exc.strerror or exc}", str(path)) from exc
    diags = rulelang.lint_text(text)
    for d in diags:
        print(f"{path}:{d}")
    errors = sum(d.severity == "error" for d in diags)
    if not diags:
        print(f"{path}: {len(rulelang.split_documents(text))} rule(s), no problems")
    return EXIT_INVALID if errors else EXIT_OK


def cmd_report(args) -> int:
    meta, reports = experiment.load_reports(args.out_dir)
    print(f"{meta.get('spec_name')}: seed {meta.get('seed')}, digest {str(meta.get('spec_digest'))[:12]}")
    print(summary_table(reports))
    return _report_assertions(args.assertions, reports, sys.stdout)


def _parse_rules_file(text: str, source: str) -> list:
    diags = [d for d in rulelang.lint_text(text) if d.severity == "error"]
    if diags:
        raise ParseError("; ".join(str(d) for d in diags), source)
    return rulelang.parse_rules(text)


# -- argument parsing ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which here means a runtime failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_policy_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("detection policy")
    g.add_argument("--grace-after-end", type=int, metavar="SECONDS",
                   help="firings up to this long after a fault unit ends still count (default 30)")
    g.add_argument("--grace-before-start", type=int, metavar="SECONDS",
                   help="firings up to this long before a fault unit starts count (default 0)")
    g.add_argument("--granularity", choices=GRANULARITIES, help="score per phase or per merged pattern")
    g.add_argument("--pattern-merge-gap", type=int, metavar="SECONDS",
                   help="phases closer than this merge into one pattern (default 120)")


def _add_assert_flag(p: argparse.ArgumentParser):
    p.add_argument("--assert", dest="assertions", action="append", default=[], metavar="EXPR",
                   help="e.g. 'recall(Base90) >= 0.8' or 'episodes(For60) < episodes(Base90)'; "
                        f"metrics: {', '.join(ASSERT_METRICS)}; repeatable; exit 3 if any fails")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alertlab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate an experiment spec, evaluate and score its rules")
    p.add_argument("spec", help="experiment spec (YAML)")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the spec seed")
    _add_policy_flags(p)
    _add_assert_flag(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run a spec under several parameter overrides")
    p.add_argument("spec")
    p.add_argument("-o", "--out", required=True, help="output directory (one var-NNN subdirectory per variation)")
    p.add_argument("--variations", help="YAML list of override mappings, e.g. [{seed: 3}, {rules.Base90.window: 120}]")
    p.add_argument("--seeds", type=int, default=0, help="append N seed-only variations (seed + index)")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("replay", help="evaluate rules against recorded series and a fault schedule")
    p.add_argument("--series", nargs="+", required=True, help="series CSV file(s)")
    p.add_argument("--schedule", required=True, help="fault schedule CSV")
    p.add_argument("--rules", required=True, help="rule file (documents separated by ---)")
    p.add_argument("-o", "--out", help="optional output directory")
    _add_policy_flags(p)
    _add_assert_flag(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("lint", help="check a rule file")
    p.add_argument("file")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("report", help="summarise an output directory and check assertions")
    p.add_argument("out_dir")
    _add_assert_flag(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "parallelism", 1) < 1:
            raise UsageError("--parallelism must be >= 1")
        return args.func(args)
    except (ValidationError, ParseError, ScheduleOverlap, UsageError) as exc:
        print(f"alertlab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineError as exc:
        code = EXIT_INVALID if isinstance(exc.cause, (ParseError, ScheduleOverlap, ValidationError)) else EXIT_RUNTIME
        print(f"alertlab: error: {exc}", file=sys.stderr)
        return code
    except (AlertLabError, ValueError, OSError) as exc:
        print(f"alertlab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
