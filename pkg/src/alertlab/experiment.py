"""Experiment specs, single and batch runs, and output emission.

The spec file is YAML. Every section is optional except ``rules``; unknown
keys are rejected. See ``docs/spec-format.md`` for the field-by-field
schema.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from . import matcher, rulelang, sim
from .errors import AlertLabError, ParseError, PipelineError, ValidationError
from .evaluator import AlertEvent, episodes_to_csv, evaluate_all
from .matcher import DetectionReport, MatchPolicy
from .rulelang import AlertRule
from .sim import ErrorModel, FaultPatternSpec, FaultWindow, WorkloadSpec
from .timeseries import TimeSeries, format_value, load_series_csv, series_to_csv

log = logging.getLogger(__name__)

MODES = ("simulate", "replay")
SIMULATED_METRICS = ("errorRate", "requestRate")

# section -> {key: (kind, default)}; kinds: int, num, str
_SECTIONS: dict[str, dict[str, tuple[str, Any]]] = {
    "workload": {
        "users": ("int", 800),
        "per_user_rps": ("num", 0.5),
        "duration": ("int", 3300),
        "warmup": ("int", 60),
    },
    "pattern": {
        "phases": ("phases", [{"duration": 60, "magnitude": 0.10},
                              {"duration": 60, "magnitude": 0.18},
                              {"duration": 60, "magnitude": 0.25}]),
        "inter_phase_gap": ("int", 60),
        "repetitions": ("int", 6),
        "cooldown": ("int", 240),
        "first_start": ("int", 120),
        "treatment": ("str", "packet_loss"),
    },
    "error_model": {
        "base_error_rate": ("num", 0.005),
        "loss_to_error_gain": ("num", 0.8),
        "noise_std": ("num", 0.004),
        "ramp": ("int", 10),
    },
    "policy": {
        "grace_after_end": ("int", 30),
        "grace_before_start": ("int", 0),
        "granularity": ("str", "pattern"),
        "pattern_merge_gap": ("int", 120),
    },
    "replay": {
        "series": ("paths", None),
        "schedule": ("str", None),
    },
}
_TOP_LEVEL = {
    "name": ("str", "experiment"),
    "seed": ("int", 0),
    "scrape_interval": ("int", 5),
    "mode": ("str", "simulate"),
}
_SECTION_TYPES = {"workload": WorkloadSpec, "error_model": ErrorModel, "policy": MatchPolicy}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    rules: tuple[str, ...]
    scrape_interval: int = 5
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    pattern: FaultPatternSpec = field(default_factory=FaultPatternSpec)
    error_model: ErrorModel = field(default_factory=ErrorModel)
    policy: MatchPolicy = field(default_factory=MatchPolicy)
    seed: int = 0
    mode: str = "simulate"
    replay_series: tuple[str, ...] = ()
    replay_schedule: str | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    @property
    def parsed_rules(self) -> list[AlertRule]:
        return [rulelang.parse_rule(doc) for doc in self.rules]

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "seed": self.seed,
            "scrape_interval": self.scrape_interval,
            "mode": self.mode,
            "workload": {k: getattr(self.workload, k) for k in _SECTIONS["workload"]},
            "pattern": {
                "phases": [{"duration": dur, "magnitude": mag} for dur, mag in self.pattern.phases],
                **{k: getattr(self.pattern, k) for k in _SECTIONS["pattern"] if k != "phases"},
            },
            "error_model": {k: getattr(self.error_model, k) for k in _SECTIONS["error_model"]},
            "policy": {k: getattr(self.policy, k) for k in _SECTIONS["policy"]},
            "rules": list(self.rules),
        }
        if self.mode == "replay":
            d["replay"] = {"series": list(self.replay_series), "schedule": self.replay_schedule}
        return d

    @property
    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


# -- loading and validation ------------------------------------------------

def _coerce(kind: str, value: Any, path: str, errors: list) -> Any:
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            errors.append((path, f"expected an integer, got {value!r}"))
            return None
        return int(value)
    if kind == "num":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append((path, f"expected a number, got {value!r}"))
            return None
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            errors.append((path, f"expected a string, got {value!r}"))
            return None
        return value
    if kind == "paths":
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
            errors.append((path, "expected a non-empty list of file paths"))
            return None
        return list(value)
    if kind == "phases":
        if not isinstance(value, list) or not value:
            errors.append((path, "expected a non-empty list of {duration, magnitude} phases"))
            return None
        phases = []
        for i, ph in enumerate(value):
            p = f"{path}[{i}]"
            if not isinstance(ph, dict):
                errors.append((p, "expected a mapping with duration and magnitude"))
                continue
            for extra in sorted(set(ph) - {"duration", "magnitude"}):
                errors.append((f"{p}.{extra}", "unknown key"))
            if "duration" not in ph or "magnitude" not in ph:
                errors.append((p, "phase needs both duration and magnitude"))
                continue
            dur = _coerce("int", ph["duration"], f"{p}.duration", errors)
            mag = _coerce("num", ph["magnitude"], f"{p}.magnitude", errors)
            phases.append((dur, mag))
        return phases
    raise AssertionError(kind)


def _section(raw: Any, name: str, errors: list) -> dict:
    schema = _SECTIONS[name]
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        errors.append((name, "expected a mapping"))
        raw = {}
    for extra in sorted(set(raw) - set(schema), key=str):
        errors.append((f"{name}.{extra}", "unknown key"))
    out = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            out[key] = _coerce(kind, raw[key], f"{name}.{key}", errors)
        elif default is not None:
            out[key] = _coerce(kind, copy.deepcopy(default), f"{name}.{key}", errors)
        else:
            out[key] = None
    return out


def _build(cls, kwargs: dict, path: str, errors: list):
    if any(v is None for v in kwargs.values()):
        return None
    try:
        return cls(**kwargs)
    except (ValueError, AlertLabError) as exc:
        errors.append((path, str(exc)))
        return None


def _rule_documents(raw: Any, errors: list) -> list[str]:
    if isinstance(raw, str):
        return [doc for _, doc in rulelang.split_documents(raw)]
    if not isinstance(raw, list) or not all(isinstance(d, str) for d in raw):
        errors.append(("rules", "expected a list of rule documents"))
        return []
    return list(raw)


def spec_from_dict(raw: Any, base_dir: Path | str = ".") -> ExperimentSpec:
    """Validate a raw mapping and build an :class:`ExperimentSpec` with defaults filled.

    All problems are collected and raised together as one :class:`ValidationError`.
    """
    errors: list[tuple[str, str]] = []
    if not isinstance(raw, dict):
        raise ValidationError([("", "spec must be a mapping")])
    known = set(_TOP_LEVEL) | set(_SECTIONS) | {"rules"}
    for extra in sorted(set(raw) - known, key=str):
        errors.append((str(extra), "unknown key"))

    top = {}
    for key, (kind, default) in _TOP_LEVEL.items():
        top[key] = _coerce(kind, raw[key], key, errors) if key in raw else default
    if top["mode"] is not None and top["mode"] not in MODES:
        errors.append(("mode", f"must be one of {MODES}"))
    if top["scrape_interval"] is not None and top["scrape_interval"] <= 0:
        errors.append(("scrape_interval", "must be positive"))

    sections = {name: _section(raw.get(name), name, errors) for name in ("workload", "pattern", "error_model", "policy")}
    built = {name: _build(_SECTION_TYPES[name], sections[name], name, errors) for name in _SECTION_TYPES}
    pattern = None
    if sections["pattern"]["phases"] is not None and all(None not in ph for ph in sections["pattern"]["phases"]):
        pattern = _build(FaultPatternSpec, sections["pattern"], "pattern", errors)

    replay_series: tuple[str, ...] = ()
    replay_schedule = None
    if top["mode"] == "replay":
        if "replay" not in raw:
            errors.append(("replay", "replay mode needs replay.series and replay.schedule"))
        else:
            rp = _section(raw["replay"], "replay", errors)
            if rp["series"] is None and "series" not in (raw["replay"] or {}):
                errors.append(("replay.series", "required in replay mode"))
            if rp["schedule"] is None and "schedule" not in (raw["replay"] or {}):
                errors.append(("replay.schedule", "required in replay mode"))
            replay_series = tuple(rp["series"] or ())
            replay_schedule = rp["schedule"]
    elif "replay" in raw:
        errors.append(("replay", "only allowed when mode is 'replay'"))

    rules: list[str] = []
    if "rules" not in raw or not raw["rules"]:
        errors.append(("rules", "at least one rule is required"))
    else:
        docs = _rule_documents(raw["rules"], errors)
        for d in rulelang.lint_rules(docs):
            if d.severity == "error":
                errors.append((f"rules[{d.document}]", f"{d.code}: {d.message}"
                               + (f" (line {d.line}, column {d.column})" if d.line else "")))
            else:
                log.warning("rules[%d]: %s", d.document, d.message)
        if not any(path.startswith("rules") for path, _ in errors):
            parsed = [rulelang.parse_rule(doc) for doc in docs]
            rules = [rulelang.format_rule(r) for r in parsed]
            if top["mode"] == "simulate":
                for i, r in enumerate(parsed):
                    if r.metric not in SIMULATED_METRICS:
                        errors.append((f"rules[{i}]", f"metric {r.metric!r} is not produced by the simulator "
                                                      f"(available: {', '.join(SIMULATED_METRICS)})"))

    workload = built["workload"]
    if top["mode"] == "simulate" and workload is not None and pattern is not None:
        if pattern.first_start < workload.warmup:
            errors.append(("pattern.first_start", f"faults start at {pattern.first_start}s, "
                                                  f"inside the {workload.warmup}s warm-up"))
        last_end = sim.build_fault_schedule(pattern)[-1].end
        if last_end > workload.duration:
            errors.append(("workload.duration", f"fault schedule ends at {last_end}s, "
                                                f"after the experiment ({workload.duration}s)"))

    if errors:
        raise ValidationError(errors)
    return ExperimentSpec(
        name=top["name"], rules=tuple(rules), scrape_interval=top["scrape_interval"],
        workload=workload, pattern=pattern, error_model=built["error_model"], policy=built["policy"],
        seed=top["seed"], mode=top["mode"], replay_series=replay_series, replay_schedule=replay_schedule,
        base_dir=Path(base_dir),
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read spec: {exc.strerror or exc}", str(path)) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = getattr(getattr(exc, "problem_mark", None), "line", None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}", str(path),
                         None if line is None else line + 1) from exc
    return spec_from_dict(raw, base_dir=path.parent)


class _SpecDumper(yaml.SafeDumper):
    pass


def _str_representer(dumper, data):
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_SpecDumper.add_representer(str, _str_representer)


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.dump(spec.to_dict(), Dumper=_SpecDumper, sort_keys=False, default_flow_style=False)


def save_spec(spec: ExperimentSpec, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dump_spec(spec), encoding="utf-8")
    return path


def reference_spec_path() -> Path:
    return Path(str(resources.files("alertlab") / "data" / "reference.yaml"))


def load_reference_spec() -> ExperimentSpec:
    return load_spec(reference_spec_path())


# -- running ---------------------------------------------------------------

@dataclass
class RunResult:
    spec: ExperimentSpec
    digest: str
    series: dict[str, TimeSeries]
    schedule: list[FaultWindow]
    episodes: dict[str, list[AlertEvent]]
    reports: dict[str, DetectionReport]
    t_end: int
    wall_time: float = 0.0

    @property
    def rule_names(self) -> list[str]:
        return list(self.reports)


@dataclass
class VariationFailure:
    """Placeholder for a batch variation that could not be run."""

    index: int
    overrides: dict
    error: BaseException


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except PipelineError:
        raise
    except (AlertLabError, ValueError, OSError) as exc:
        raise PipelineError(name, exc) from exc


def _acquire(spec: ExperimentSpec) -> tuple[dict[str, TimeSeries], list[FaultWindow], int]:
    if spec.mode == "simulate":
        schedule = sim.build_fault_schedule(spec.pattern)
        series, schedule = sim.simulate(spec.workload, schedule, spec.error_model, spec.scrape_interval, spec.seed)
        return series, schedule, spec.workload.duration
    series = {}
    for p in spec.replay_series:
        s = load_series_csv(spec.resolve(p))
        if s.name in series:
            raise ParseError(f"two replay files carry series {s.name!r}", p)
        series[s.name] = s
    schedule = sim.load_fault_schedule_csv(spec.resolve(spec.replay_schedule))
    t_end = max((int(s.timestamps[-1]) for s in series.values() if len(s)), default=0)
    return series, schedule, t_end


def _evaluate(rules, series, t_end):
    episodes, errors = evaluate_all(rules, series, t_end)
    if errors:
        raise errors[0] if len(errors) == 1 else PipelineError(
            "evaluate", AlertLabError("; ".join(str(e) for e in errors)))
    return episodes


def evaluate_and_classify(rules: Sequence[AlertRule], series: Mapping[str, TimeSeries],
                          schedule: Sequence[FaultWindow], policy: MatchPolicy,
                          t_end: int) -> tuple[dict[str, list[AlertEvent]], dict[str, DetectionReport]]:
    episodes = _stage("evaluate", _evaluate, rules, series, t_end)
    reports = _stage("classify", lambda: {
        r.name: matcher.classify(episodes[r.name], schedule, policy, rule_name=r.name) for r in rules})
    return episodes, reports


def run_experiment(spec: ExperimentSpec) -> RunResult:
    """Acquire series (simulate or replay), evaluate every rule, score against the schedule."""
    started = time.perf_counter()
    rules = _stage("rules", lambda: spec.parsed_rules)
    series, schedule, t_end = _stage("simulate" if spec.mode == "simulate" else "load", _acquire, spec)
    episodes, reports = evaluate_and_classify(rules, series, schedule, spec.policy, t_end)
    return RunResult(spec, spec.digest, series, schedule, episodes, reports, t_end,
                     wall_time=time.perf_counter() - started)


def _set_rule_field(docs: list[str], rule_name: str, attr: str, value: Any) -> list[str]:
    rules = [rulelang.parse_rule(d) for d in docs]
    for i, r in enumerate(rules):
        if r.name == rule_name:
            if attr == "for":
                attr = "for_duration"
            if attr not in AlertRule.__dataclass_fields__:
                raise KeyError(f"rules.{rule_name}.{attr}")
            rules[i] = replace(r, **{attr: value})
            return [rulelang.format_rule(r) for r in rules]
    raise KeyError(f"rules.{rule_name}")


def apply_overrides(spec: ExperimentSpec, overrides: Mapping[str, Any]) -> ExperimentSpec:
    """Return a new spec with dotted-path overrides applied and revalidated.

    Paths address existing fields, e.g. ``seed``, ``error_model.noise_std``,
    ``rules`` (whole list) or ``rules.Base90.window`` (one rule field).
    """
    d = spec.to_dict()
    for path, value in overrides.items():
        parts = path.split(".")
        if parts[0] == "rules" and len(parts) == 3:
            d["rules"] = _set_rule_field(d["rules"], parts[1], parts[2], value)
            continue
        node = d
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise KeyError(path)
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise KeyError(path)
        node[parts[-1]] = value
    return spec_from_dict(d, base_dir=spec.base_dir)


def _run_variation(base: ExperimentSpec, index: int, overrides: Mapping[str, Any]):
    try:
        ov = dict(overrides)
        ov.setdefault("seed", base.seed + index)
        return run_experiment(apply_overrides(base, ov))
    except Exception as exc:  # batch must survive bad corners
        log.warning("variation %d failed: %s", index, exc)
        return VariationFailure(index, dict(overrides), exc)


def run_batch(base_spec: ExperimentSpec, variations: Sequence[Mapping[str, Any]],
              parallelism: int = 1) -> list[RunResult | VariationFailure]:
    """Run one experiment per override mapping; results keep input order.

    Variations that do not set ``seed`` get ``base_spec.seed + index``.
    Failures are returned in place as :class:`VariationFailure`.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if parallelism == 1 or len(variations) <= 1:
        return [_run_variation(base_spec, i, v) for i, v in enumerate(variations)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_run_variation, base_spec, i, v) for i, v in enumerate(variations)]
        return [f.result() for f in futures]


# -- output emission ---------------------------------------------------------

def _plotdata_csv(result: RunResult) -> str:
    names = sorted(result.series)
    grid = sorted({int(t) for s in result.series.values() for t in s.timestamps})
    rules = result.rule_names
    lookup = {n: dict(zip(result.series[n].timestamps.tolist(), result.series[n].values.tolist())) for n in names}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", *names, "fault_magnitude", *(f"firing_{r}" for r in rules)])
    for t in grid:
        row: list[Any] = [t]
        row += [format_value(lookup[n][t]) if t in lookup[n] else "" for n in names]
        mag = next((f.magnitude for f in result.schedule if f.start <= t < f.end), 0.0)
        row.append(format_value(mag))
        row += [int(any(e.covers(t) for e in result.episodes[r])) for r in rules]
        w.writerow(row)
    return buf.getvalue()


def run_metadata(result: RunResult) -> dict:
    spec = result.spec
    return {
        "spec_name": spec.name,
        "spec_digest": result.digest,
        "mode": spec.mode,
        "seed": spec.seed,
        "scrape_interval": spec.scrape_interval,
        "t_end": result.t_end,
        "rules": result.rule_names,
        "policy": spec.to_dict()["policy"],
    }


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def emit_outputs(result: RunResult, out_dir: str | Path) -> dict[str, list[str]]:
    """Write every artefact of ``result`` under ``out_dir``.

    Returns the manifest: category -> list of paths relative to ``out_dir``.
    Output is byte-identical for identical results (wall time is not written).
    """
    out = Path(out_dir)
    manifest: dict[str, list[Path]] = {k: [] for k in
                                       ("series", "schedule", "episodes", "reports", "plotdata", "metadata")}
    for name in sorted(result.series):
        manifest["series"].append(_write(out / "series" / f"{name}.csv", series_to_csv(result.series[name])))
    manifest["schedule"].append(_write(out / "schedule.csv", sim.schedule_to_csv(result.schedule)))
    for rule in result.rule_names:
        manifest["episodes"].append(_write(out / "episodes" / f"{rule}.csv", episodes_to_csv(result.episodes[rule])))
        manifest["reports"].append(_write(out / "reports" / f"{rule}.json", result.reports[rule].to_json()))
    manifest["plotdata"].append(_write(out / "plotdata.csv", _plotdata_csv(result)))
    manifest["metadata"].append(_write(out / "run.json", json.dumps(run_metadata(result), indent=2) + "\n"))
    manifest["metadata"].append(_write(out / "spec.yaml", dump_spec(result.spec)))
    manifest["metadata"].append(_write(out / "rules.txt", "---\n".join(result.spec.rules)))
    return {k: [p.relative_to(out).as_posix() for p in v] for k, v in manifest.items()}


def load_reports(out_dir: str | Path) -> tuple[dict, dict[str, dict]]:
    """Read ``run.json`` and every report JSON from an output directory."""
    out = Path(out_dir)
    meta_path = out / "run.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read run metadata: {exc.strerror or exc}", str(meta_path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", str(meta_path), exc.lineno) from exc
    reports = {}
    for rule in meta.get("rules", []):
        p = out / "reports" / f"{rule}.json"
        try:
            reports[rule] = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read report: {exc}", str(p)) from exc
    return meta, reports
