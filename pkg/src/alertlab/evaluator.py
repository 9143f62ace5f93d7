"""Alert state machine over the scrape grid.

Each evaluation step computes the rule's window mean and compares it with
the threshold. A rule walks inactive -> pending -> firing; any false step
resets it to inactive, closing a firing episode at that step.
"""

from __future__ import annotations

import csv
import io
import math
import operator
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MetricMismatch, ParseError
from .rulelang import AlertRule
from .timeseries import TimeSeries, window_average

EPISODE_CSV_HEADER = ("rule", "pending_since", "fired_at", "resolved_at")

# Means within this distance of the threshold compare as equal to it, so that
# e.g. nine 0.06 samples over an 18-sample window do not "exceed" 0.03 through
# rounding noise.
TIE_REL_TOL = 1e-12
TIE_ABS_TOL = 1e-12

_STRICT = {">": operator.gt, "<": operator.lt}
_INCLUSIVE = {">=": operator.ge, "<=": operator.le}


class Phase(Enum):
    INACTIVE = "inactive"
    PENDING = "pending"
    FIRING = "firing"


@dataclass(frozen=True)
class AlertEvent:
    """One firing episode. ``resolved_at`` is None while the episode is still open."""

    rule_name: str
    pending_since: int
    fired_at: int
    resolved_at: int | None = None

    @property
    def is_open(self) -> bool:
        return self.resolved_at is None

    def covers(self, t: int) -> bool:
        return self.fired_at <= t and (self.resolved_at is None or t < self.resolved_at)


def compare(value: float, comparator: str, threshold: float) -> bool:
    tied = math.isclose(value, threshold, rel_tol=TIE_REL_TOL, abs_tol=TIE_ABS_TOL)
    if comparator in _STRICT:
        return not tied and _STRICT[comparator](value, threshold)
    if comparator in _INCLUSIVE:
        return tied or _INCLUSIVE[comparator](value, threshold)
    raise ValueError(f"unknown comparator {comparator!r}")


def condition(rule: AlertRule, series: TimeSeries, t: int) -> bool:
    """Whether the rule's expression holds at step ``t``; no data counts as false."""
    mean = window_average(series, t, rule.window)
    return mean is not None and compare(mean, rule.comparator, rule.threshold)


def evaluation_steps(scrape_interval: int, t_end: int) -> range:
    return range(0, int(t_end) + 1, scrape_interval)


def evaluate_rule(rule: AlertRule, series: TimeSeries, t_end: int) -> list[AlertEvent]:
    if series.name != rule.metric:
        raise MetricMismatch(rule.name, rule.metric, f"series is named {series.name!r}")
    episodes: list[AlertEvent] = []
    phase = Phase.INACTIVE
    pending_since = fired_at = None
    for t in evaluation_steps(series.scrape_interval, t_end):
        if not condition(rule, series, t):
            if phase is Phase.FIRING:
                episodes.append(AlertEvent(rule.name, pending_since, fired_at, t))
            phase, pending_since, fired_at = Phase.INACTIVE, None, None
            continue
        if phase is Phase.INACTIVE:
            phase, pending_since = Phase.PENDING, t
        if phase is Phase.PENDING and t - pending_since >= rule.for_duration:
            phase, fired_at = Phase.FIRING, t
    if phase is Phase.FIRING:
        episodes.append(AlertEvent(rule.name, pending_since, fired_at, None))
    return episodes


def evaluate_all(rules: Sequence[AlertRule], series_set: Mapping[str, TimeSeries] | Iterable[TimeSeries],
                 t_end: int) -> tuple[dict[str, list[AlertEvent]], list[MetricMismatch]]:
    """Evaluate every rule against the series it names.

    Returns ``(episodes_by_rule, errors)``. Rules whose metric does not
    resolve to exactly one series are skipped and reported in ``errors``.
    """
    by_name: dict[str, list[TimeSeries]] = {}
    for s in (series_set.values() if isinstance(series_set, Mapping) else series_set):
        by_name.setdefault(s.name, []).append(s)
    results: dict[str, list[AlertEvent]] = {}
    errors: list[MetricMismatch] = []
    for rule in rules:
        candidates = by_name.get(rule.metric, [])
        if len(candidates) != 1:
            detail = "no series with that name" if not candidates else f"{len(candidates)} series share that name"
            errors.append(MetricMismatch(rule.name, rule.metric, detail))
            continue
        results[rule.name] = evaluate_rule(rule, candidates[0], t_end)
    return results, errors


def episodes_to_csv(episodes: Iterable[AlertEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_CSV_HEADER)
    for e in episodes:
        w.writerow([e.rule_name, e.pending_since, e.fired_at, "" if e.resolved_at is None else e.resolved_at])
    return buf.getvalue()


def load_episodes_csv(path: str | Path) -> list[AlertEvent]:
    path = Path(path)
    rows = list(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))))
    if not rows or tuple(rows[0]) != EPISODE_CSV_HEADER:
        raise ParseError(f"expected header {','.join(EPISODE_CSV_HEADER)}", str(path), 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            name, pending, fired, resolved = row
            out.append(AlertEvent(name, int(pending), int(fired), int(resolved) if resolved else None))
        except ValueError as exc:
            raise ParseError(f"bad episode row {row!r}: {exc}", str(path), lineno) from None
    return out
