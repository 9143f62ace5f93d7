"""Score firing episodes against a fault schedule.

An episode counts for a fault unit when its ``fired_at`` lies in
``[unit.start - grace_before_start, unit.end + grace_after_end]``. The first
such episode detects the unit; later ones are duplicate true positives.
Episodes that match nothing are false positives, undetected units false
negatives.
"""

from __future__ import annotations

import bisect
import json
import statistics
from dataclasses import dataclass, field
from typing import Sequence

from .errors import UnsortedInput
from .evaluator import AlertEvent
from .sim import FaultWindow

UNDEFINED = "undefined"
GRANULARITIES = ("phase", "pattern")


@dataclass(frozen=True)
class MatchPolicy:
    grace_after_end: int = 30
    grace_before_start: int = 0
    granularity: str = "pattern"
    pattern_merge_gap: int = 120

    def __post_init__(self):
        if self.grace_after_end < 0 or self.grace_before_start < 0:
            raise ValueError("grace periods must be non-negative")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}")
        if self.pattern_merge_gap <= 0:
            raise ValueError("pattern_merge_gap must be positive")


@dataclass(frozen=True)
class FaultUnit:
    index: int
    start: int
    end: int
    windows: tuple[FaultWindow, ...] = ()


@dataclass
class DetectionRecord:
    fault_unit: FaultUnit
    detected: bool = False
    first_fired_at: int | None = None
    time_to_detect: int | None = None
    episode_count: int = 0


@dataclass
class DetectionReport:
    rule_name: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    duplicate_tp: int = 0
    records: list[DetectionRecord] = field(default_factory=list)

    @property
    def tp_events(self) -> int:
        return self.tp + self.duplicate_tp

    @property
    def precision(self) -> float | str:
        denom = self.tp_events + self.fp
        return self.tp_events / denom if denom else UNDEFINED

    @property
    def recall(self) -> float | str:
        denom = self.tp + self.fn
        return self.tp / denom if denom else UNDEFINED

    @property
    def ttd_values(self) -> list[int]:
        return [r.time_to_detect for r in self.records if r.detected]

    @property
    def episodes(self) -> int:
        return self.tp_events + self.fp

    @property
    def median_ttd(self) -> float | str:
        ttd = self.ttd_values
        return statistics.median(ttd) if ttd else UNDEFINED

    def to_dict(self) -> dict:
        return {
            "rule_name": self.rule_name,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "duplicate_tp": self.duplicate_tp,
            "episodes": self.episodes,
            "patterns_detected": self.tp,
            "fault_units": len(self.records),
            "precision": self.precision,
            "recall": self.recall,
            "ttd_values": self.ttd_values,
            "median_ttd": self.median_ttd,
            "records": [
                {
                    "unit": r.fault_unit.index,
                    "start": r.fault_unit.start,
                    "end": r.fault_unit.end,
                    "detected": r.detected,
                    "first_fired_at": r.first_fired_at,
                    "time_to_detect": r.time_to_detect,
                    "episode_count": r.episode_count,
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary_key(self) -> tuple:
        """Everything except the unit objects; handy for equality checks."""
        return (self.rule_name, self.tp, self.fp, self.fn, self.duplicate_tp,
                tuple((r.fault_unit.start, r.fault_unit.end, r.detected, r.first_fired_at,
                       r.time_to_detect, r.episode_count) for r in self.records))


def merge_fault_units(schedule: Sequence[FaultWindow], policy: MatchPolicy) -> list[FaultUnit]:
    if policy.granularity == "phase":
        return [FaultUnit(i, w.start, w.end, (w,)) for i, w in enumerate(schedule)]
    groups: list[list[FaultWindow]] = []
    for w in schedule:
        if groups and w.start - groups[-1][-1].end < policy.pattern_merge_gap:
            groups[-1].append(w)
        else:
            groups.append([w])
    return [FaultUnit(i, g[0].start, g[-1].end, tuple(g)) for i, g in enumerate(groups)]


def _preference(fired_at: int, unit: FaultUnit) -> tuple:
    # Smallest non-negative offset from unit start wins; units that have not
    # started yet (only reachable through grace_before_start) rank after all
    # started ones, nearest first. Index breaks remaining ties.
    offset = fired_at - unit.start
    return (0, offset, unit.index) if offset >= 0 else (1, -offset, unit.index)


def _check_sorted(episodes: Sequence[AlertEvent], schedule: Sequence[FaultWindow]):
    for a, b in zip(episodes, episodes[1:]):
        if b.fired_at < a.fired_at:
            raise UnsortedInput(f"episodes not sorted by fired_at ({a.fired_at} then {b.fired_at})")
    for a, b in zip(schedule, schedule[1:]):
        if b.start < a.end:
            raise UnsortedInput(f"schedule windows unsorted or overlapping at t={b.start}")


def classify(episodes: Sequence[AlertEvent], schedule: Sequence[FaultWindow], policy: MatchPolicy,
             rule_name: str | None = None) -> DetectionReport:
    _check_sorted(episodes, schedule)
    units = merge_fault_units(schedule, policy)
    if rule_name is None:
        rule_name = episodes[0].rule_name if episodes else ""
    report = DetectionReport(rule_name, records=[DetectionRecord(u) for u in units])
    starts = [u.start for u in units]
    ends = [u.end for u in units]
    for ep in episodes:
        f = ep.fired_at
        # units are disjoint and sorted, so candidates form a contiguous run
        lo = bisect.bisect_left(ends, f - policy.grace_after_end)
        hi = bisect.bisect_right(starts, f + policy.grace_before_start)
        if lo >= hi:
            report.fp += 1
            continue
        unit = min(units[lo:hi], key=lambda u: _preference(f, u))
        rec = report.records[unit.index]
        rec.episode_count += 1
        if rec.detected:
            report.duplicate_tp += 1
        else:
            rec.detected = True
            rec.first_fired_at = f
            rec.time_to_detect = f - unit.start
            report.tp += 1
    report.fn = sum(not r.detected for r in report.records)
    return report


def classify_bruteforce(episodes: Sequence[AlertEvent], schedule: Sequence[FaultWindow], policy: MatchPolicy,
                        rule_name: str | None = None) -> DetectionReport:
    """Reference implementation of :func:`classify` by exhaustive pairwise checks.

    Only meant for small instances in tests.
    """
    units = merge_fault_units(schedule, policy)
    assigned: list[list[int]] = [[] for _ in units]
    fp = 0
    for ep in episodes:
        best = None
        for u in units:
            if u.start - policy.grace_before_start <= ep.fired_at <= u.end + policy.grace_after_end:
                if best is None or _preference(ep.fired_at, u) < _preference(ep.fired_at, best):
                    best = u
        if best is None:
            fp += 1
        else:
            assigned[best.index].append(ep.fired_at)
    if rule_name is None:
        rule_name = episodes[0].rule_name if episodes else ""
    report = DetectionReport(rule_name, fp=fp)
    for u, fired in zip(units, assigned):
        rec = DetectionRecord(u, episode_count=len(fired))
        if fired:
            first = min(fired)
            rec.detected, rec.first_fired_at, rec.time_to_detect = True, first, first - u.start
            report.tp += 1
            report.duplicate_tp += len(fired) - 1
        else:
            report.fn += 1
        report.records.append(rec)
    return report
