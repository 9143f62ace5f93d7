"""Deterministic stand-in for the system under experiment.

Generates ``requestRate`` and ``errorRate`` on the scrape grid for a constant
user load, with packet-loss fault windows pushed through an affine
loss-to-error transfer. Time is computed, never slept.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NonPositiveInterval, ParseError, ScheduleOverlap
from .timeseries import VALUE_DIGITS, TimeSeries, format_value, load_series_csv  # noqa: F401

SCHEDULE_CSV_HEADER = ("treatment", "start", "end", "magnitude")


@dataclass(frozen=True)
class WorkloadSpec:
    users: int = 800
    per_user_rps: float = 0.5
    duration: int = 3300
    warmup: int = 60

    def __post_init__(self):
        if self.users <= 0:
            raise ValueError("users must be positive")
        if not self.per_user_rps > 0:
            raise ValueError("per_user_rps must be positive")
        if not self.duration > self.warmup >= 0:
            raise ValueError("need duration > warmup >= 0")


@dataclass(frozen=True)
class FaultWindow:
    """A half-open fault interval ``[start, end)``."""

    treatment: str
    start: int
    end: int
    magnitude: float

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise NonPositiveInterval(f"fault window needs 0 <= start < end, got [{self.start}, {self.end})")
        if not 0.0 <= self.magnitude <= 1.0:
            raise ValueError(f"magnitude must be in [0, 1], got {self.magnitude}")

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class FaultPatternSpec:
    phases: tuple[tuple[int, float], ...] = ((60, 0.10), (60, 0.18), (60, 0.25))
    inter_phase_gap: int = 60
    repetitions: int = 6
    cooldown: int = 240
    first_start: int = 120
    treatment: str = "packet_loss"

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple((int(d), float(m)) for d, m in self.phases))
        if not self.phases:
            raise ValueError("a pattern needs at least one phase")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for d, m in self.phases:
            if d <= 0:
                raise ValueError("phase durations must be positive")
            if not 0.0 <= m <= 1.0:
                raise ValueError("phase magnitudes must be in [0, 1]")
        if self.inter_phase_gap < 0 or self.cooldown < 0 or self.first_start < 0:
            raise ValueError("gap, cooldown and first_start must be non-negative")

    @property
    def repetition_length(self) -> int:
        return sum(d for d, _ in self.phases) + self.inter_phase_gap * (len(self.phases) - 1)


@dataclass(frozen=True)
class ErrorModel:
    base_error_rate: float = 0.005
    loss_to_error_gain: float = 0.8
    noise_std: float = 0.004
    ramp: int = 10

    def __post_init__(self):
        for name in ("base_error_rate", "loss_to_error_gain", "noise_std", "ramp"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a non-negative finite number, got {v!r}")


def build_fault_schedule(pattern: FaultPatternSpec) -> list[FaultWindow]:
    windows = []
    rep_start = pattern.first_start
    for _ in range(pattern.repetitions):
        t = rep_start
        for k, (duration, magnitude) in enumerate(pattern.phases):
            if k:
                t += pattern.inter_phase_gap
            windows.append(FaultWindow(pattern.treatment, t, t + duration, magnitude))
            t += duration
        rep_start = t + pattern.cooldown
    return windows


def check_schedule(schedule: Sequence[FaultWindow]) -> None:
    for a, b in zip(schedule, schedule[1:]):
        if b.start < a.end:
            raise ScheduleOverlap(f"window [{b.start}, {b.end}) starts before [{a.start}, {a.end}) ends"
                                  if b.start >= a.start else
                                  f"schedule not sorted: [{b.start}, {b.end}) after [{a.start}, {a.end})")


def effective_loss(schedule: Sequence[FaultWindow], timestamps: np.ndarray, ramp: float) -> np.ndarray:
    """Ramped fault magnitude at each timestamp (0 outside every window).

    Inside ``[start, end)`` the magnitude is scaled by
    ``min(1, (t - start) / ramp, (end - t) / ramp)``.
    """
    t = np.asarray(timestamps, dtype=np.float64)
    loss = np.zeros_like(t)
    for w in schedule:
        inside = (t >= w.start) & (t < w.end)
        if ramp > 0:
            scale = np.minimum(1.0, np.minimum(t - w.start, w.end - t) / ramp)
        else:
            scale = np.ones_like(t)
        loss = np.where(inside, w.magnitude * scale, loss)
    return loss


def _seed_sequence(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) % 2**64)


def simulate(workload: WorkloadSpec, schedule: Sequence[FaultWindow], model: ErrorModel,
             scrape_interval: int, seed: int) -> tuple[dict[str, TimeSeries], list[FaultWindow]]:
    """Produce ``{"requestRate": ..., "errorRate": ...}`` and echo the schedule.

    Values are rounded to 9 decimals so that the CSV form is lossless.
    """
    if int(scrape_interval) != scrape_interval or scrape_interval <= 0:
        raise NonPositiveInterval(f"scrape_interval must be a positive integer, got {scrape_interval!r}")
    schedule = list(schedule)
    check_schedule(schedule)

    ts = np.arange(0, workload.duration + 1, scrape_interval, dtype=np.int64)
    err_seq, req_seq = _seed_sequence(seed).spawn(2)
    err_noise = np.random.default_rng(err_seq).standard_normal(ts.size)
    req_noise = np.random.default_rng(req_seq).standard_normal(ts.size)

    loss = effective_loss(schedule, ts, model.ramp)
    error_rate = model.base_error_rate + model.loss_to_error_gain * loss + model.noise_std * err_noise
    error_rate = np.round(np.clip(error_rate, 0.0, 1.0), VALUE_DIGITS)

    nominal = workload.users * workload.per_user_rps
    request_rate = np.round(np.maximum(nominal * (1.0 + model.noise_std * req_noise), 0.0), VALUE_DIGITS)

    labels = {"service": "frontend"}
    series = {
        "requestRate": TimeSeries("requestRate", ts, request_rate, scrape_interval, labels),
        "errorRate": TimeSeries("errorRate", ts, error_rate, scrape_interval, labels, ratio=True),
    }
    return series, schedule


def schedule_to_csv(schedule: Sequence[FaultWindow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEDULE_CSV_HEADER)
    for f in schedule:
        w.writerow([f.treatment, f.start, f.end, format_value(f.magnitude)])
    return buf.getvalue()


def write_fault_schedule_csv(schedule: Sequence[FaultWindow], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(schedule_to_csv(schedule), encoding="utf-8", newline="")
    return path


def load_fault_schedule_csv(path: str | Path) -> list[FaultWindow]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read schedule file: {exc}", str(path)) from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != SCHEDULE_CSV_HEADER:
        raise ParseError(f"expected header {','.join(SCHEDULE_CSV_HEADER)}", str(path), 1)
    schedule = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, got {len(row)}", str(path), lineno)
        try:
            window = FaultWindow(row[0].strip(), int(row[1]), int(row[2]), float(row[3]))
        except (ValueError, NonPositiveInterval) as exc:
            raise ParseError(str(exc), str(path), lineno) from None
        schedule.append(window)
    check_schedule(schedule)
    return schedule
