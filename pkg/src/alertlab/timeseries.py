"""Regularly sampled metric streams and window aggregation.

Timestamps are integer seconds since experiment start and sit on a fixed
scrape grid. Values are doubles. A series is immutable once built.

CSV layout (one file per series)::

    # series: {"labels": {"service": "frontend"}, "name": "errorRate", "ratio": true, "scrape_interval": 5}
    timestamp,value
    0,0.005000000
    5,0.004871234

The ``# series:`` line is a JSON object. It is optional on input; without it
the name is taken from the file stem and the interval from the first gap.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import GridError, ParseError

SERIES_HEADER_PREFIX = "# series:"
DEFAULT_SCRAPE_INTERVAL = 5
VALUE_DIGITS = 9


class MetricSample(NamedTuple):
    timestamp: int
    value: float


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A named metric stream on a regular grid.

    Build with :meth:`from_values` or :meth:`from_samples`; the constructor
    validates the grid and freezes the arrays.
    """

    name: str
    timestamps: np.ndarray
    values: np.ndarray
    scrape_interval: int = DEFAULT_SCRAPE_INTERVAL
    labels: Mapping[str, str] = field(default_factory=dict)
    ratio: bool = False

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64).copy()
        vs = np.asarray(self.values, dtype=np.float64).copy()
        object.__setattr__(self, "labels", dict(self.labels))
        if int(self.scrape_interval) != self.scrape_interval or self.scrape_interval <= 0:
            raise GridError(f"scrape_interval must be a positive integer, got {self.scrape_interval!r}")
        object.__setattr__(self, "scrape_interval", int(self.scrape_interval))
        if ts.ndim != 1 or vs.shape != ts.shape:
            raise ValueError("timestamps and values must be 1-d arrays of equal length")
        _check_grid(ts, self.scrape_interval)
        if not np.all(np.isfinite(vs)):
            raise ValueError(f"series {self.name!r} contains non-finite values")
        if self.ratio and vs.size and (vs.min() < 0.0 or vs.max() > 1.0):
            raise ValueError(f"ratio series {self.name!r} has values outside [0, 1]")
        ts.setflags(write=False)
        vs.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    @classmethod
    def from_values(cls, name: str, values: Sequence[float], scrape_interval: int = DEFAULT_SCRAPE_INTERVAL,
                    start: int = 0, labels: Mapping[str, str] | None = None, ratio: bool = False) -> "TimeSeries":
        values = np.asarray(values, dtype=np.float64)
        ts = start + scrape_interval * np.arange(values.size, dtype=np.int64)
        return cls(name, ts, values, scrape_interval, labels or {}, ratio)

    @classmethod
    def from_samples(cls, name: str, samples: Sequence[tuple[int, float]],
                     scrape_interval: int = DEFAULT_SCRAPE_INTERVAL,
                     labels: Mapping[str, str] | None = None, ratio: bool = False) -> "TimeSeries":
        ts = [s[0] for s in samples]
        vs = [s[1] for s in samples]
        return cls(name, np.array(ts, dtype=np.int64), np.array(vs, dtype=np.float64),
                   scrape_interval, labels or {}, ratio)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __iter__(self) -> Iterator[MetricSample]:
        return (MetricSample(int(t), float(v)) for t, v in zip(self.timestamps, self.values))

    @property
    def samples(self) -> list[MetricSample]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.name == other.name
                and self.scrape_interval == other.scrape_interval
                and self.labels == other.labels
                and self.ratio == other.ratio
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        span = f"{self.timestamps[0]}..{self.timestamps[-1]}" if len(self) else "empty"
        return f"TimeSeries({self.name!r}, n={len(self)}, t={span}, every {self.scrape_interval}s)"

    def value_at(self, t: int) -> float | None:
        i = np.searchsorted(self.timestamps, t)
        if i < len(self) and self.timestamps[i] == t:
            return float(self.values[i])
        return None


def _check_grid(ts: np.ndarray, interval: int) -> None:
    if ts.size == 0:
        return
    if ts[0] < 0:
        raise GridError(f"negative timestamp {ts[0]}")
    if ts[0] % interval:
        raise GridError(f"timestamp {ts[0]} is not on the {interval}s grid")
    gaps = np.diff(ts)
    bad = np.flatnonzero(gaps != interval)
    if bad.size:
        i = int(bad[0])
        raise GridError(f"gap of {gaps[i]}s between t={ts[i]} and t={ts[i + 1]}, expected {interval}s")


def window_average(series: TimeSeries, t: float, window: float) -> float | None:
    """Mean of the samples with timestamp in ``(t - window, t]``.

    Uses whatever samples are present; returns None when none are.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    ts = series.timestamps
    lo = int(np.searchsorted(ts, t - window, side="right"))
    hi = int(np.searchsorted(ts, t, side="right"))
    if hi <= lo:
        return None
    return math.fsum(series.values[lo:hi].tolist()) / (hi - lo)


def slice(series: TimeSeries, t_start: float, t_end: float) -> TimeSeries:  # noqa: A001
    """Sub-series with timestamps in the closed interval ``[t_start, t_end]``."""
    if t_start < 0 or t_end < t_start:
        raise ValueError(f"need 0 <= t_start <= t_end, got [{t_start}, {t_end}]")
    ts = series.timestamps
    lo = int(np.searchsorted(ts, t_start, side="left"))
    hi = int(np.searchsorted(ts, t_end, side="right"))
    return TimeSeries(series.name, ts[lo:hi], series.values[lo:hi], series.scrape_interval,
                      series.labels, series.ratio)


def format_value(v: float) -> str:
    return f"{v:.{VALUE_DIGITS}f}"


def series_to_csv(series: TimeSeries) -> str:
    meta = {"name": series.name, "labels": dict(series.labels),
            "scrape_interval": series.scrape_interval, "ratio": series.ratio}
    buf = io.StringIO()
    buf.write(f"{SERIES_HEADER_PREFIX} {json.dumps(meta, sort_keys=True)}\n")
    buf.write("timestamp,value\n")
    for t, v in zip(series.timestamps.tolist(), series.values.tolist()):
        buf.write(f"{t},{format_value(v)}\n")
    return buf.getvalue()


def write_series_csv(series: TimeSeries, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(series_to_csv(series), encoding="utf-8", newline="")
    return path


def load_series_csv(path: str | Path) -> TimeSeries:
    """Read a series written by :func:`write_series_csv` (or a bare ``timestamp,value`` file)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read series file: {exc}", str(path)) from exc
    return parse_series_csv(text, source=str(path), default_name=path.stem)


def parse_series_csv(text: str, source: str = "<string>", default_name: str = "series") -> TimeSeries:
    meta: dict = {}
    rows: list[tuple[int, int, float]] = []
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(SERIES_HEADER_PREFIX):
            if meta or saw_header:
                raise ParseError("unexpected '# series:' line", source, lineno)
            try:
                meta = json.loads(line[len(SERIES_HEADER_PREFIX):])
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad series metadata: {exc.msg}", source, lineno) from exc
            if not isinstance(meta, dict):
                raise ParseError("series metadata must be a JSON object", source, lineno)
            continue
        if line.startswith("#"):
            continue
        if not saw_header:
            if [c.strip() for c in line.split(",")] != ["timestamp", "value"]:
                raise ParseError(f"expected header 'timestamp,value', got {line!r}", source, lineno)
            saw_header = True
            continue
        cells = next(csv.reader([line]))
        if len(cells) != 2:
            raise ParseError(f"expected 2 columns, got {len(cells)}", source, lineno)
        try:
            t = int(cells[0].strip())
        except ValueError:
            raise ParseError(f"timestamp must be an integer, got {cells[0]!r}", source, lineno) from None
        try:
            v = float(cells[1].strip())
        except ValueError:
            raise ParseError(f"value is not a number: {cells[1]!r}", source, lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite value {cells[1]!r}", source, lineno)
        rows.append((lineno, t, v))
    if not saw_header:
        raise ParseError("missing 'timestamp,value' header", source)

    interval = meta.get("scrape_interval")
    if interval is None:
        if len(rows) < 2:
            raise ParseError("cannot infer scrape interval: add a '# series:' line", source)
        interval = rows[1][1] - rows[0][1]
    if not isinstance(interval, int) or isinstance(interval, bool) or interval <= 0:
        raise GridError(f"scrape interval must be a positive integer, got {interval!r}", source)
    for (_, t0, _), (ln, t1, _) in zip(rows, rows[1:]):
        if t1 - t0 != interval:
            raise GridError(f"timestamp {t1} follows {t0}: expected a {interval}s step", source, ln)
    if rows and (rows[0][1] < 0 or rows[0][1] % interval):
        raise GridError(f"timestamp {rows[0][1]} is not on the {interval}s grid", source, rows[0][0])

    ts = np.array([r[1] for r in rows], dtype=np.int64)
    vs = np.array([r[2] for r in rows], dtype=np.float64)
    labels = meta.get("labels") or {}
    try:
        return TimeSeries(str(meta.get("name", default_name)), ts, vs, interval,
                          {str(k): str(v) for k, v in labels.items()}, bool(meta.get("ratio", False)))
    except ValueError as exc:
        raise ParseError(str(exc), source) from exc
