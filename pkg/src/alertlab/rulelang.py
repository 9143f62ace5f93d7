"""Parser, formatter and linter for alert rule documents.

A rule document is a handful of ``key: value`` lines::

    alert: HighErrorRate
    expr: errorRate[90s] > 0.03
    for: 60s

Grammar (EBNF; whitespace is allowed between any two tokens, keys may come
in any order, each at most once, blank lines and ``#`` comments are ignored)::

    document   = { line } ;
    line       = alert_line | expr_line | for_line | labels_line ;
    alert_line = "alert" ":" IDENT ;
    expr_line  = "expr" ":" IDENT "[" duration "]" CMP NUMBER ;
    for_line   = "for" ":" duration ;
    labels_line= "labels" ":" [ label { "," label } ] ;
    label      = IDENT "=" LABEL_VALUE ;
    duration   = INT UNIT ;
    UNIT       = "s" | "m" ;
    CMP        = ">=" | "<=" | ">" | "<" ;
    IDENT      = /[A-Za-z_][A-Za-z0-9_]*/ ;
    LABEL_VALUE= /[A-Za-z0-9_.:\\/-]+/ ;

``alert`` and ``expr`` are required. A bare integer duration (``for: 60``)
is rejected on purpose. A rule file holds several documents separated by
lines containing only ``---``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

COMPARATORS = (">=", "<=", ">", "<")
UNITS = {"s": 1, "m": 60}
RATIO_METRICS = frozenset({"errorRate"})
DOCUMENT_SEPARATOR = "---"

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*", re.ASCII)
LABEL_VALUE_RE = re.compile(r"[A-Za-z0-9_.:/\-]+", re.ASCII)
_INT_RE = re.compile(r"[0-9]+", re.ASCII)
_UNIT_RE = re.compile(r"[A-Za-z]+", re.ASCII)
_NUMBER_RE = re.compile(
    r"[+-]?(?:(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?|inf(?:inity)?|nan)(?![A-Za-z0-9_.])",
    re.ASCII | re.IGNORECASE,
)
_KEY_RE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*:", re.ASCII)


class _Positioned:
    def _init_position(self, message: str, line: int, column: int):
        self.message = message
        self.line = line
        self.column = column


class RuleSyntaxError(SyntaxError, _Positioned):
    """Malformed rule document. ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self._init_position(message, line, column)
        self.lineno = line
        self.offset = column


class RuleValueError(ValueError, _Positioned):
    """Well-formed but semantically invalid rule (zero window, unknown unit, ...)."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self._init_position(message, line, column)


@dataclass(frozen=True)
class AlertRule:
    name: str
    metric: str
    window: int
    comparator: str
    threshold: float
    for_duration: int = 0
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", dict(self.labels))
        for what, value in (("name", self.name), ("metric", self.metric)):
            if not isinstance(value, str) or not IDENT_RE.fullmatch(value):
                raise ValueError(f"{what} must be an identifier, got {value!r}")
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not isinstance(self.window, int) or self.window <= 0:
            raise ValueError("window must be a positive number of seconds")
        if not isinstance(self.for_duration, int) or self.for_duration < 0:
            raise ValueError("for_duration must be a non-negative number of seconds")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        for k, v in self.labels.items():
            if not IDENT_RE.fullmatch(k) or not LABEL_VALUE_RE.fullmatch(v):
                raise ValueError(f"bad label {k!r}={v!r}")

    def __hash__(self):
        return hash((self.name, self.metric, self.window, self.comparator, self.threshold,
                     self.for_duration, tuple(sorted(self.labels.items()))))

    @property
    def expr(self) -> str:
        return f"{self.metric}[{self.window}s] {self.comparator} {self.threshold!r}"


class _Cursor:
    """Tiny scanner over one line; columns reported 1-based."""

    def __init__(self, text: str, lineno: int, pos: int = 0):
        self.text = text
        self.lineno = lineno
        self.pos = pos

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\f\v":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def error(self, message: str, pos: int | None = None) -> RuleSyntaxError:
        return RuleSyntaxError(message, self.lineno, (self.pos if pos is None else pos) + 1)

    def value_error(self, message: str, pos: int) -> RuleValueError:
        return RuleValueError(message, self.lineno, pos + 1)

    def describe(self) -> str:
        if self.pos >= len(self.text):
            return "end of line"
        return repr(self.text[self.pos])

    def expect(self, literal: str):
        self.skip_ws()
        if not self.text.startswith(literal, self.pos):
            raise self.error(f"expected {literal!r}, found {self.describe()}")
        self.pos += len(literal)

    def match(self, regex: re.Pattern, what: str) -> tuple[str, int]:
        self.skip_ws()
        m = regex.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}, found {self.describe()}")
        self.pos = m.end()
        return m.group(0), m.start()

    def end(self):
        if not self.at_end():
            raise self.error(f"unexpected trailing input {self.text[self.pos:]!r}")


def _duration(cur: _Cursor) -> tuple[int, int]:
    digits, start = cur.match(_INT_RE, "an integer duration such as 90s")
    if cur.pos >= len(cur.text) or not _UNIT_RE.match(cur.text, cur.pos):
        raise cur.error(f"duration {digits!r} needs a unit suffix (s or m)")
    unit, upos = cur.match(_UNIT_RE, "a unit")
    if unit not in UNITS:
        raise cur.value_error(f"unknown unit {unit!r} (use s or m)", upos)
    return int(digits) * UNITS[unit], start


def _parse_expr(cur: _Cursor) -> dict:
    metric, _ = cur.match(IDENT_RE, "a metric name")
    cur.expect("[")
    window, wpos = _duration(cur)
    cur.expect("]")
    cur.skip_ws()
    comparator = next((c for c in COMPARATORS if cur.text.startswith(c, cur.pos)), None)
    if comparator is None:
        raise cur.error(f"expected one of {', '.join(COMPARATORS)}, found {cur.describe()}")
    cur.pos += len(comparator)
    number, npos = cur.match(_NUMBER_RE, "a numeric threshold")
    cur.end()
    if window <= 0:
        raise cur.value_error("window must be positive", wpos)
    threshold = float(number)
    if not math.isfinite(threshold):
        raise cur.value_error(f"threshold must be finite, got {number!r}", npos)
    return {"metric": metric, "window": window, "comparator": comparator, "threshold": threshold}


def _parse_labels(cur: _Cursor) -> dict:
    labels: dict[str, str] = {}
    if cur.at_end():
        return labels
    while True:
        key, kpos = cur.match(IDENT_RE, "a label name")
        cur.expect("=")
        value, _ = cur.match(LABEL_VALUE_RE, "a label value")
        if key in labels:
            raise cur.error(f"duplicate label {key!r}", kpos)
        labels[key] = value
        if cur.at_end():
            return labels
        cur.expect(",")


def parse_rule(text: str, first_line: int = 1) -> AlertRule:
    """Parse one rule document.

    Raises :class:`RuleSyntaxError` or :class:`RuleValueError`, both carrying
    ``line``/``column``. ``first_line`` offsets reported line numbers when the
    document was cut out of a larger file.
    """
    fields: dict[str, object] = {}
    seen: dict[str, int] = {}
    last_line = first_line
    for i, raw in enumerate(text.split("\n")):
        lineno = first_line + i
        last_line = lineno
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _KEY_RE.match(raw)
        if not m:
            col = len(raw) - len(raw.lstrip()) + 1
            raise RuleSyntaxError("expected 'alert:', 'expr:', 'for:' or 'labels:'", lineno, col)
        key = m.group(1)
        if key not in ("alert", "expr", "for", "labels"):
            raise RuleSyntaxError(f"unknown key {key!r}", lineno, m.start(1) + 1)
        if key in seen:
            raise RuleSyntaxError(f"duplicate {key!r} line (first on line {seen[key]})", lineno, m.start(1) + 1)
        seen[key] = lineno
        cur = _Cursor(raw, lineno, m.end())
        if key == "alert":
            fields["name"], _ = cur.match(IDENT_RE, "an alert name")
            cur.end()
        elif key == "expr":
            fields.update(_parse_expr(cur))
        elif key == "for":
            fields["for_duration"], _ = _duration(cur)
            cur.end()
        else:
            fields["labels"] = _parse_labels(cur)
    for key in ("alert", "expr"):
        if key not in seen:
            raise RuleSyntaxError(f"missing '{key}:' line", last_line, 1)
    return AlertRule(**fields)


def format_rule(rule: AlertRule) -> str:
    """Canonical text for ``rule``; ``parse_rule(format_rule(r)) == r``."""
    lines = [f"alert: {rule.name}", f"expr: {rule.expr}"]
    if rule.for_duration:
        lines.append(f"for: {rule.for_duration}s")
    if rule.labels:
        lines.append("labels: " + ", ".join(f"{k}={v}" for k, v in rule.labels.items()))
    return "\n".join(lines) + "\n"


def split_documents(text: str) -> list[tuple[int, str]]:
    """Split a rule file into ``(first_line, document)`` pairs, dropping blank documents."""
    docs: list[tuple[int, str]] = []
    start, buf = 1, []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.strip() == DOCUMENT_SEPARATOR:
            docs.append((start, "\n".join(buf)))
            start, buf = lineno + 1, []
        else:
            buf.append(line)
    docs.append((start, "\n".join(buf)))
    return [(ln, d) for ln, d in docs if any(l.strip() and not l.strip().startswith("#") for l in d.split("\n"))]


def parse_rules(text: str) -> list[AlertRule]:
    """Parse every document of a rule file; stops at the first error."""
    return [parse_rule(doc, first_line=ln) for ln, doc in split_documents(text)]


def join_documents(rules: Iterable[AlertRule]) -> str:
    return f"{DOCUMENT_SEPARATOR}\n".join(format_rule(r) for r in rules)


@dataclass(frozen=True)
class Diagnostic:
    document: int
    severity: str  # "error" or "warning"
    code: str
    message: str
    line: int | None = None
    column: int | None = None

    def __str__(self):
        where = f"{self.line}:{self.column}" if self.line is not None else f"rule {self.document}"
        return f"{where}: {self.severity}: {self.message} [{self.code}]"


def _keyword_position(text: str, key: str, first_line: int) -> tuple[int | None, int | None]:
    for i, raw in enumerate(text.splitlines()):
        stripped = raw.lstrip()
        if stripped.startswith(key) and stripped[len(key):].lstrip().startswith(":"):
            return first_line + i, len(raw) - len(stripped) + 1
    return None, None


def lint_rules(documents: Iterable[str | tuple[int, str]],
               ratio_metrics: Iterable[str] = RATIO_METRICS) -> list[Diagnostic]:
    """Check a set of rule documents. Never raises.

    ``documents`` may be plain strings or ``(first_line, text)`` pairs as
    returned by :func:`split_documents`.
    """
    ratio_metrics = frozenset(ratio_metrics)
    out: list[Diagnostic] = []
    first_seen: dict[str, int] = {}
    for idx, doc in enumerate(documents):
        first_line, text = doc if isinstance(doc, tuple) else (1, doc)
        try:
            rule = parse_rule(text, first_line=first_line)
        except (RuleSyntaxError, RuleValueError) as exc:
            code = "syntax" if isinstance(exc, RuleSyntaxError) else "value"
            out.append(Diagnostic(idx, "error", code, exc.message, exc.line, exc.column))
            continue
        except ValueError as exc:
            out.append(Diagnostic(idx, "error", "value", str(exc)))
            continue
        if rule.name in first_seen:
            out.append(Diagnostic(idx, "error", "duplicate-name",
                                  f"rule name {rule.name!r} already used by rule {first_seen[rule.name]}",
                                  *_keyword_position(text, "alert", first_line)))
        else:
            first_seen[rule.name] = idx
        if rule.metric in ratio_metrics and not 0.0 <= rule.threshold <= 1.0:
            out.append(Diagnostic(idx, "warning", "threshold-range",
                                  f"threshold {rule.threshold!r} is outside [0, 1] for ratio metric {rule.metric!r}",
                                  *_keyword_position(text, "expr", first_line)))
    return out


def lint_text(text: str, ratio_metrics: Iterable[str] = RATIO_METRICS) -> list[Diagnostic]:
    return lint_rules(split_documents(text), ratio_metrics)
