"""
Writing and linting alert rules
===============================

A rule is a small text document: a name, one threshold expression over a
moving average, and an optional hold time.
"""

from alertlab.rulelang import format_rule, lint_text, parse_rule, parse_rules

text = """
alert: HighErrorRate
expr: errorRate[90s] > 0.03
for: 1m
"""
rule = parse_rule(text)
print(rule)

# Durations are normalised to seconds, so ``1m`` and ``60s`` are the same rule.
print(rule.for_duration, rule == parse_rule(text.replace("1m", "60s")))

# format_rule writes the canonical form back out; parsing it again is lossless.
print(format_rule(rule))
assert parse_rule(format_rule(rule)) == rule

# Errors point at a line and column.
try:
    parse_rule("alert: Broken\nexpr: errorRate[90] > 0.03")
except SyntaxError as exc:
    print(f"line {exc.line}, column {exc.column}: {exc.message}")

# A rule file holds several documents separated by ``---``.
bundle = """\
alert: Base90
expr: errorRate[90s] > 0.03
---
alert: Base90
expr: errorRate[120s] > 3
"""
for diag in lint_text(bundle):
    print(diag)

print([r.name for r in parse_rules(bundle.replace("Base90\nexpr: errorRate[120s]", "Other\nexpr: errorRate[120s]"))])
