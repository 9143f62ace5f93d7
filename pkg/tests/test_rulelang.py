import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alertlab.rulelang import (AlertRule, RuleSyntaxError, RuleValueError, format_rule, lint_rules, lint_text,
                               parse_rule, parse_rules, split_documents)

from conftest import REFERENCE_RULES


def test_baseline_rule():
    r = parse_rule("alert: HighErrorRate\nexpr: errorRate[90s] > 0.03")
    assert r == AlertRule("HighErrorRate", "errorRate", 90, ">", 0.03, 0)


def test_duration_rule():
    r = parse_rule("alert: HighErrorRate\nexpr: errorRate[90s] > 0.03\nfor: 60s")
    assert r == AlertRule("HighErrorRate", "errorRate", 90, ">", 0.03, 60)


def test_wider_window_rule():
    r = parse_rule("alert: HighErrorRate\nexpr: errorRate[120s] > 0.03")
    assert (r.window, r.for_duration) == (120, 0)


def test_minutes_normalise():
    r = parse_rule("alert: A\nexpr: errorRate[2m] >= 0.03")
    assert (r.window, r.comparator) == (120, ">=")
    assert parse_rule("alert: A\nexpr: x[60s] > 1\nfor: 1m") == parse_rule("alert: A\nexpr: x[1m] > 1\nfor: 60s")


@pytest.mark.parametrize("text", [
    "alert:HighErrorRate\nexpr:errorRate[90s]>0.03",
    "  alert :  HighErrorRate  \n\texpr: errorRate [ 90s ] >   0.03   ",
    "expr: errorRate[90s] > 0.03\nalert: HighErrorRate",
    "# comment\n\nalert: HighErrorRate\r\nexpr: errorRate[90s] > 0.03\r\n",
])
def test_whitespace_and_order_insensitive(text):
    assert parse_rule(text) == AlertRule("HighErrorRate", "errorRate", 90, ">", 0.03)


@pytest.mark.parametrize("cmp", [">", ">=", "<", "<="])
def test_comparators(cmp):
    assert parse_rule(f"alert: A\nexpr: errorRate[90s] {cmp} 0.5").comparator == cmp


def test_zero_window_is_a_value_error():
    with pytest.raises(ValueError, match="window must be positive") as info:
        parse_rule("alert: A\nexpr: errorRate[0s] > 0.1")
    assert info.value.line == 2


@pytest.mark.parametrize("text, line, col", [
    ("alert: A\nexpr: errorRate[90h] > 0.1", 2, 19),
    ("alert: A\nexpr: errorRate[90s] > inf", 2, 24),
    ("alert: A\nexpr: errorRate[90s] > nan", 2, 24),
    ("alert: A\nexpr: errorRate[90s] > 1e999", 2, 24),
])
def test_value_errors_have_positions(text, line, col):
    with pytest.raises(RuleValueError) as info:
        parse_rule(text)
    assert (info.value.line, info.value.column) == (line, col)


@pytest.mark.parametrize("text, line", [
    ("alert: A", 1),
    ("alert: A\nalert: B\nexpr: e[1s] > 1", 2),
    ("alert: A\nexpr: e[90s] > 0.1\nfor: 60", 3),
    ("alert: A\nexpr: e[90] > 0.1", 2),
    ("alert: A\nexpr: e[90s] = 0.1", 2),
    ("alert: A\nexpr: e[90s] > 0.1 and more", 2),
    ("alert: 1A\nexpr: e[90s] > 0.1", 1),
    ("alert: A\nexpr: e[-5s] > 0.1", 2),
    ("alert: A\nseverity: page\nexpr: e[5s] > 0.1", 2),
    ("alert: A\nexpr: sum(e[5s]) > 0.1", 2),
])
def test_syntax_errors_have_positions(text, line):
    with pytest.raises(RuleSyntaxError) as info:
        parse_rule(text)
    assert info.value.line == line
    assert info.value.column >= 1


def test_zero_window_reported_even_without_alert_line():
    with pytest.raises(ValueError, match="window must be positive") as info:
        parse_rule("expr: errorRate[0s] > 0.1")
    assert (info.value.line, info.value.column) == (1, 17)


def test_format_omits_zero_for():
    text = format_rule(AlertRule("A", "errorRate", 90, ">", 0.03))
    assert "for:" not in text
    assert text == "alert: A\nexpr: errorRate[90s] > 0.03\n"


@pytest.mark.parametrize("name", sorted(REFERENCE_RULES))
def test_reference_rules_round_trip(name):
    r = parse_rule(REFERENCE_RULES[name])
    assert parse_rule(format_rule(r)) == r


def test_labels_round_trip():
    r = parse_rule("alert: A\nexpr: e[5s] > 1\nlabels: severity=page, team=sre-core")
    assert r.labels == {"severity": "page", "team": "sre-core"}
    assert parse_rule(format_rule(r)) == r


idents = st.from_regex(r"\A[A-Za-z_][A-Za-z0-9_]{0,12}\Z")
rules = st.builds(
    AlertRule,
    name=idents,
    metric=idents,
    window=st.integers(1, 10**6),
    comparator=st.sampled_from([">", ">=", "<", "<="]),
    threshold=st.floats(allow_nan=False, allow_infinity=False),
    for_duration=st.integers(0, 10**6),
    labels=st.dictionaries(idents, st.from_regex(r"\A[A-Za-z0-9_.:/-]{1,8}\Z"), max_size=3),
)


@settings(max_examples=300, deadline=None)
@given(rules)
def test_format_parse_identity(rule):
    assert parse_rule(format_rule(rule)) == rule


@settings(max_examples=500, deadline=None)
@given(st.text(max_size=80))
def test_parse_is_total_on_arbitrary_text(text):
    try:
        parse_rule(text)
    except (RuleSyntaxError, RuleValueError) as exc:
        assert exc.line >= 1 and exc.column >= 1


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(["alert:", "expr:", "for:", " A", " errorRate", "[", "]", "90s", "2m", "0s",
                                 " > ", ">=", "0.03", "-1e5", "\n", "---", "#", "labels:", "a=b", ","]),
                max_size=25))
def test_parse_is_total_on_near_miss_token_soup(tokens):
    text = "".join(tokens)
    try:
        parse_rule(text)
    except (RuleSyntaxError, RuleValueError) as exc:
        assert exc.line >= 1 and exc.column >= 1


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**4))
def test_seconds_equal_minutes(m):
    a = parse_rule(f"alert: A\nexpr: e[{60 * m}s] > 0\nfor: {60 * m}s")
    b = parse_rule(f"alert: A\nexpr: e[{m}m] > 0\nfor: {m}m")
    assert a == b


def test_split_documents_keeps_line_numbers():
    text = "alert: A\nexpr: e[5s] > 1\n---\n\nalert: B\nexpr: e[5s] > 1\n---\n"
    docs = split_documents(text)
    assert [ln for ln, _ in docs] == [1, 4]
    assert [r.name for r in parse_rules(text)] == ["A", "B"]


def test_error_lines_are_file_relative():
    text = "alert: A\nexpr: e[5s] > 1\n---\nalert: B\nexpr: e[0s] > 1\n"
    with pytest.raises(ValueError) as info:
        parse_rules(text)
    assert info.value.line == 5


def test_lint_duplicate_names():
    diags = lint_rules(["alert: HighErrorRate\nexpr: errorRate[90s] > 0.03",
                        "alert: HighErrorRate\nexpr: errorRate[120s] > 0.03"])
    assert [(d.document, d.severity, d.code) for d in diags] == [(1, "error", "duplicate-name")]


def test_lint_ratio_threshold_warning():
    diags = lint_rules(["alert: A\nexpr: errorRate[90s] > 1.5"])
    assert [(d.severity, d.code) for d in diags] == [("warning", "threshold-range")]
    assert lint_rules(["alert: A\nexpr: requestRate[90s] > 1.5"]) == []


def test_lint_reference_rules_clean():
    assert lint_rules(list(REFERENCE_RULES.values())) == []


def test_lint_collects_parse_errors_without_raising():
    diags = lint_text("alert: A\nexpr: e[5s] > 1\n---\nalert: B\nexpr: e[5s] >\n---\nalert: A\nexpr: e[5s] > 2\n")
    assert [(d.document, d.code, d.line) for d in diags] == [(1, "syntax", 5), (2, "duplicate-name", 7)]
