from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alertlab import timeseries as tsm
from alertlab.errors import GridError, ParseError
from alertlab.timeseries import TimeSeries, window_average

from oracles import brute_window_mean


def pulse_series(h, w, W, interval=5):
    """0 everywhere except a pulse of height h, w seconds wide, with W of padding each side."""
    n_pad, n_pulse = W // interval + 2, w // interval
    values = [0.0] * n_pad + [h] * n_pulse + [0.0] * n_pad
    return TimeSeries.from_values("errorRate", values, interval)


def test_constant_series_mean():
    s = TimeSeries.from_values("errorRate", [0.05] * 100)
    for t in (0, 5, 90, 300, 495):
        assert window_average(s, t, 90) == pytest.approx(0.05, abs=1e-15)


def test_before_first_sample_is_empty():
    s = TimeSeries.from_values("errorRate", [0.05] * 10, start=100)
    assert window_average(s, 50, 90) is None
    assert window_average(s, 95, 5) is None
    assert window_average(s, 100, 5) == 0.05


def test_window_is_half_open():
    s = TimeSeries.from_values("x", [1.0, 2.0, 3.0, 4.0])  # t = 0, 5, 10, 15
    # (5, 15] holds t=10 and t=15 only
    assert window_average(s, 15, 10) == 3.5
    assert window_average(s, 15, 11) == 3.0


def test_partial_window_uses_present_samples():
    s = TimeSeries.from_values("x", [0.0, 1.0, 1.0] + [0.0] * 20)
    assert window_average(s, 10, 90) == pytest.approx(2 / 3)


def test_rectangular_pulse_peak():
    s = pulse_series(0.3, 60, 90)
    peak = max(window_average(s, int(t), 90) for t in s.timestamps)
    assert peak == pytest.approx(0.3 * 60 / 90, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(h=st.integers(1, 1000).map(lambda k: k / 1000), w=st.integers(1, 30), W=st.integers(1, 30))
def test_pulse_peak_matches_brute_force(h, w, W):
    w, W = 5 * w, 5 * W
    s = pulse_series(h, w, W)
    samples = list(zip(s.timestamps.tolist(), s.values.tolist()))
    fast = max(window_average(s, t, W) for t in s.timestamps.tolist())
    slow = max(brute_window_mean(samples, t, W) for t in s.timestamps.tolist())
    assert fast == pytest.approx(float(slow), rel=1e-12)
    assert fast == pytest.approx(h * min(1, w / W), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.floats(0, 1), min_size=1, max_size=40), data=st.data())
def test_single_interval_window_is_the_sample(values, data):
    s = TimeSeries.from_values("x", values)
    t = data.draw(st.sampled_from(s.timestamps.tolist()))
    assert window_average(s, t, s.scrape_interval) == s.value_at(t)


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.floats(0, 1), min_size=1, max_size=40),
       t=st.integers(0, 250), window=st.integers(1, 120))
def test_mean_bounded_by_window_extremes(values, t, window):
    s = TimeSeries.from_values("x", values)
    m = window_average(s, t, window)
    inside = [v for ts, v in s if t - window < ts <= t]
    if not inside:
        assert m is None
    else:
        assert min(inside) - 1e-15 <= m <= max(inside) + 1e-15
        assert m == pytest.approx(float(sum(map(Fraction, inside)) / len(inside)), abs=1e-15)


def test_label_order_does_not_matter():
    a = TimeSeries.from_values("x", [0.1, 0.2, 0.3], labels={"a": "1", "b": "2"})
    b = TimeSeries.from_values("x", [0.1, 0.2, 0.3], labels={"b": "2", "a": "1"})
    assert window_average(a, 10, 15) == window_average(b, 10, 15)
    assert a == b


def test_slice_identity_and_degenerate():
    s = TimeSeries.from_values("errorRate", np.linspace(0, 1, 21), labels={"service": "frontend"})
    assert tsm.slice(s, 0, int(s.timestamps[-1])) == s
    one = tsm.slice(s, 10, 10)
    assert len(one) == 1 and one.labels == s.labels and one.scrape_interval == 5
    assert len(tsm.slice(s, 11, 11)) == 0
    empty = TimeSeries.from_values("x", [])
    assert len(tsm.slice(empty, 0, 100)) == 0


def test_slice_rejects_bad_bounds():
    s = TimeSeries.from_values("x", [1.0])
    with pytest.raises(ValueError):
        tsm.slice(s, 10, 5)


def test_grid_is_enforced():
    with pytest.raises(GridError):
        TimeSeries("x", np.array([0, 5, 15]), np.array([1.0, 1.0, 1.0]), 5)
    with pytest.raises(GridError):
        TimeSeries("x", np.array([3, 8]), np.array([1.0, 1.0]), 5)
    with pytest.raises(ValueError):
        TimeSeries.from_values("x", [1.0, float("nan")])
    with pytest.raises(ValueError):
        TimeSeries.from_values("x", [1.5], ratio=True)


def test_series_is_immutable():
    s = TimeSeries.from_values("x", [1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 3.0


def test_csv_round_trip(tmp_path):
    s = TimeSeries.from_values("errorRate", [0.005, 0.123456789, 1.0, 0.0], 5, start=10,
                               labels={"service": "frontend"}, ratio=True)
    path = tsm.write_series_csv(s, tmp_path / "e.csv")
    text = path.read_text()
    assert text.splitlines()[0].startswith("# series: ")
    assert text.splitlines()[1] == "timestamp,value"
    assert text.splitlines()[2] == "10,0.005000000"
    assert tsm.load_series_csv(path) == s


def test_csv_without_sidecar_line(tmp_path):
    p = tmp_path / "latency.csv"
    p.write_text("timestamp,value\n0,1.5\n10,2.5\n")
    s = tsm.load_series_csv(p)
    assert s.name == "latency" and s.scrape_interval == 10 and len(s) == 2


@pytest.mark.parametrize("body, err, line", [
    ("timestamp,value\n0,1\n5,1\n0,1\n", GridError, 4),
    ("timestamp,value\n0,1\n5,1\n15,1\n", GridError, 4),
    ("timestamp,value\n0,1\n5,abc\n", ParseError, 3),
    ("timestamp,value\n0.5,1\n", ParseError, 2),
    ("time,val\n0,1\n", ParseError, 1),
])
def test_csv_errors_carry_line(tmp_path, body, err, line):
    p = tmp_path / "s.csv"
    p.write_text('# series: {"name": "x", "scrape_interval": 5}\n' + body)
    with pytest.raises(err) as info:
        tsm.load_series_csv(p)
    assert info.value.line == line + 1
