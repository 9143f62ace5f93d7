"""
Moving averages and the hold timer
==================================

How a windowed mean smooths a pulse, and why ``for:`` suppresses alerts
that dip for a single evaluation.
"""

from alertlab.evaluator import evaluate_rule
from alertlab.rulelang import parse_rule
from alertlab.timeseries import TimeSeries, window_average

# A 60 s pulse of 30 % errors, sampled every 5 s.
values = [0.0] * 60 + [0.3] * 12 + [0.0] * 60
pulse = TimeSeries.from_values("errorRate", values, scrape_interval=5)

# The peak of a W-second mean over a w-second pulse is h * min(1, w / W):
# the wider the window, the flatter the pulse.
for window in (30, 60, 90, 120, 240):
    peak = max(window_average(pulse, t, window) for t in pulse.timestamps.tolist())
    print(f"window {window:>3}s  peak {peak:.4f}  expected {0.3 * min(1, 60 / window):.4f}")

# Next, a signal that stays high for 55 s, drops for one scrape, then rises again.
values = [0.0] * 4 + [0.05] * 11 + [0.0] + [0.05] * 11 + [0.0] * 4
flappy = TimeSeries.from_values("errorRate", values)
t_end = int(flappy.timestamps[-1])

instant = parse_rule("alert: Instant\nexpr: errorRate[5s] > 0.03")
held = parse_rule("alert: Held\nexpr: errorRate[5s] > 0.03\nfor: 60s")

# Without a hold time each high stretch fires. With one, the single low
# sample resets the timer, neither stretch lasts 60 s, and nothing fires.
print(evaluate_rule(instant, flappy, t_end))
print(evaluate_rule(held, flappy, t_end))
