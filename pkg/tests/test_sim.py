import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alertlab import sim
from alertlab.errors import NonPositiveInterval, ParseError, ScheduleOverlap
from alertlab.sim import ErrorModel, FaultPatternSpec, FaultWindow, WorkloadSpec
from alertlab.timeseries import load_series_csv, write_series_csv

QUIET = ErrorModel(noise_std=0.0, ramp=0)


def test_reference_schedule_layout():
    pattern = FaultPatternSpec(phases=((60, 0.10), (60, 0.18), (60, 0.25)), inter_phase_gap=60,
                               repetitions=6, cooldown=240, first_start=120)
    windows = sim.build_fault_schedule(pattern)
    assert len(windows) == 18
    assert pattern.repetition_length == 300
    rep_starts = [w.start for w in windows[::3]]
    assert rep_starts == [120 + 540 * k for k in range(6)]
    assert rep_starts[:3] == [120, 660, 1200]
    assert [(w.start, w.end, w.magnitude) for w in windows[:3]] == [(120, 180, 0.10), (240, 300, 0.18),
                                                                    (360, 420, 0.25)]
    for a, b in zip(windows, windows[1:]):
        assert a.end <= b.start


def test_single_phase_single_window():
    w = sim.build_fault_schedule(FaultPatternSpec(phases=((45, 0.2),), repetitions=1, first_start=30))
    assert w == [FaultWindow("packet_loss", 30, 75, 0.2)]


def test_zero_gap_abuts():
    w = sim.build_fault_schedule(FaultPatternSpec(phases=((10, 0.1), (10, 0.2)), inter_phase_gap=0,
                                                  repetitions=2, cooldown=0))
    assert [(x.start, x.end) for x in w] == [(120, 130), (130, 140), (140, 150), (150, 160)]
    sim.check_schedule(w)


def test_no_fault_no_noise_is_flat():
    series, _ = sim.simulate(WorkloadSpec(), [], QUIET, 5, seed=1)
    assert np.all(series["errorRate"].values == 0.005)
    assert np.all(series["requestRate"].values == 400.0)


def test_step_transfer_inside_window():
    w = FaultWindow("packet_loss", 100, 200, 0.25)
    series, _ = sim.simulate(WorkloadSpec(duration=400), [w], QUIET, 5, seed=1)
    er = series["errorRate"]
    for t, v in er:
        expected = 0.205 if 100 <= t < 200 else 0.005
        assert v == pytest.approx(expected, abs=1e-12), t


def test_ramp_shapes_onset_and_decay():
    w = FaultWindow("packet_loss", 100, 160, 0.25)
    series, _ = sim.simulate(WorkloadSpec(duration=300), [w], ErrorModel(noise_std=0.0, ramp=10), 5, seed=0)
    er = series["errorRate"]
    assert er.value_at(100) == pytest.approx(0.005)
    assert er.value_at(105) == pytest.approx(0.005 + 0.8 * 0.25 * 0.5)
    assert er.value_at(110) == pytest.approx(0.205)
    assert er.value_at(155) == pytest.approx(0.005 + 0.8 * 0.25 * 0.5)
    assert er.value_at(160) == pytest.approx(0.005)


def test_same_seed_same_bytes(tmp_path):
    sched = sim.build_fault_schedule(FaultPatternSpec())
    a, _ = sim.simulate(WorkloadSpec(), sched, ErrorModel(), 5, seed=42)
    b, _ = sim.simulate(WorkloadSpec(), sched, ErrorModel(), 5, seed=42)
    for name in a:
        pa = write_series_csv(a[name], tmp_path / f"a_{name}.csv")
        pb = write_series_csv(b[name], tmp_path / f"b_{name}.csv")
        assert pa.read_bytes() == pb.read_bytes()


def test_seeds_differ_only_in_noise():
    sched = sim.build_fault_schedule(FaultPatternSpec())
    a, _ = sim.simulate(WorkloadSpec(), sched, ErrorModel(), 5, seed=1)
    b, _ = sim.simulate(WorkloadSpec(), sched, ErrorModel(), 5, seed=2)
    assert not np.array_equal(a["errorRate"].values, b["errorRate"].values)
    qa, _ = sim.simulate(WorkloadSpec(), sched, QUIET, 5, seed=1)
    qb, _ = sim.simulate(WorkloadSpec(), sched, QUIET, 5, seed=2)
    assert qa["errorRate"] == qb["errorRate"]


def test_negative_and_huge_seeds():
    for seed in (-1, 2**63 - 1, -(2**63)):
        series, _ = sim.simulate(WorkloadSpec(duration=100), [], ErrorModel(), 5, seed=seed)
        assert len(series["errorRate"]) == 21


@settings(max_examples=60, deadline=None)
@given(base=st.floats(0, 1), gain=st.floats(0, 50), noise=st.floats(0, 5), mag=st.floats(0, 1),
       ramp=st.integers(0, 40), seed=st.integers(-2**63, 2**63 - 1))
def test_error_rate_always_clamped(base, gain, noise, mag, ramp, seed):
    model = ErrorModel(base, gain, noise, ramp)
    series, _ = sim.simulate(WorkloadSpec(duration=200, warmup=0), [FaultWindow("x", 20, 120, mag)], model, 5, seed)
    v = series["errorRate"].values
    assert np.all((v >= 0) & (v <= 1))


@settings(max_examples=60, deadline=None)
@given(m1=st.floats(0, 1), m2=st.floats(0, 1), g1=st.floats(0, 3), g2=st.floats(0, 3))
def test_zero_noise_monotone_in_magnitude_and_gain(m1, m2, g1, g2):
    (m1, m2), (g1, g2) = sorted((m1, m2)), sorted((g1, g2))

    def er(m, g):
        series, _ = sim.simulate(WorkloadSpec(duration=200, warmup=0), [FaultWindow("x", 20, 120, m)],
                                 ErrorModel(0.005, g, 0.0, 10), 5, 0)
        return series["errorRate"].values

    assert np.all(er(m1, g1) <= er(m2, g1))
    assert np.all(er(m1, g1) <= er(m1, g2))


def test_default_phases_detectable_by_construction():
    for mag in (0.10, 0.18, 0.25):
        w = FaultWindow("packet_loss", 100, 160, mag)
        series, _ = sim.simulate(WorkloadSpec(duration=300), [w], ErrorModel(noise_std=0.0), 5, 0)
        inside = [v for t, v in series["errorRate"] if 110 <= t < 150]
        assert min(inside) >= 0.085 - 1e-12 > 0.03


def test_overlap_and_interval_errors():
    with pytest.raises(ScheduleOverlap):
        sim.simulate(WorkloadSpec(), [FaultWindow("x", 100, 200, 0.1), FaultWindow("x", 150, 250, 0.1)],
                     ErrorModel(), 5, 0)
    with pytest.raises(NonPositiveInterval):
        sim.simulate(WorkloadSpec(), [], ErrorModel(), 0, 0)
    with pytest.raises(NonPositiveInterval):
        FaultWindow("x", 100, 100, 0.1)


def test_parameter_validation():
    with pytest.raises(ValueError):
        WorkloadSpec(duration=10, warmup=10)
    with pytest.raises(ValueError):
        ErrorModel(noise_std=-0.1)
    with pytest.raises(ValueError):
        FaultPatternSpec(repetitions=0)
    with pytest.raises(ValueError):
        FaultWindow("x", 0, 10, 1.5)


def test_series_csv_round_trip(tmp_path):
    series, _ = sim.simulate(WorkloadSpec(), sim.build_fault_schedule(FaultPatternSpec()), ErrorModel(), 5, 3)
    for s in series.values():
        assert load_series_csv(write_series_csv(s, tmp_path / f"{s.name}.csv")) == s


def test_schedule_csv_round_trip(tmp_path):
    sched = sim.build_fault_schedule(FaultPatternSpec())
    p = sim.write_fault_schedule_csv(sched, tmp_path / "schedule.csv")
    assert p.read_text().splitlines()[:2] == ["treatment,start,end,magnitude", "packet_loss,120,180,0.100000000"]
    assert sim.load_fault_schedule_csv(p) == sched


def test_schedule_csv_errors(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("treatment,start,end,magnitude\nx,100,200,0.1\nx,150,250,0.1\n")
    with pytest.raises(ScheduleOverlap):
        sim.load_fault_schedule_csv(p)
    p.write_text("treatment,start,end,magnitude\nx,100,abc,0.1\n")
    with pytest.raises(ParseError) as info:
        sim.load_fault_schedule_csv(p)
    assert info.value.line == 2
    p.write_text("treatment,start,end,magnitude\nx,200,100,0.1\n")
    with pytest.raises(ParseError):
        sim.load_fault_schedule_csv(p)
