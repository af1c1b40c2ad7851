import math

import pytest
from hypothesis import given, strategies as st

from gymrec.beacon import (ADVERTISING, IDLE, MAX_COUNT, AccelSample, BeaconState,
                           CounterOverflow, InterruptConfig, PowerProfile, average_current_ma,
                           battery_life_days, detect_interrupts, load_trace_csv, rotate_axes,
                           run_beacon, step_beacon, synth_set_trace, write_trace_csv)
from gymrec.codec import EquipmentType

LEG_CURL = EquipmentType(bytes(range(16)), "leg_curl")
Z_CFG = InterruptConfig("z", "positive", threshold=1.0, debounce=2.0)


def fresh(instance=0):
    return BeaconState(instance, LEG_CURL)


def sinusoid(amplitude, period, duration, rate=100.0):
    n = int(round(duration * rate))
    return [AccelSample(i / rate, 0.0, 0.0, amplitude * math.sin(2 * math.pi * i / rate / period))
            for i in range(n)]


# -- detect_interrupts ----------------------------------------------------------

def test_flat_trace_never_fires():
    trace = [AccelSample(i * 0.1, 0.0, 0.0, 0.0) for i in range(200)]
    assert detect_interrupts(trace, Z_CFG) == []


def test_empty_trace():
    assert detect_interrupts([], Z_CFG) == []


def test_sinusoid_closed_form():
    # oracle: 1.5 sin(2 pi t / 5) >= 1 on [t0 + 5k, 5/2 - t0 + 5k] with
    # t0 = 5 asin(2/3) / (2 pi); each excursion lasts < 2 s debounce, so one
    # interrupt per period, at the first sample at or after t0 + 5k
    t0 = 5 * math.asin(2 / 3) / (2 * math.pi)
    width = 2.5 - 2 * t0
    assert width < 2.0
    expected = [t0 + 5 * k for k in range(4) if t0 + 5 * k < 20]
    assert len(expected) == 4

    fired = detect_interrupts(sinusoid(1.5, 5.0, 20.0), Z_CFG)
    assert len(fired) == 4
    for got, want in zip(fired, expected):
        assert want <= got < want + 0.01 + 1e-9


def test_threshold_is_inclusive():
    assert detect_interrupts([AccelSample(0.0, 0.0, 0.0, 1.0)], Z_CFG) == [0.0]
    assert detect_interrupts([AccelSample(0.0, 0.0, 0.0, 0.999)], Z_CFG) == []


def test_direction_and_axis():
    trace = [AccelSample(0.0, -1.2, 0.0, 0.0), AccelSample(3.0, 1.2, 0.0, 0.0)]
    assert detect_interrupts(trace, InterruptConfig("x", "negative", 1.0, 2.0)) == [0.0]
    assert detect_interrupts(trace, InterruptConfig("x", "positive", 1.0, 2.0)) == [3.0]
    assert detect_interrupts(trace, Z_CFG) == []


def test_debounce_suppresses_and_rearms():
    trace = [AccelSample(t, 0, 0, 2.0) for t in (0.0, 1.0, 1.99, 2.0, 3.0, 4.5)]
    assert detect_interrupts(trace, Z_CFG) == [0.0, 2.0, 4.5]


def test_trace_must_increase():
    with pytest.raises(ValueError):
        detect_interrupts([AccelSample(1.0, 0, 0, 0), AccelSample(1.0, 0, 0, 0)], Z_CFG)


@pytest.mark.parametrize("kwargs", [{"threshold": 0}, {"debounce": 0}, {"axis": "w"},
                                    {"direction": "up"}])
def test_interrupt_config_validation(kwargs):
    with pytest.raises(ValueError):
        InterruptConfig(**kwargs)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=60), st.floats(-1e4, 1e4))
def test_interrupt_count_shift_invariant(values, shift):
    trace = [AccelSample(i * 0.25, 0.0, 0.0, v) for i, v in enumerate(values)]
    shifted = [s._replace(t=s.t + shift) for s in trace]
    assert len(detect_interrupts(trace, Z_CFG)) == len(detect_interrupts(shifted, Z_CFG))


# -- synthetic traces ---------------------------------------------------------

def test_synth_trace_one_interrupt_per_rep():
    trace = synth_set_trace(10.0, 7, 3.0, Z_CFG)
    fired = detect_interrupts(trace, Z_CFG)
    assert len(fired) == 7
    for k, t in enumerate(fired):
        assert t == pytest.approx(10.0 + 3.0 * k)


def test_displacement_silences_interrupts():
    trace = synth_set_trace(0.0, 10, 3.0, Z_CFG, displaced=[(16.5, math.inf)])
    assert len(detect_interrupts(trace, Z_CFG)) == 6


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_rotation_moves_signal_off_axis(axis):
    values = {"x": (1.5, 0, 0), "y": (0, 1.5, 0), "z": (0, 0, 1.5)}[axis]
    about = {"x": "y", "y": "z", "z": "x"}[axis]
    rotated = rotate_axes(AccelSample(0.0, *values), about)
    assert rotated.axis(axis) == 0


def test_csv_roundtrip(tmp_path):
    trace = synth_set_trace(0.0, 2, 3.0, Z_CFG)
    write_trace_csv(tmp_path / "t.csv", trace)
    assert load_trace_csv(tmp_path / "t.csv") == trace


def test_csv_missing_column(tmp_path):
    (tmp_path / "t.csv").write_text("t,ax,ay\n0,0,0\n")
    with pytest.raises(ValueError, match="az"):
        load_trace_csv(tmp_path / "t.csv")


# -- step_beacon ----------------------------------------------------------------

def test_four_reps_eight_packets():
    state, emissions = run_beacon(fresh(), [0.0, 5.0, 10.0, 15.0])
    assert len(emissions) == 8
    assert all(0 <= e.t < 20 for e in emissions)
    assert [e.frame.minor for e in emissions] == [1, 1, 2, 2, 3, 3, 4, 4]
    assert state.rep_count == 4


def test_double_advertisement_spacing():
    _, emissions = step_beacon(fresh(3), 7.0, True)
    assert [e.t for e in emissions] == [7.0, pytest.approx(7.1)]
    assert emissions[0].frame == emissions[1].frame
    assert emissions[0].frame.major == 3
    assert emissions[0].frame.uuid == LEG_CURL.uuid


def test_reset_after_five_seconds():
    state, _ = step_beacon(fresh(), 0.0, True)
    state, emitted = step_beacon(state, 5.1)
    assert (state.rep_count, state.mode, emitted) == (0, IDLE, [])


def test_no_reset_at_exactly_five_seconds():
    state, _ = step_beacon(fresh(), 0.0, True)
    state, _ = step_beacon(state, 5.0)
    assert (state.rep_count, state.mode) == (1, ADVERTISING)
    state, _ = step_beacon(state, 5.0, True)
    assert state.rep_count == 2


def test_new_set_starts_from_one():
    state, _ = run_beacon(fresh(), [0.0, 3.0])
    state, emitted = step_beacon(state, 20.0, True)
    assert state.rep_count == 1
    assert emitted[0].frame.minor == 1


def test_idle_steps_are_identity():
    state = fresh()
    for t in (0.0, 10.0, 100.0):
        new, emitted = step_beacon(state, t)
        assert new == state and emitted == []


def test_time_must_not_go_backwards():
    state, _ = step_beacon(fresh(), 10.0, True)
    with pytest.raises(ValueError):
        step_beacon(state, 9.0)


def test_counter_clamps_at_16_bits():
    state = BeaconState(0, LEG_CURL, rep_count=MAX_COUNT, last_interrupt_t=0.0, mode=ADVERTISING)
    with pytest.warns(CounterOverflow):
        state, emitted = step_beacon(state, 1.0, True)
    assert state.rep_count == MAX_COUNT
    assert emitted[0].frame.minor == MAX_COUNT


gaps = st.lists(st.floats(0.05, 12.0, allow_nan=False), min_size=1, max_size=25)


def _times(start, gap_list):
    out, t = [], start
    for g in gap_list:
        t += g
        out.append(t)
    return out


@given(gaps, st.floats(0.0, 20.0))
def test_reset_rule(gap_list, query_delay):
    times = _times(0.0, gap_list)
    state, _ = run_beacon(fresh(), times)
    # interrupts since the last reset: walk back while gaps stay <= 5 s
    since_reset = 1
    for a, b in zip(reversed(times[:-1]), reversed(times[1:])):
        if b - a > 5.0:
            break
        since_reset += 1
    state, _ = step_beacon(state, times[-1] + query_delay)
    if query_delay > 5.0:
        assert state.rep_count == 0 and state.mode == IDLE
    else:
        assert state.rep_count == since_reset


@given(gaps)
def test_emissions_twice_interrupts_and_minor_steps_by_one(gap_list):
    times = _times(0.0, gap_list)
    _, emissions = run_beacon(fresh(), times)
    assert len(emissions) == 2 * len(times)
    minors = [e.frame.minor for e in emissions[::2]]
    for prev, cur, (a, b) in zip(minors, minors[1:], zip(times, times[1:])):
        assert cur == (prev + 1 if b - a <= 5.0 else 1)


# -- power ------------------------------------------------------------------------

def test_reference_profile_battery():
    # 168 mAh / (6 h * 0.04 mA + 18 h * 0.03 mA) = 168 / 0.78 per day
    assert battery_life_days(PowerProfile()) == pytest.approx(168 / 0.78)
    assert round(battery_life_days(PowerProfile()), 1) == 215.4


def test_idle_only_battery():
    p = PowerProfile(idle_current=0.03, advertising_hours_per_day=0.0,
                     battery_capacity=168.0, usable_fraction=1.0)
    assert battery_life_days(p) == pytest.approx(168 / 0.72)
    assert round(battery_life_days(p), 1) == 233.3


def test_average_current_between_mode_currents():
    p = PowerProfile()
    assert p.idle_current < average_current_ma(p) < p.advertising_current


@pytest.mark.parametrize("kwargs", [{"idle_current": 0}, {"usable_fraction": 1.2},
                                    {"usable_fraction": 0}, {"advertising_hours_per_day": 25},
                                    {"battery_capacity": -1}])
def test_power_profile_validation(kwargs):
    with pytest.raises(ValueError):
        PowerProfile(**kwargs)


@given(st.floats(0, 24), st.floats(0.5, 2.0))
def test_battery_scales_with_capacity(hours, factor):
    p = PowerProfile(advertising_hours_per_day=hours)
    q = PowerProfile(advertising_hours_per_day=hours, battery_capacity=210.0 * factor)
    assert battery_life_days(q) == pytest.approx(factor * battery_life_days(p))
