"""Equipment-mounted beacon: interrupt detection, rep counting, power budget."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .codec import DEFAULT_MEASURED_POWER, EquipmentType, IBeaconFrame

RESET_WINDOW = 5.0
ADVERT_GAP = 0.1
MAX_COUNT = 0xFFFF

IDLE = "idle"
ADVERTISING = "advertising"

_AXES = ("x", "y", "z")


class AccelSample(NamedTuple):
    t: float
    ax: float
    ay: float
    az: float

    def axis(self, name: str) -> float:
        return (self.ax, self.ay, self.az)[_AXES.index(name)]


@dataclass(frozen=True)
class InterruptConfig:
    axis: str = "z"
    direction: str = "positive"
    threshold: float = 1.0
    debounce: float = 2.0

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of {_AXES}")
        if self.direction not in ("positive", "negative"):
            raise ValueError("direction must be 'positive' or 'negative'")
        if self.threshold <= 0 or self.debounce <= 0:
            raise ValueError("threshold and debounce must be > 0")

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "positive" else -1.0


class CounterOverflow(UserWarning):
    """Repetition count hit the 16-bit ceiling of the minor field."""


@dataclass(frozen=True)
class BeaconState:
    instance: int
    equipment: EquipmentType
    rep_count: int = 0
    last_interrupt_t: float | None = None
    mode: str = IDLE
    measured_power: int = DEFAULT_MEASURED_POWER

    def frame(self) -> IBeaconFrame:
        return IBeaconFrame(self.equipment.uuid, self.instance, self.rep_count,
                            self.measured_power)


@dataclass(frozen=True)
class Emission:
    t: float
    frame: IBeaconFrame


def detect_interrupts(trace: Sequence[AccelSample], cfg: InterruptConfig) -> list[float]:
    """Times at which the accelerometer would raise its threshold interrupt.

    A sample fires when the signed reading on ``cfg.axis`` is at or past the
    threshold and at least ``cfg.debounce`` seconds have passed since the
    previous interrupt.
    """
    fired: list[float] = []
    last = None
    prev_t = None
    for s in trace:
        if prev_t is not None and s.t <= prev_t:
            raise ValueError(f"trace not strictly increasing at t={s.t}")
        prev_t = s.t
        if cfg.sign * s.axis(cfg.axis) >= cfg.threshold:
            if last is None or s.t - last >= cfg.debounce:
                fired.append(s.t)
                last = s.t
    return fired


def step_beacon(state: BeaconState, now: float, interrupt: bool = False, *,
                advert_gap: float = ADVERT_GAP,
                reset_window: float = RESET_WINDOW) -> tuple[BeaconState, list[Emission]]:
    if state.last_interrupt_t is not None and now < state.last_interrupt_t:
        raise ValueError("beacon time went backwards")

    if (state.mode == ADVERTISING and state.last_interrupt_t is not None
            and now - state.last_interrupt_t > reset_window):
        state = replace(state, rep_count=0, mode=IDLE)

    if not interrupt:
        return state, []

    count = state.rep_count + 1
    if count > MAX_COUNT:
        warnings.warn(CounterOverflow(f"{state.equipment.name}#{state.instance}"),
                      stacklevel=2)
        count = MAX_COUNT
    state = replace(state, rep_count=count, last_interrupt_t=now, mode=ADVERTISING)
    frame = state.frame()
    # double advertisement
    return state, [Emission(now, frame), Emission(now + advert_gap, frame)]


def run_beacon(state: BeaconState, interrupt_times: Iterable[float],
               **kwargs) -> tuple[BeaconState, list[Emission]]:
    """Feed a sequence of interrupts through :func:`step_beacon`."""
    out: list[Emission] = []
    for t in interrupt_times:
        state, emitted = step_beacon(state, t, True, **kwargs)
        out.extend(emitted)
    return state, out


def load_trace_csv(path: str | Path) -> list[AccelSample]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"t", "ax", "ay", "az"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [AccelSample(float(r["t"]), float(r["ax"]), float(r["ay"]), float(r["az"]))
                for r in reader]


def write_trace_csv(path: str | Path, trace: Iterable[AccelSample]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AccelSample._fields)
        writer.writerows(trace)


# -- power ------------------------------------------------------------------

PUBLISHED_BATTERY_DAYS = 400.0


@dataclass(frozen=True)
class PowerProfile:
    idle_current: float = 0.03  # mA
    advertising_current: float = 0.04  # mA
    advertising_hours_per_day: float = 6.0
    battery_capacity: float = 210.0  # mAh, CR2032
    usable_fraction: float = 0.8

    def __post_init__(self):
        if self.idle_current <= 0 or self.advertising_current <= 0:
            raise ValueError("currents must be > 0")
        if not 0 <= self.advertising_hours_per_day <= 24:
            raise ValueError("advertising_hours_per_day must be within [0, 24]")
        if self.battery_capacity <= 0:
            raise ValueError("battery_capacity must be > 0")
        if not 0 < self.usable_fraction <= 1:
            raise ValueError("usable_fraction must be in (0, 1]")


def daily_charge_mah(p: PowerProfile) -> float:
    adv = p.advertising_hours_per_day
    return adv * p.advertising_current + (24.0 - adv) * p.idle_current


def average_current_ma(p: PowerProfile) -> float:
    return daily_charge_mah(p) / 24.0


def battery_life_days(p: PowerProfile) -> float:
    return p.battery_capacity * p.usable_fraction / daily_charge_mah(p)


# -- synthetic traces ---------------------------------------------------------

@dataclass(frozen=True)
class TraceShape:
    sample_rate: float = 50.0
    pulse_width: float = 0.3
    pulse_amplitude: float = 1.5
    lead_in: float = 1.0
    tail: float = 1.0


def rotate_axes(sample: AccelSample, about: str) -> AccelSample:
    """Rotate a reading 90 degrees about one body axis."""
    t, x, y, z = sample
    if about == "x":
        return AccelSample(t, x, -z, y)
    if about == "y":
        return AccelSample(t, z, y, -x)
    return AccelSample(t, -y, x, z)


def synth_set_trace(start: float, reps: int, rep_period: float, cfg: InterruptConfig,
                    shape: TraceShape = TraceShape(),
                    displaced: Sequence[tuple[float, float]] = ()) -> list[AccelSample]:
    """Rectangular above-threshold pulse per repetition, zero baseline.

    ``displaced`` lists ``(t_from, t_until)`` windows during which the mount
    is rotated so the motion no longer projects onto the interrupt axis.
    """
    dt = 1.0 / shape.sample_rate
    period_n = round(rep_period / dt)
    width_n = max(1, round(shape.pulse_width / dt))
    lead_n = round(shape.lead_in / dt)
    total_n = lead_n + (reps - 1) * period_n + width_n + round(shape.tail / dt) if reps else 0
    about = _AXES[(_AXES.index(cfg.axis) + 1) % 3]
    idx = _AXES.index(cfg.axis)
    trace = []
    for i in range(total_n):
        k, off = divmod(i - lead_n, period_n)
        hot = i >= lead_n and k < reps and off < width_n
        values = [0.0, 0.0, 0.0]
        if hot:
            values[idx] = cfg.sign * shape.pulse_amplitude
        s = AccelSample(start + (i - lead_n) * dt, *values)
        if any(a <= s.t < b for a, b in displaced):
            s = rotate_axes(s, about)
        trace.append(s)
    return trace
