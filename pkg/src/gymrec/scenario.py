"""Scenario description: equipment, devices, workout script, channel, faults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .beacon import RESET_WINDOW, InterruptConfig, PowerProfile, TraceShape
from .channel import ChannelParams, Placement
from .codec import DEFAULT_MEASURED_POWER, EquipmentType, Registry, equipment_uuid
from .gateway import GatewayConfig, WhitelistEntry
from .wearable import ASSOCIATION_WINDOW, SET_TIMEOUT

ORIENTATION_DISPLACEMENT = "orientation_displacement"


class InvalidScenario(ValueError):
    pass


@dataclass(frozen=True)
class EquipmentSpec:
    name: str
    uuid: str
    placement: Placement
    instance: int = 0
    interrupt: InterruptConfig = InterruptConfig()
    power: PowerProfile = PowerProfile()
    measured_power: int = DEFAULT_MEASURED_POWER

    @property
    def equipment(self) -> EquipmentType:
        return EquipmentType(self.uuid, self.name)

    @property
    def key(self) -> tuple[bytes, int]:
        return (self.equipment.uuid, self.instance)


@dataclass(frozen=True)
class GatewaySpec:
    id: str = "gateway"
    placement: Placement = Placement(0.0, 0.0)
    scan_duration: float = 3.0
    upload_duration: float = 0.9
    phase_offset: float = 0.0
    cloud_base_url: str = "http://127.0.0.1:8080"
    whitelist: tuple[str, ...] | None = None  # machine names, slot order


@dataclass(frozen=True)
class WearableSpec:
    id: str
    # piecewise-constant position: (t_from, x, y), sorted by t_from
    path: tuple[tuple[float, float, float], ...]
    long_touch: tuple[float, ...] = ()
    scanning: bool = False
    set_timeout: float = SET_TIMEOUT
    association_window: float = ASSOCIATION_WINDOW

    def position(self, t: float) -> Placement:
        pos = self.path[0]
        for step in self.path:
            if step[0] <= t:
                pos = step
            else:
                break
        return Placement(pos[1], pos[2])

    def scanning_intervals(self, horizon: float) -> list[tuple[float, float]]:
        out, on, since = [], self.scanning, 0.0
        for t in sorted(self.long_touch):
            if on:
                out.append((since, t))
            on, since = not on, t
        if on:
            out.append((since, horizon))
        return out


@dataclass(frozen=True)
class WorkoutSet:
    user: str
    equipment: str
    start: float
    reps: int
    rep_period: float = 5.0

    @property
    def last_rep_t(self) -> float:
        return self.start + (self.reps - 1) * self.rep_period

    @property
    def end(self) -> float:
        return self.start + self.reps * self.rep_period


@dataclass(frozen=True)
class Fault:
    kind: str
    equipment: str
    t: float
    until: float | None = None


@dataclass(frozen=True)
class Scenario:
    equipment: tuple[EquipmentSpec, ...]
    workout: tuple[WorkoutSet, ...]
    gateways: tuple[GatewaySpec, ...] = (GatewaySpec(),)
    wearables: tuple[WearableSpec, ...] = ()
    channel: ChannelParams = ChannelParams()
    seed: int = 0
    faults: tuple[Fault, ...] = ()
    trace: TraceShape = TraceShape()
    advert_gap: float = 0.1
    name: str = "scenario"

    def registry(self) -> Registry:
        reg = Registry()
        for e in self.equipment:
            if e.equipment.uuid not in reg:
                reg.add(e.equipment)
        return reg

    def equipment_by_name(self, name: str) -> EquipmentSpec:
        for e in self.equipment:
            if e.name == name:
                return e
        raise KeyError(name)

    def gateway_config(self, spec: GatewaySpec) -> GatewayConfig:
        names = spec.whitelist if spec.whitelist is not None else [e.name for e in self.equipment]
        entries = []
        for n in names:
            e = self.equipment_by_name(n)
            entries.append(WhitelistEntry(e.equipment.uuid, e.instance, e.name))
        return GatewayConfig(tuple(entries), spec.scan_duration, spec.upload_duration,
                             spec.cloud_base_url, spec.phase_offset)

    def end_time(self) -> float:
        last = max((w.end for w in self.workout), default=0.0)
        timeout = max((w.set_timeout for w in self.wearables), default=SET_TIMEOUT)
        return last + max(timeout, RESET_WINDOW) + 5.0

    def sets_for(self, equipment: str) -> list[WorkoutSet]:
        return sorted((w for w in self.workout if w.equipment == equipment),
                      key=lambda w: w.start)

    def validate(self) -> "Scenario":
        names = [e.name for e in self.equipment]
        if not names:
            raise InvalidScenario("no equipment defined")
        if len(set(names)) != len(names):
            raise InvalidScenario("duplicate equipment name")
        keys = [e.key for e in self.equipment]
        if len(set(keys)) != len(keys):
            raise InvalidScenario("two beacons share uuid and instance")
        if not self.gateways:
            raise InvalidScenario("at least one gateway is required")
        ids = [g.id for g in self.gateways] + [w.id for w in self.wearables]
        if len(set(ids)) != len(ids):
            raise InvalidScenario("duplicate device id")
        for g in self.gateways:
            for n in g.whitelist or ():
                if n not in names:
                    raise InvalidScenario(f"gateway {g.id} whitelists unknown equipment {n!r}")
        for w in self.wearables:
            if not w.path:
                raise InvalidScenario(f"wearable {w.id} has an empty path")
        for s in self.workout:
            if s.equipment not in names:
                raise InvalidScenario(f"workout references unknown equipment {s.equipment!r}")
            if s.reps < 1 or s.rep_period <= 0:
                raise InvalidScenario(f"set on {s.equipment} at t={s.start} needs reps >= 1 and rep_period > 0")
            cfg = self.equipment_by_name(s.equipment).interrupt
            if s.reps > 1 and s.rep_period < cfg.debounce:
                raise InvalidScenario(f"rep_period {s.rep_period} below debounce on {s.equipment}")
            if s.reps > 1 and s.rep_period > RESET_WINDOW:
                raise InvalidScenario(f"rep_period {s.rep_period} exceeds the beacon reset window")
        for n in names:
            sets = self.sets_for(n)
            for a, b in zip(sets, sets[1:]):
                if b.start - a.last_rep_t <= RESET_WINDOW:
                    raise InvalidScenario(f"sets on {n} at t={a.start} and t={b.start} "
                                          "are not separated by the reset window")
        for f in self.faults:
            if f.kind != ORIENTATION_DISPLACEMENT:
                raise InvalidScenario(f"unknown fault kind {f.kind!r}")
            if f.equipment not in names:
                raise InvalidScenario(f"fault references unknown equipment {f.equipment!r}")
        return self

    # -- (de)serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "equipment": [
                {"name": e.name, "uuid": e.uuid, "instance": e.instance,
                 "placement": list(e.placement), "interrupt": asdict(e.interrupt),
                 "power": asdict(e.power), "measured_power": e.measured_power}
                for e in self.equipment
            ],
            "gateways": [
                {**asdict(g), "placement": list(g.placement),
                 "whitelist": None if g.whitelist is None else list(g.whitelist)}
                for g in self.gateways
            ],
            "wearables": [
                {**asdict(w), "path": [list(p) for p in w.path], "long_touch": list(w.long_touch)}
                for w in self.wearables
            ],
            "workout": [asdict(s) for s in self.workout],
            "channel": asdict(self.channel),
            "faults": [asdict(f) for f in self.faults],
            "trace": asdict(self.trace),
            "advert_gap": self.advert_gap,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Scenario":
        try:
            equipment = tuple(
                EquipmentSpec(
                    name=e["name"],
                    uuid=e.get("uuid") or equipment_uuid(e["name"]).hex(),
                    placement=Placement(*e.get("placement", (0.0, 0.0))),
                    instance=int(e.get("instance", 0)),
                    interrupt=InterruptConfig(**e.get("interrupt", {})),
                    power=PowerProfile(**e.get("power", {})),
                    measured_power=int(e.get("measured_power", DEFAULT_MEASURED_POWER)),
                )
                for e in d["equipment"]
            )
            gateways = tuple(
                GatewaySpec(**{**g, "placement": Placement(*g.get("placement", (0.0, 0.0))),
                               "whitelist": None if g.get("whitelist") is None
                               else tuple(g["whitelist"])})
                for g in d.get("gateways", [{}])
            )
            wearables = tuple(
                WearableSpec(**{**w, "path": tuple(tuple(map(float, p)) for p in w["path"]),
                                "long_touch": tuple(w.get("long_touch", ()))})
                for w in d.get("wearables", [])
            )
            return cls(
                equipment=equipment,
                workout=tuple(WorkoutSet(**s) for s in d["workout"]),
                gateways=gateways,
                wearables=wearables,
                channel=ChannelParams(**d.get("channel", {})),
                seed=int(d.get("seed", 0)),
                faults=tuple(Fault(**f) for f in d.get("faults", [])),
                trace=TraceShape(**d.get("trace", {})),
                advert_gap=float(d.get("advert_gap", 0.1)),
                name=d.get("name", "scenario"),
            ).validate()
        except InvalidScenario:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScenario(f"{type(exc).__name__}: {exc}") from None


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except ValueError as exc:
        raise InvalidScenario(f"{path}: not valid JSON ({exc})") from None
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    return replace(scenario, seed=seed)


def with_extra_gateway(scenario: Scenario, phase_offset: float, id: str = "gateway-2") -> Scenario:
    """Add a second gateway co-located with the first, its duty cycle shifted."""
    first = scenario.gateways[0]
    extra = replace(first, id=id, phase_offset=phase_offset)
    return replace(scenario, gateways=scenario.gateways + (extra,)).validate()


def without_faults(scenario: Scenario) -> Scenario:
    return replace(scenario, faults=())


def field_test_equipment() -> tuple[EquipmentSpec, ...]:
    return tuple(
        EquipmentSpec(name, equipment_uuid(name).hex(), Placement(4.0 * i, 0.0))
        for i, name in enumerate(("leg_curl", "leg_extension", "lat_pull"))
    )


def random_scenario(seed: int, n_sets: int = 6, channel: ChannelParams = ChannelParams(),
                    always_scanning: bool = True) -> Scenario:
    """Single user touring the three field-test machines with random timings."""
    rng = np.random.default_rng(seed)
    equipment = field_test_equipment()
    workout, path = [], []
    t = float(rng.uniform(0.0, 4.0))
    for _ in range(n_sets):
        e = equipment[int(rng.integers(len(equipment)))]
        reps = int(rng.integers(3, 13))
        period = round(float(rng.uniform(2.5, 5.0)), 2)
        path.append((round(t - 1.0, 3), e.placement.x, e.placement.y + 0.5))
        workout.append(WorkoutSet("watch", e.name, round(t, 3), reps, period))
        t += (reps - 1) * period + float(rng.uniform(16.0, 40.0))
    wearable = WearableSpec("watch", tuple(path), scanning=always_scanning)
    return Scenario(
        equipment=equipment,
        workout=tuple(workout),
        gateways=(GatewaySpec(placement=Placement(4.0, 3.0)),),
        wearables=(wearable,),
        channel=channel,
        seed=seed,
        name=f"random-{seed}",
    ).validate()
