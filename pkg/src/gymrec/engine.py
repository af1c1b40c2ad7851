"""Discrete-event simulation wiring beacons, channel, gateways and wearables."""

from __future__ import annotations

import hashlib
import heapq
import itertools
import json
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import gateway as gw
from . import wearable as wr
from .beacon import (RESET_WINDOW, BeaconState, Emission, battery_life_days,
                     detect_interrupts, step_beacon, synth_set_trace)
from .channel import Receiver, deliver
from .cloud import CloudStore, handle_patch
from .metrics import MetricsReport, build_report
from .scenario import ORIENTATION_DISPLACEMENT, Scenario

# same-instant ordering: phase changes first, then beacon housekeeping, user
# input, sensor interrupts, radio traffic, and finally set timeouts
GATEWAY_TICK, BEACON_TIMEOUT, LONG_TOUCH, INTERRUPT, EMISSION, WEARABLE_TICK = range(6)

_CHECK_DELAY = 1e-3


class EventLog:
    """Time-ordered JSON records; serialization is canonical so digests compare."""

    def __init__(self, records: list[dict[str, Any]] | None = None):
        self.records: list[dict[str, Any]] = records if records is not None else []

    def add(self, t: float, kind: str, **fields) -> None:
        self.records.append({"t": t, "kind": kind, **fields})

    def of_kind(self, kind: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["kind"] == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                       for r in self.records)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path: str | Path) -> "EventLog":
        return cls([json.loads(line) for line in Path(path).read_text().splitlines() if line])

    def scenario(self) -> Scenario:
        head = self.records[0] if self.records else {}
        if head.get("kind") != "scenario":
            raise ValueError("event log has no scenario header")
        return Scenario.from_dict(head["scenario"])

    def __len__(self):
        return len(self.records)


def report_from_log(log: EventLog) -> MetricsReport:
    scenario = log.scenario()
    patches = [{"machine": r["body"]["machine"], "t": r["body"]["t"], "reps": r["body"]["reps"]}
               for r in log.of_kind("patch") if r["status"] == 200]
    battery = {e.name: battery_life_days(e.power) for e in scenario.equipment}
    return build_report(scenario, patches, log.of_kind("set_record"), log.of_kind("emission"),
                        battery)


class Simulation:
    """One deterministic run of a scenario.

    The in-process cloud store receives every gateway PATCH through the same
    handler the HTTP server uses; pass ``store`` to share one across runs.
    """

    def __init__(self, scenario: Scenario, store: CloudStore | None = None):
        self.scenario = scenario.validate()
        self.registry = scenario.registry()
        self.store = store if store is not None else CloudStore(e.name for e in scenario.equipment)
        self.rng = np.random.default_rng(scenario.seed)
        self.log = EventLog()
        self.end_t = scenario.end_time()

        self.beacons = {e.name: BeaconState(e.instance, e.equipment,
                                            measured_power=e.measured_power)
                        for e in scenario.equipment}
        self.beacon_specs = {e.name: e for e in scenario.equipment}
        self.gateways = {g.id: gw.initial_state(scenario.gateway_config(g))
                         for g in scenario.gateways}
        self.gateway_specs = {g.id: g for g in scenario.gateways}
        self.wearables = {w.id: wr.WearableState(self.registry, scanning=w.scanning,
                                                 set_timeout=w.set_timeout,
                                                 association_window=w.association_window)
                          for w in scenario.wearables}
        self.wearable_specs = {w.id: w for w in scenario.wearables}

        self._queue: list = []
        self._seq = itertools.count()
        self._handlers: dict[int, Callable] = {
            GATEWAY_TICK: self._on_gateway_tick,
            BEACON_TIMEOUT: self._on_beacon_timeout,
            LONG_TOUCH: self._on_long_touch,
            INTERRUPT: self._on_interrupt,
            EMISSION: self._on_emission,
            WEARABLE_TICK: self._on_wearable_tick,
        }

    def schedule(self, t: float, kind: int, payload: Any) -> None:
        heapq.heappush(self._queue, (t, kind, next(self._seq), payload))

    # -- setup ---------------------------------------------------------------

    def interrupt_times(self, name: str) -> list[float]:
        spec = self.beacon_specs[name]
        displaced = [(f.t, f.until if f.until is not None else float("inf"))
                     for f in self.scenario.faults
                     if f.kind == ORIENTATION_DISPLACEMENT and f.equipment == name]
        times: list[float] = []
        for s in self.scenario.sets_for(name):
            trace = synth_set_trace(s.start, s.reps, s.rep_period, spec.interrupt,
                                    self.scenario.trace, displaced)
            times.extend(detect_interrupts(trace, spec.interrupt))
        return times

    def _seed_events(self) -> None:
        self.log.add(0.0, "scenario", scenario=self.scenario.to_dict())
        for name in self.beacons:
            for t in self.interrupt_times(name):
                self.schedule(t, INTERRUPT, name)
        for gid, state in self.gateways.items():
            self.schedule(state.phase_end_t, GATEWAY_TICK, gid)
        for w in self.scenario.wearables:
            for t in w.long_touch:
                self.schedule(t, LONG_TOUCH, w.id)
        self.schedule(self.end_t, WEARABLE_TICK, None)

    # -- handlers --------------------------------------------------------------

    def _on_interrupt(self, t: float, name: str) -> None:
        state, emissions = step_beacon(self.beacons[name], t, True,
                                       advert_gap=self.scenario.advert_gap)
        self.beacons[name] = state
        self.log.add(t, "interrupt", beacon=name, rep_count=state.rep_count)
        for e in emissions:
            self.schedule(e.t, EMISSION, (name, e))
        self.schedule(t + RESET_WINDOW + _CHECK_DELAY, BEACON_TIMEOUT, name)

    def _on_beacon_timeout(self, t: float, name: str) -> None:
        before = self.beacons[name]
        after, _ = step_beacon(before, t, False)
        self.beacons[name] = after
        if after.mode != before.mode:
            self.log.add(t, "beacon_reset", beacon=name)

    def _receivers(self, t: float) -> list[Receiver]:
        out = [Receiver(gid, self.gateway_specs[gid].placement, state.listening)
               for gid, state in self.gateways.items()]
        out += [Receiver(wid, self.wearable_specs[wid].position(t), state.scanning)
                for wid, state in self.wearables.items()]
        return out

    def _on_emission(self, t: float, payload: tuple[str, Emission]) -> None:
        name, emission = payload
        frame = emission.frame
        self.log.add(t, "emission", beacon=name, minor=frame.minor)
        tx = self.beacon_specs[name].placement
        for rx in deliver(emission, tx, self._receivers(t), self.scenario.channel, self.rng):
            self.log.add(t, "reception", receiver=rx.receiver, beacon=name,
                         minor=frame.minor, rssi=rx.rssi)
            if rx.receiver in self.gateways:
                self.gateways[rx.receiver] = gw.gateway_on_reception(self.gateways[rx.receiver], rx)
            else:
                w = self.wearables[rx.receiver]
                self.wearables[rx.receiver] = wr.wearable_on_reception(w, rx)
                self.schedule(t + w.set_timeout + _CHECK_DELAY, WEARABLE_TICK, rx.receiver)

    def _on_gateway_tick(self, t: float, gid: str) -> None:
        before = self.gateways[gid]
        state, requests = gw.gateway_tick(before, t)
        self.gateways[gid] = state
        if state.phase != before.phase:
            self.log.add(t, "gateway_phase", gateway=gid, phase=state.phase,
                         until=state.phase_end_t)
        for req in requests:
            resp = handle_patch(self.store, req)
            self.log.add(t, "patch", gateway=gid, method=req.method, path=req.path,
                         body=req.body, status=resp.status)
        if state.phase_end_t <= self.end_t:
            self.schedule(state.phase_end_t, GATEWAY_TICK, gid)

    def _record_sets(self, t: float, wid: str, before: wr.WearableState,
                     after: wr.WearableState) -> None:
        for rec in after.session[len(before.session):]:
            self.log.add(t, "set_record", user=wid, **rec.to_dict())

    def _on_long_touch(self, t: float, wid: str) -> None:
        before = self.wearables[wid]
        after = wr.on_long_touch(before, t)
        self.wearables[wid] = after
        self.log.add(t, "long_touch", user=wid, scanning=after.scanning)
        self._record_sets(t, wid, before, after)

    def _on_wearable_tick(self, t: float, wid: str | None) -> None:
        for w in ([wid] if wid is not None else list(self.wearables)):
            before = self.wearables[w]
            after, _ = wr.wearable_tick(before, t)
            self.wearables[w] = after
            self._record_sets(t, w, before, after)

    # -- driver ----------------------------------------------------------------

    def run(self) -> tuple[EventLog, MetricsReport]:
        self._seed_events()
        while self._queue:
            t, kind, _, payload = heapq.heappop(self._queue)
            if t > self.end_t:
                break
            self._handlers[kind](t, payload)
        return self.log, report_from_log(self.log)


def run_simulation(scenario: Scenario, store: CloudStore | None = None
                   ) -> tuple[EventLog, MetricsReport]:
    return Simulation(scenario, store).run()
