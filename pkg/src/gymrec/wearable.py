"""Wrist-worn listener that attributes sets to the nearest moving machine."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

from .channel import Reception
from .codec import EquipmentType, Registry, UnknownUuid, lookup_equipment

SET_TIMEOUT = 10.0
ASSOCIATION_WINDOW = 2.0


@dataclass(frozen=True)
class SetRecord:
    equipment: EquipmentType
    reps: int
    start_t: float
    end_t: float

    def to_dict(self) -> dict:
        return {"equipment": self.equipment.name, "reps": self.reps,
                "start_t": self.start_t, "end_t": self.end_t}


@dataclass(frozen=True)
class Candidate:
    key: tuple[bytes, int]
    equipment: EquipmentType
    best_rssi: float
    max_minor: int


@dataclass(frozen=True)
class WearableState:
    registry: Registry
    scanning: bool = False
    set_timeout: float = SET_TIMEOUT
    association_window: float = ASSOCIATION_WINDOW
    # open set
    window_start_t: float | None = None
    candidates: tuple[Candidate, ...] = ()
    current_key: tuple[bytes, int] | None = None
    current_equipment: EquipmentType | None = None
    current_max_minor: int = 0
    last_reception_t: float | None = None
    session: tuple[SetRecord, ...] = ()

    @property
    def set_open(self) -> bool:
        return self.current_key is not None


def _cleared(state: WearableState) -> WearableState:
    return replace(state, window_start_t=None, candidates=(), current_key=None,
                   current_equipment=None, current_max_minor=0, last_reception_t=None)


def _finalize(state: WearableState, now: float) -> tuple[WearableState, SetRecord | None]:
    record = None
    if state.set_open and state.current_max_minor >= 1:
        record = SetRecord(state.current_equipment, state.current_max_minor,
                           state.window_start_t, now)
        state = replace(state, session=state.session + (record,))
    return _cleared(state), record


def on_long_touch(state: WearableState, now: float) -> WearableState:
    if state.scanning:
        state, _ = _finalize(state, now)
        return replace(state, scanning=False)
    return replace(_cleared(state), scanning=True)


def wearable_on_reception(state: WearableState, reception: Reception) -> WearableState:
    if not state.scanning:
        return state
    frame = reception.frame
    try:
        equipment = lookup_equipment(state.registry, frame.uuid)
    except UnknownUuid:
        return state
    key = frame.beacon_id
    t = reception.t

    window_start = state.window_start_t if state.window_start_t is not None else t
    if t - window_start <= state.association_window:
        cands = {c.key: c for c in state.candidates}
        prev = cands.get(key)
        if prev is None:
            cands[key] = Candidate(key, equipment, reception.rssi, frame.minor)
        else:
            cands[key] = Candidate(key, equipment, max(prev.best_rssi, reception.rssi),
                                   max(prev.max_minor, frame.minor))
        ordered = tuple(cands.values())
        # max() keeps the first-seen candidate on ties
        best = max(ordered, key=lambda c: c.best_rssi)
        return replace(state, window_start_t=window_start, candidates=ordered,
                       current_key=best.key, current_equipment=best.equipment,
                       current_max_minor=best.max_minor, last_reception_t=t)

    if key != state.current_key:
        return state
    return replace(state, current_max_minor=max(state.current_max_minor, frame.minor),
                   last_reception_t=t)


def wearable_tick(state: WearableState, now: float) -> tuple[WearableState, SetRecord | None]:
    if state.set_open and now - state.last_reception_t > state.set_timeout:
        return _finalize(state, now)
    return state, None


def export_session(records: Iterable[SetRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in records)


def parse_session(text: str, registry: Registry) -> list[SetRecord]:
    out = []
    for line in text.splitlines():
        if line.strip():
            d = json.loads(line)
            out.append(SetRecord(registry.by_name(d["equipment"]), int(d["reps"]),
                                 float(d["start_t"]), float(d["end_t"])))
    return out
