"""Duty-cycled scanning gateway that mirrors beacon counts to the cloud."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from .channel import Reception

SCANNING = "scanning"
UPLOADING = "uploading"


@dataclass(frozen=True)
class WhitelistEntry:
    uuid: bytes
    major: int
    name: str

    @property
    def key(self) -> tuple[bytes, int]:
        return (self.uuid, self.major)


@dataclass(frozen=True)
class GatewayConfig:
    whitelist: tuple[WhitelistEntry, ...]
    scan_duration: float = 3.0
    upload_duration: float = 0.9
    cloud_base_url: str = "http://127.0.0.1:8080"
    # Shortens the first scan window so the duty cycle starts this far along.
    phase_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "whitelist", tuple(self.whitelist))
        if not self.whitelist:
            raise ValueError("gateway whitelist must be nonempty")
        if self.scan_duration <= 0 or self.upload_duration <= 0:
            raise ValueError("scan/upload durations must be > 0")
        if not 0 <= self.phase_offset < self.scan_duration:
            raise ValueError("phase_offset must lie in [0, scan_duration)")
        keys = [e.key for e in self.whitelist]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate beacon in whitelist")

    def slot_of(self, key: tuple[bytes, int]) -> int | None:
        for i, entry in enumerate(self.whitelist):
            if entry.key == key:
                return i
        return None


@dataclass(frozen=True)
class GatewayState:
    config: GatewayConfig
    vector: tuple[int, ...]
    phase: str = SCANNING
    phase_end_t: float = 0.0
    dirty: frozenset[int] = field(default_factory=frozenset)

    @property
    def listening(self) -> bool:
        return self.phase == SCANNING


@dataclass(frozen=True)
class HttpRequest:
    method: str
    path: str
    headers: dict[str, str]
    body: dict[str, Any]
    base_url: str = ""

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + self.path

    def body_bytes(self) -> bytes:
        return json.dumps(self.body, separators=(",", ":")).encode()


def initial_state(config: GatewayConfig, start_t: float = 0.0) -> GatewayState:
    return GatewayState(
        config=config,
        vector=(0,) * len(config.whitelist),
        phase=SCANNING,
        phase_end_t=start_t + config.scan_duration - config.phase_offset,
    )


def gateway_on_reception(state: GatewayState, reception: Reception) -> GatewayState:
    if not state.listening:
        return state
    slot = state.config.slot_of(reception.frame.beacon_id)
    if slot is None:
        return state
    vector = list(state.vector)
    vector[slot] = reception.frame.minor
    return replace(state, vector=tuple(vector), dirty=state.dirty | {slot})


def build_patch(state: GatewayState, machine_index: int, t: float = 0.0) -> HttpRequest:
    if not 0 <= machine_index < len(state.vector):
        raise IndexError(f"machine index {machine_index} out of range")
    name = state.config.whitelist[machine_index].name
    body = {
        "machine": name,
        "reps": state.vector[machine_index],
        "vector": list(state.vector),
        "t": t,
    }
    return HttpRequest("PATCH", f"/equipment/{name}.json",
                       {"content-type": "application/json"}, body,
                       state.config.cloud_base_url)


def gateway_tick(state: GatewayState, now: float) -> tuple[GatewayState, list[HttpRequest]]:
    """Advance the scan/upload cycle through every phase boundary up to ``now``."""
    cfg = state.config
    requests: list[HttpRequest] = []
    while now >= state.phase_end_t:
        end = state.phase_end_t
        if state.phase == UPLOADING:
            state = replace(state, phase=SCANNING, phase_end_t=end + cfg.scan_duration)
        elif state.dirty:
            requests.extend(build_patch(state, i, end) for i in sorted(state.dirty))
            state = replace(state, phase=UPLOADING, phase_end_t=end + cfg.upload_duration,
                            dirty=frozenset())
        else:
            state = replace(state, phase_end_t=end + cfg.scan_duration)
    return state, requests
