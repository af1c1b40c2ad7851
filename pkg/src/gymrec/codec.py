"""iBeacon advertisement codec and the equipment registry.

The payload is the 30-byte advertising data block: a flags AD structure
followed by the Apple manufacturer-specific structure carrying the
equipment UUID, the beacon instance (major), the repetition count (minor)
and the calibrated 1 m transmit power.
"""

from __future__ import annotations

import struct
import uuid as uuidlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

PREFIX = bytes.fromhex("020106" "1aff4c000215")
FRAME_LEN = 30
DEFAULT_MEASURED_POWER = -59

_BODY = struct.Struct(">16sHHb")


class CodecError(ValueError):
    pass


class WrongLength(CodecError):
    pass


class BadPrefix(CodecError):
    pass


class UnknownUuid(LookupError):
    pass


def _as_uuid_bytes(value: bytes | str | uuidlib.UUID) -> bytes:
    if isinstance(value, uuidlib.UUID):
        return value.bytes
    if isinstance(value, str):
        return uuidlib.UUID(value.strip()).bytes
    value = bytes(value)
    if len(value) != 16:
        raise ValueError(f"uuid must be 16 bytes, got {len(value)}")
    return value


@dataclass(frozen=True)
class EquipmentType:
    uuid: bytes
    name: str

    def __post_init__(self):
        object.__setattr__(self, "uuid", _as_uuid_bytes(self.uuid))
        if not self.name:
            raise ValueError("equipment name must be nonempty")

    @property
    def uuid_hex(self) -> str:
        return self.uuid.hex()


@dataclass(frozen=True)
class IBeaconFrame:
    uuid: bytes
    major: int
    minor: int
    measured_power: int = DEFAULT_MEASURED_POWER

    def __post_init__(self):
        object.__setattr__(self, "uuid", _as_uuid_bytes(self.uuid))
        for field, value in (("major", self.major), ("minor", self.minor)):
            if not 0 <= value <= 0xFFFF:
                raise ValueError(f"{field} out of 16-bit range: {value}")
        if not -128 <= self.measured_power <= 127:
            raise ValueError(f"measured_power out of int8 range: {self.measured_power}")

    @property
    def beacon_id(self) -> tuple[bytes, int]:
        """Key identifying the physical beacon: (uuid, major)."""
        return (self.uuid, self.major)


def encode_frame(frame: IBeaconFrame) -> bytes:
    return PREFIX + _BODY.pack(frame.uuid, frame.major, frame.minor, frame.measured_power)


def decode_frame(payload: bytes) -> IBeaconFrame:
    payload = bytes(payload)
    if len(payload) != FRAME_LEN:
        raise WrongLength(f"expected {FRAME_LEN} bytes, got {len(payload)}")
    if payload[: len(PREFIX)] != PREFIX:
        raise BadPrefix(f"unexpected header {payload[:len(PREFIX)].hex(' ')}")
    uuid, major, minor, power = _BODY.unpack(payload[len(PREFIX):])
    return IBeaconFrame(uuid, major, minor, power)


class Registry:
    """Maps equipment UUIDs to machine types, preserving insertion order."""

    def __init__(self, entries: Iterable[EquipmentType] = ()):
        self._by_uuid: dict[bytes, EquipmentType] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: EquipmentType) -> None:
        if entry.uuid in self._by_uuid:
            raise ValueError(f"duplicate uuid {entry.uuid_hex} in registry")
        self._by_uuid[entry.uuid] = entry

    def __iter__(self) -> Iterator[EquipmentType]:
        return iter(self._by_uuid.values())

    def __len__(self) -> int:
        return len(self._by_uuid)

    def __eq__(self, other):
        if not isinstance(other, Registry):
            return NotImplemented
        return list(self) == list(other)

    def __contains__(self, uuid) -> bool:
        return _as_uuid_bytes(uuid) in self._by_uuid

    def by_name(self, name: str) -> EquipmentType:
        for entry in self._by_uuid.values():
            if entry.name == name:
                return entry
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self._by_uuid.values()]


def lookup_equipment(registry: Registry, uuid) -> EquipmentType:
    try:
        return registry._by_uuid[_as_uuid_bytes(uuid)]
    except KeyError:
        raise UnknownUuid(_as_uuid_bytes(uuid).hex()) from None


def parse_registry(text: str) -> Registry:
    """Parse ``<uuid-hex> = <machine-name>`` lines; ``#`` starts a comment."""
    registry = Registry()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, name = line.partition("=")
        if not sep:
            key, _, name = line.partition(" ")
        try:
            registry.add(EquipmentType(key.strip(), name.strip()))
        except ValueError as exc:
            raise ValueError(f"registry line {lineno}: {exc}") from None
    return registry


def load_registry(path: str | Path) -> Registry:
    return parse_registry(Path(path).read_text())


def format_registry(registry: Registry) -> str:
    return "".join(f"{e.uuid_hex} = {e.name}\n" for e in registry)


def equipment_uuid(name: str) -> bytes:
    """Stable name-derived UUID, used when a scenario does not pin one."""
    return uuidlib.uuid5(uuidlib.NAMESPACE_DNS, f"{name}.equipment.gymrec").bytes


FIELD_TEST_MACHINES = ("leg_curl", "leg_extension", "lat_pull")


def field_test_registry() -> Registry:
    return Registry(EquipmentType(equipment_uuid(n), n) for n in FIELD_TEST_MACHINES)
