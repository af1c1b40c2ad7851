"""In-memory stand-in for the realtime database the gateway reports to.

REST surface (Firebase-style paths):

    PATCH /equipment/<name>.json   body: {"machine", "reps", "vector", "t"}
    GET   /equipment/<name>.json   one record with its full history
    GET   /dashboard.json          current count of every registered machine

State is persisted as line-delimited JSON: a header line carrying the
machine list and record count, then one ``{"machine", "t", "reps"}`` line per
history entry.
"""

from __future__ import annotations

import bisect
import json
import logging
import math
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Iterable

from .gateway import HttpRequest

log = logging.getLogger(__name__)

FORMAT_TAG = "gymrec.cloud"
FORMAT_VERSION = 1

_EQUIPMENT_PATH = re.compile(r"^/equipment/([A-Za-z0-9_.\-]+)\.json$")


class IoFailure(OSError):
    pass


class CorruptFile(ValueError):
    pass


class MalformedBody(ValueError):
    pass


@dataclass(frozen=True)
class HttpResponse:
    status: int
    body: dict[str, Any]

    def body_bytes(self) -> bytes:
        return json.dumps(self.body, separators=(",", ":")).encode()


@dataclass
class EquipmentRecord:
    machine: str
    history: list[tuple[float, int]] = field(default_factory=list)

    @property
    def current_reps(self) -> int:
        return self.history[-1][1] if self.history else 0

    @property
    def last_update_t(self) -> float | None:
        return self.history[-1][0] if self.history else None

    def summary(self) -> dict[str, Any]:
        return {"machine": self.machine, "current_reps": self.current_reps,
                "last_update_t": self.last_update_t}

    def to_dict(self) -> dict[str, Any]:
        d = self.summary()
        d["history"] = [[t, r] for t, r in self.history]
        return d


class CloudStore:
    """Equipment records keyed by machine name; one lock serializes writers."""

    def __init__(self, machines: Iterable[str]):
        self.records: dict[str, EquipmentRecord] = {m: EquipmentRecord(m) for m in machines}
        self.lock = threading.RLock()

    @property
    def machines(self) -> list[str]:
        return list(self.records)

    def __eq__(self, other):
        if not isinstance(other, CloudStore):
            return NotImplemented
        return self.records == other.records

    def __repr__(self):
        return f"CloudStore({self.machines!r}, entries={sum(len(r.history) for r in self.records.values())})"

    def apply(self, machine: str, t: float, reps: int) -> EquipmentRecord:
        """Insert one history entry, keeping history ordered by timestamp.

        A write with an older timestamp than the newest entry is filed into
        place rather than becoming current; a second write at an identical
        timestamp is a conflict.
        """
        with self.lock:
            rec = self.records[machine]
            times = [h[0] for h in rec.history]
            i = bisect.bisect_left(times, t)
            if i < len(times) and times[i] == t:
                raise ValueError(f"duplicate timestamp {t} for {machine}")
            rec.history.insert(i, (t, reps))
            return rec

    def dashboard(self) -> dict[str, Any]:
        with self.lock:
            return {"equipment": [r.summary() for r in self.records.values()]}


def _validate(body: Any) -> tuple[str, int, float]:
    if not isinstance(body, dict):
        raise MalformedBody("body must be a JSON object")
    for key in ("machine", "reps", "vector", "t"):
        if key not in body:
            raise MalformedBody(f"missing field {key!r}")
    machine, reps, vector, t = body["machine"], body["reps"], body["vector"], body["t"]
    if not isinstance(machine, str) or not machine:
        raise MalformedBody("'machine' must be a nonempty string")

    def is_u16(v):
        return isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= 0xFFFF

    if not is_u16(reps):
        raise MalformedBody("'reps' must be an unsigned 16-bit integer")
    if not isinstance(vector, list) or not all(is_u16(v) for v in vector):
        raise MalformedBody("'vector' must be a list of unsigned 16-bit integers")
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
        raise MalformedBody("'t' must be a finite number")
    return machine, reps, float(t)


def _decode_body(raw: Any) -> Any:
    if isinstance(raw, (bytes, bytearray, str)):
        try:
            return json.loads(raw)
        except ValueError:
            raise MalformedBody("body is not valid JSON") from None
    return raw


def handle_patch(store: CloudStore, request: HttpRequest) -> HttpResponse:
    try:
        machine, reps, t = _validate(_decode_body(request.body))
    except MalformedBody as exc:
        return HttpResponse(400, {"error": "MalformedBody", "detail": str(exc)})
    m = _EQUIPMENT_PATH.match(request.path)
    if m and m.group(1) != machine:
        return HttpResponse(400, {"error": "MalformedBody",
                                  "detail": "path and body name different machines"})
    if machine not in store.records:
        return HttpResponse(404, {"error": "UnknownMachine", "detail": machine})
    try:
        rec = store.apply(machine, t, reps)
    except ValueError as exc:
        return HttpResponse(409, {"error": "Conflict", "detail": str(exc)})
    return HttpResponse(200, rec.to_dict())


def handle_get_dashboard(store: CloudStore) -> HttpResponse:
    return HttpResponse(200, store.dashboard())


def handle_get_equipment(store: CloudStore, machine: str) -> HttpResponse:
    with store.lock:
        rec = store.records.get(machine)
        if rec is None:
            return HttpResponse(404, {"error": "UnknownMachine", "detail": machine})
        return HttpResponse(200, rec.to_dict())


def route(store: CloudStore, request: HttpRequest) -> HttpResponse:
    path = request.path.split("?", 1)[0]
    if request.method == "GET" and path == "/dashboard.json":
        return handle_get_dashboard(store)
    m = _EQUIPMENT_PATH.match(path)
    if m and request.method == "GET":
        return handle_get_equipment(store, m.group(1))
    if m and request.method == "PATCH":
        return handle_patch(store, request)
    if m or path == "/dashboard.json":
        return HttpResponse(405, {"error": "MethodNotAllowed"})
    return HttpResponse(404, {"error": "NotFound", "detail": path})


# -- persistence --------------------------------------------------------------

def persist(store: CloudStore, path: str | Path) -> None:
    path = Path(path)
    with store.lock:
        entries = [(m, t, r) for m, rec in store.records.items() for t, r in rec.history]
        header = {"format": FORMAT_TAG, "version": FORMAT_VERSION,
                  "machines": store.machines, "records": len(entries)}
        lines = [json.dumps(header)]
        lines += [json.dumps({"machine": m, "t": t, "reps": r}) for m, t, r in entries]
    data = "\n".join(lines) + "\n"
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load(path: str | Path) -> CloudStore:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not text.endswith("\n"):
        raise CorruptFile(f"{path}: truncated (no final newline)")
    lines = text.splitlines()
    try:
        header = json.loads(lines[0])
        if header.get("format") != FORMAT_TAG or header.get("version") != FORMAT_VERSION:
            raise CorruptFile(f"{path}: unrecognised header")
        store = CloudStore(header["machines"])
        body = lines[1:]
        if len(body) != header["records"]:
            raise CorruptFile(f"{path}: expected {header['records']} records, found {len(body)}")
        for line in body:
            entry = json.loads(line)
            store.apply(entry["machine"], float(entry["t"]), int(entry["reps"]))
    except CorruptFile:
        raise
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return store


# -- HTTP server --------------------------------------------------------------

def make_handler(store: CloudStore, state_path: str | Path | None = None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _dispatch(self, method):
            length = int(self.headers.get("content-length") or 0)
            raw = self.rfile.read(length) if length else b""
            request = HttpRequest(method, self.path, dict(self.headers.items()), raw)
            with store.lock:
                resp = route(store, request)
                if method == "PATCH" and resp.status == 200 and state_path is not None:
                    persist(store, state_path)
            payload = resp.body_bytes()
            self.send_response(resp.status)
            self.send_header("content-type", "application/json")
            self.send_header("content-length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):
            self._dispatch("GET")

        def do_PATCH(self):
            self._dispatch("PATCH")

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(store: CloudStore, host: str = "127.0.0.1", port: int = 8080,
                state_path: str | Path | None = None) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(store, state_path))
    server.daemon_threads = True
    return server


def open_store(state_path: str | Path | None, machines: Iterable[str]) -> CloudStore:
    """Load ``state_path`` if it exists, else start empty over ``machines``."""
    if state_path is not None and Path(state_path).exists():
        return load(state_path)
    return CloudStore(machines)
