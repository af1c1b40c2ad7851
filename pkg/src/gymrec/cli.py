"""Command-line entry point: ``gymrec <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import urllib.error
import urllib.request
from dataclasses import replace
from importlib.resources import files
from pathlib import Path

from .beacon import PowerProfile, battery_life_days
from .cloud import make_server, open_store
from .codec import FIELD_TEST_MACHINES, load_registry
from .engine import EventLog, report_from_log, run_simulation
from .metrics import battery_note
from .scenario import Scenario, load_scenario, with_extra_gateway

log = logging.getLogger("gymrec")

BUILTIN_SCENARIOS = ("paper_table2",)


class CliError(Exception):
    pass


def resolve_scenario(arg: str) -> Scenario:
    path = Path(arg)
    if path.exists():
        return load_scenario(path)
    stem = path.name.split(".", 1)[0]
    if stem in BUILTIN_SCENARIOS:
        return load_scenario(files("gymrec") / "scenarios" / f"{stem}.json")
    raise CliError(f"scenario file not found: {arg}")


def cmd_simulate(args) -> int:
    scenario = resolve_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.extra_gateway is not None:
        scenario = with_extra_gateway(scenario, args.extra_gateway)
    events, report = run_simulation(scenario)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        events.write(out / "events.jsonl")
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.format_table())
    sys.stdout.write(report.format_table())
    print(f"events: {len(events)}  digest: {events.digest()}")
    return 0


def cmd_report(args) -> int:
    report = report_from_log(EventLog.read(args.event_log))
    sys.stdout.write(report.to_json() if args.json else report.format_table())
    return 0


def cmd_serve(args) -> int:
    machines = load_registry(args.registry).names() if args.registry else list(FIELD_TEST_MACHINES)
    store = open_store(args.state, machines)
    server = make_server(store, args.host, args.port, args.state)
    host, port = server.server_address[:2]
    print(f"serving {len(store.machines)} machines on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def replay(events: EventLog, base_url: str, timeout: float = 10.0) -> int:
    """Re-send every accepted PATCH of ``events`` to a live service."""
    sent = 0
    for rec in events.of_kind("patch"):
        if rec["status"] != 200:
            continue
        req = urllib.request.Request(
            base_url.rstrip("/") + rec["path"],
            data=json.dumps(rec["body"], separators=(",", ":")).encode(),
            method=rec["method"],
            headers={"content-type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                resp.read()
        except urllib.error.HTTPError as exc:
            raise CliError(f"{rec['path']} at t={rec['body']['t']}: HTTP {exc.code}") from None
        sent += 1
    return sent


def cmd_replay(args) -> int:
    n = replay(EventLog.read(args.event_log), args.cloud)
    print(f"replayed {n} PATCH requests to {args.cloud}")
    return 0


def cmd_battery(args) -> int:
    profile = PowerProfile(**json.loads(Path(args.profile).read_text()))
    print(f"{battery_life_days(profile):.1f} days")
    print(battery_note())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gymrec", description="Gym beacon ecosystem simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario, write event log and report")
    s.add_argument("scenario", help="scenario JSON file, or a built-in name (paper_table2)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--extra-gateway", type=float, metavar="OFFSET",
                   help="add a second gateway whose scan cycle is shifted by OFFSET seconds")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", help="recompute metrics from an event log")
    s.add_argument("event_log")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("serve", help="run the mock cloud service")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--state", help="persistence file (loaded if present)")
    s.add_argument("--registry", help="registry file: '<uuid-hex> = <name>' per line")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("replay", help="re-send logged PATCHes to a live service")
    s.add_argument("event_log")
    s.add_argument("--cloud", required=True, metavar="URL")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("battery", help="battery life for a power profile JSON")
    s.add_argument("profile")
    s.set_defaults(func=cmd_battery)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (CliError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"gymrec {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
