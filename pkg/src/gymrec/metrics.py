"""Per-set detected/truth table and endpoint accuracy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

from .beacon import PUBLISHED_BATTERY_DAYS
from .scenario import Scenario, WorkoutSet

DASHBOARD = "dashboard"
WEARABLE = "wearable"
ENDPOINTS = (DASHBOARD, WEARABLE)


class EmptyTable(ValueError):
    pass


def compute_accuracy(rows: Iterable[tuple[int | None, int]]) -> float:
    """100 * sum(detected) / sum(truth), truncated to one decimal.

    ``None`` rows (endpoint not activated) are skipped. Truncation, not
    rounding: 77/85 reports as 90.5 and 71/75 as 94.6.
    """
    detected = truth = 0
    for d, t in rows:
        if d is None:
            continue
        detected += d
        truth += t
    if truth == 0:
        raise EmptyTable("no activated sets with nonzero truth")
    return (1000 * detected // truth) / 10


@dataclass(frozen=True)
class SetResult:
    endpoint: str
    equipment: str
    set_index: int
    start: float
    truth: int
    detected: int | None  # None: endpoint was not activated for this set
    advertised: int  # highest count the beacon put on air during the set

    @property
    def cell(self) -> str:
        return "Not activated" if self.detected is None else f"{self.detected}/{self.truth}"


@dataclass
class MetricsReport:
    rows: list[SetResult]
    accuracy: dict[str, float | None]
    battery_days: dict[str, float] = field(default_factory=dict)

    def for_endpoint(self, endpoint: str) -> list[SetResult]:
        return [r for r in self.rows if r.endpoint == endpoint]

    def cell(self, endpoint: str, equipment: str, set_index: int) -> SetResult:
        for r in self.rows:
            if (r.endpoint, r.equipment, r.set_index) == (endpoint, equipment, set_index):
                return r
        raise KeyError((endpoint, equipment, set_index))

    def detection_rate(self, endpoint: str) -> float:
        """Share of advertised counts that reached the endpoint, in percent."""
        return compute_accuracy((r.detected, r.advertised) for r in self.for_endpoint(endpoint))

    def to_dict(self) -> dict[str, Any]:
        return {"rows": [asdict(r) for r in self.rows], "accuracy": self.accuracy,
                "battery_days": self.battery_days,
                "battery_note": battery_note()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricsReport":
        return cls([SetResult(**r) for r in d["rows"]], dict(d["accuracy"]),
                   dict(d.get("battery_days", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_table(self) -> str:
        machines = list(dict.fromkeys(r.equipment for r in self.rows))
        n_sets = max((r.set_index for r in self.rows), default=0)
        width = max([14] + [len(m) + 2 for m in machines])
        head = f"{'endpoint':<11}{'set':<6}" + "".join(f"{m:>{width}}" for m in machines) + f"{'overall':>10}"
        lines = [head, "-" * len(head)]
        for ep in ENDPOINTS:
            for i in range(1, n_sets + 1):
                cells = []
                for m in machines:
                    try:
                        cells.append(self.cell(ep, m, i).cell)
                    except KeyError:
                        cells.append("-")
                acc = self.accuracy.get(ep)
                overall = "" if i != 1 else ("n/a" if acc is None else f"{acc:.1f}%")
                lines.append(f"{ep if i == 1 else '':<11}{'set ' + str(i):<6}"
                             + "".join(f"{c:>{width}}" for c in cells) + f"{overall:>10}")
        if self.battery_days:
            lines.append("")
            for name, days in self.battery_days.items():
                lines.append(f"battery life {name}: {days:.1f} days")
            lines.append(battery_note())
        return "\n".join(lines) + "\n"


def battery_note() -> str:
    return (f"note: the published {PUBLISHED_BATTERY_DAYS:.0f}-day battery estimate is not "
            "reproducible from the stated 0.03/0.04 mA currents; the figure above is "
            "computed from the profile")


def _window(sets: Sequence[WorkoutSet], i: int) -> tuple[float, float]:
    end = sets[i + 1].start if i + 1 < len(sets) else float("inf")
    return sets[i].start, end


def build_report(scenario: Scenario, patches: Sequence[dict], set_records: Sequence[dict],
                 emissions: Sequence[dict], battery_days: dict[str, float] | None = None
                 ) -> MetricsReport:
    """Score every scripted set against what each endpoint ended up showing.

    ``patches`` are accepted cloud writes (``machine``, ``t``, ``reps``);
    ``set_records`` are wearable session entries (``user``, ``equipment``,
    ``reps``, ``start_t``); ``emissions`` are beacon transmissions
    (``beacon``, ``t``, ``minor``). Truth always comes from the script.
    """
    wearables = {w.id: w for w in scenario.wearables}
    horizon = scenario.end_time()
    rows: list[SetResult] = []

    for eq in scenario.equipment:
        sets = scenario.sets_for(eq.name)
        for i, s in enumerate(sets):
            lo, hi = _window(sets, i)
            advertised = max((e["minor"] for e in emissions
                              if e["beacon"] == eq.name and lo <= e["t"] < hi), default=0)
            dash = max((p["reps"] for p in patches
                        if p["machine"] == eq.name and lo <= p["t"] < hi), default=0)
            rows.append(SetResult(DASHBOARD, eq.name, i + 1, s.start, s.reps, dash, advertised))

            detected = None
            w = wearables.get(s.user)
            if w is not None:
                active_to = s.last_rep_t + scenario.advert_gap
                if any(a <= active_to and b > s.start for a, b in w.scanning_intervals(horizon)):
                    user_sets = sorted((x for x in scenario.workout if x.user == s.user),
                                       key=lambda x: x.start)
                    j = user_sets.index(s)
                    ulo, uhi = _window(user_sets, j)
                    detected = max((r["reps"] for r in set_records
                                    if r["user"] == s.user and r["equipment"] == eq.name
                                    and ulo <= r["start_t"] < uhi), default=0)
            rows.append(SetResult(WEARABLE, eq.name, i + 1, s.start, s.reps, detected, advertised))

    rows.sort(key=lambda r: (ENDPOINTS.index(r.endpoint), r.set_index,
                             [e.name for e in scenario.equipment].index(r.equipment)))
    accuracy: dict[str, float | None] = {}
    for ep in ENDPOINTS:
        try:
            accuracy[ep] = compute_accuracy((r.detected, r.truth) for r in rows if r.endpoint == ep)
        except EmptyTable:
            accuracy[ep] = None
    return MetricsReport(rows, accuracy, dict(battery_days or {}))
