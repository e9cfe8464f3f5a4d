"""Demand scenarios: who generates tasks, AP/color association, traffic coupling.

Three scenario shapes are supported, each under two user-placement cases:

* scenario 1 -- two generators per room;
* scenario 2 -- six generators per room;
* scenario 3 -- eight generators in the first room, none elsewhere.

In the *clustered* case users sit near two access points and are packed
four to an AP, taking the red/yellow/green/blue colors in device order.
In the *distributed* case every user gets its own access point on the red
color.  Non-generating user devices offer their processing capacity and
are associated to access points by the same packing rules (onto fresh APs
after the generators, so generator-side and processing-side APs stay
distinct whenever possible).

Traffic couples to workload through a fixed data-rate ratio:
``traffic_gbps = 0.05 * demand_gflops``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .netmodel import NodeKind, Topology

#: Data rate ratio: Gbps of traffic per GFLOP of workload.
DRR = 0.05

#: VLC color order used when packing clustered users onto an access point.
COLOR_ORDER = ("red", "yellow", "green", "blue")

DEMAND_SWEEP_MIN = 6.0
DEMAND_SWEEP_MAX = 20.0


class Case(str, Enum):
    CLUSTERED = "clustered"
    DISTRIBUTED = "distributed"


class ScenarioError(ValueError):
    """Invalid scenario/case id or demand outside the supported sweep."""


def traffic_of(demand_gflops: float, drr: float = DRR) -> float:
    """Traffic in Gbps generated by a task of the given workload."""
    if demand_gflops < 0:
        raise ScenarioError(f"negative demand {demand_gflops}")
    return drr * demand_gflops


@dataclass(frozen=True)
class Task:
    source: str
    demand_gflops: float
    traffic_gbps: float
    splittable: bool = False

    def __post_init__(self) -> None:
        if self.demand_gflops <= 0:
            raise ScenarioError("task demand must be positive")


@dataclass(frozen=True)
class Scenario:
    scenario_id: int
    case: Case
    demand_gflops: float
    generating_per_room: tuple[int, ...]
    tasks: tuple[Task, ...]
    #: user device id -> (access point id, color name); covers generators
    #: and processing user devices alike.
    wavelength_assignment: dict[str, tuple[str, str]]
    processing_user_devices: frozenset[str]
    drr: float = DRR

    @property
    def generators(self) -> tuple[str, ...]:
        return tuple(t.source for t in self.tasks)


def _pack_assoc(
    devices: list[str], aps: list[str], case: Case, start_ap: int
) -> tuple[dict[str, tuple[str, str]], int]:
    """Associate devices to APs per the case rule, starting at ``start_ap``.

    Clustered packs four devices per AP in color order; distributed gives
    each device its own AP on red.  Returns the association and the index
    of the next unused AP.
    """
    assoc: dict[str, tuple[str, str]] = {}
    ap_idx = start_ap
    if case is Case.DISTRIBUTED:
        for dev in devices:
            if ap_idx >= len(aps):
                raise ScenarioError("not enough access points for distributed users")
            assoc[dev] = (aps[ap_idx], "red")
            ap_idx += 1
        return assoc, ap_idx
    slot = 0
    for dev in devices:
        if ap_idx >= len(aps):
            raise ScenarioError("not enough access points for clustered users")
        assoc[dev] = (aps[ap_idx], COLOR_ORDER[slot])
        slot += 1
        if slot == len(COLOR_ORDER):
            slot, ap_idx = 0, ap_idx + 1
    if slot:
        ap_idx += 1
    return assoc, ap_idx


def associate(
    topo: Topology,
    generating_per_room: dict[tuple[int, int], int],
    case: Case,
    demand_gflops: float,
    drr: float = DRR,
    splittable: bool = False,
) -> tuple[tuple[Task, ...], dict[str, tuple[str, str]], frozenset[str]]:
    """Pick generators room by room and associate every user device to an AP.

    ``generating_per_room`` maps ``(building, room)`` to a generator count;
    rooms absent from the mapping contribute processing devices only.
    Generators are the lowest-numbered devices of each room.
    """
    tasks: list[Task] = []
    assoc: dict[str, tuple[str, str]] = {}
    processing: list[str] = []
    rooms = sorted({(n.building, n.room) for n in topo.user_devices()})
    for bld, room in rooms:
        uds = sorted(topo.user_devices(bld, room), key=lambda n: n.id)
        aps = sorted(topo.aps_in_room(bld, room), key=lambda n: n.id)
        ud_ids = [n.id for n in uds]
        ap_ids = [n.id for n in aps]
        n_gen = generating_per_room.get((bld, room), 0)
        if n_gen > len(ud_ids):
            raise ScenarioError(
                f"room b{bld}r{room} has {len(ud_ids)} user devices, "
                f"cannot generate {n_gen} tasks"
            )
        gens, puds = ud_ids[:n_gen], ud_ids[n_gen:]
        # One continuous packing pass: processing devices fill the color
        # slots left open on the generators' access points.
        room_assoc, _ = _pack_assoc(gens + puds, ap_ids, case, 0)
        assoc.update(room_assoc)
        processing.extend(puds)
        for g in gens:
            tasks.append(
                Task(g, demand_gflops, traffic_of(demand_gflops, drr), splittable)
            )
    return tuple(tasks), assoc, frozenset(processing)


_GENERATORS_BY_SCENARIO = {1: 2, 2: 6, 3: 8}


def build_scenario(
    scenario_id: int,
    case: Case | str,
    demand_gflops: float,
    topo: Topology,
    generating_per_room: list[int] | None = None,
    drr: float = DRR,
    splittable: bool = False,
) -> Scenario:
    """Build one of the three demand scenarios on a topology.

    All tasks share ``demand_gflops``.  Scenario 3 places every generator
    in the first room; scenarios 1 and 2 spread them uniformly.  Only
    building 1 generates tasks; other buildings contribute processing
    devices.  ``generating_per_room`` overrides the per-room counts.
    """
    case = Case(case)
    if scenario_id not in _GENERATORS_BY_SCENARIO:
        raise ScenarioError(f"unknown scenario id {scenario_id}")
    if not DEMAND_SWEEP_MIN <= demand_gflops <= DEMAND_SWEEP_MAX:
        raise ScenarioError(
            f"demand {demand_gflops} outside supported sweep "
            f"[{DEMAND_SWEEP_MIN}, {DEMAND_SWEEP_MAX}]"
        )
    rooms_b1 = sorted({n.room for n in topo.user_devices(building=1)})
    if generating_per_room is None:
        n = _GENERATORS_BY_SCENARIO[scenario_id]
        if scenario_id == 3:
            counts = [n] + [0] * (len(rooms_b1) - 1)
        else:
            counts = [n] * len(rooms_b1)
    else:
        if len(generating_per_room) != len(rooms_b1):
            raise ScenarioError(
                f"expected {len(rooms_b1)} per-room counts, got {len(generating_per_room)}"
            )
        counts = list(generating_per_room)
    per_room = {(1, room): c for room, c in zip(rooms_b1, counts)}
    tasks, assoc, processing = associate(
        topo, per_room, case, demand_gflops, drr, splittable
    )
    return Scenario(
        scenario_id=scenario_id,
        case=case,
        demand_gflops=demand_gflops,
        generating_per_room=tuple(counts),
        tasks=tasks,
        wavelength_assignment=assoc,
        processing_user_devices=processing,
        drr=drr,
    )


def scenario_from_file(path: str | Path, topo: Topology) -> Scenario:
    """Load a scenario spec from a JSON file.

    Schema: ``{"scenario_id": 1, "case": "clustered", "demand_gflops": 6,
    "generators_per_room": [2, 2, 2, 2], "drr": 0.05}`` with the last two
    keys optional.
    """
    data = json.loads(Path(path).read_text())
    try:
        return build_scenario(
            int(data["scenario_id"]),
            Case(data["case"]),
            float(data["demand_gflops"]),
            topo,
            generating_per_room=data.get("generators_per_room"),
            drr=float(data.get("drr", DRR)),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario file missing key {exc}") from exc
