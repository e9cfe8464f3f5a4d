"""Capacitated directed network graphs for every backhaul variant.

Five architectures are supported:

* ``PON1``   -- in-building wavelength-routed PON: per room a coupler
  (upstream) and splitter (downstream) tie the ONU-equipped access points
  and room fog server to a pair of cyclic 5x5 AWGRs; two AWGs connect the
  AWGR fabric to the OLT, behind which sit the building/campus servers and
  the metro/core chain up to the cloud.
* ``PON1_HDR`` -- PON1 with a 100 Gbps wavelength line rate.
* ``PON2``   -- devolved design: two AWGRs per room give every access
  point full-rate passive reach to in-room devices; couplers, splitters
  and the backbone are dropped; direct passive links connect access
  points to fog servers of other rooms.
* ``EXPON``  -- PON1 plus a second building (four access points and one
  fog server per room) whose AWGR fabric hangs off two dedicated OLT ports.
* ``SNL``    -- spine-and-leaf: one leaf per room (access points attach
  through Ethernet interfaces), two spines, a router toward the
  aggregation network, and an access Ethernet switch for the building and
  campus servers.

Links are directed and carry per-wavelength capacities (a scalar sentinel
wavelength for SNL).  Topologies are immutable once built and construction
is deterministic: equal inputs give identical node orderings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Variant(str, Enum):
    PON1 = "pon1"
    PON1_HDR = "pon1-hdr"
    PON2 = "pon2"
    EXPON = "expon"
    SNL = "snl"


class NodeKind(str, Enum):
    USER_DEVICE_SOURCE = "user_device_source"
    USER_DEVICE_PROCESSING = "user_device_processing"
    ACCESS_POINT = "access_point"
    ONU = "onu"
    COUPLER = "coupler"
    SPLITTER = "splitter"
    AWGR_IN_PORT = "awgr_in_port"
    AWGR_OUT_PORT = "awgr_out_port"
    AWG = "awg"
    OLT = "olt"
    ETHERNET_SWITCH = "ethernet_switch"
    AGGREGATION_SWITCH = "aggregation_switch"
    EDGE_ROUTER = "edge_router"
    OPTICAL_SWITCH = "optical_switch"
    CORE_ROUTER = "core_router"
    LEAF_SWITCH = "leaf_switch"
    SPINE_SWITCH = "spine_switch"
    SL_ROUTER = "sl_router"
    ETHERNET_INTERFACE = "ethernet_interface"
    RFS = "rfs"
    BFS = "bfs"
    CFS = "cfs"
    MFS = "mfs"
    CLOUD_SERVER = "cloud_server"


#: Kinds that draw no power in any solution.
PASSIVE_KINDS = frozenset(
    {
        NodeKind.COUPLER,
        NodeKind.SPLITTER,
        NodeKind.AWGR_IN_PORT,
        NodeKind.AWGR_OUT_PORT,
        NodeKind.AWG,
    }
)

#: Kinds that can host processing demand.
PROCESSING_KINDS = frozenset(
    {
        NodeKind.USER_DEVICE_SOURCE,
        NodeKind.USER_DEVICE_PROCESSING,
        NodeKind.RFS,
        NodeKind.BFS,
        NodeKind.CFS,
        NodeKind.MFS,
        NodeKind.CLOUD_SERVER,
    }
)

#: Networking device kinds aggregated outside the PON fabric.
BACKBONE_KINDS = frozenset(
    {
        NodeKind.OLT,
        NodeKind.ETHERNET_SWITCH,
        NodeKind.AGGREGATION_SWITCH,
        NodeKind.EDGE_ROUTER,
        NodeKind.OPTICAL_SWITCH,
        NodeKind.CORE_ROUTER,
    }
)

AWGR_PORTS = 5
#: Sentinel wavelength label for the non-WDM spine-and-leaf variant.
SNL_WAVELENGTH = "w_"
#: Capacity for wired links the model never saturates (Gbps).
UNBOUNDED_GBPS = 1000.0
#: Spine-and-leaf internal link rate (Gbps).
SNL_LINK_GBPS = 10.0
#: Upper bound of any single VLC association (red color rate, Gbps).
VLC_GBPS = 2.5


class TopologyError(ValueError):
    """Invalid build parameters or unknown variant."""


class MissingLinkError(KeyError):
    """Capacity query for a link that does not exist."""


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    room: int | None = None
    building: int | None = None


@dataclass(frozen=True)
class TopologyParams:
    rooms_per_building: int = 4
    aps_per_room: int = 8
    wavelength_line_rate: float = 10.0
    devices_per_room: int = 9
    buildings: int = 1

    @property
    def per_device_rate(self) -> float:
        """Static per-device share of one wavelength (exact division)."""
        return self.wavelength_line_rate / self.devices_per_room


def default_params(variant: Variant) -> TopologyParams:
    if variant is Variant.PON1_HDR:
        return TopologyParams(wavelength_line_rate=100.0)
    if variant is Variant.EXPON:
        return TopologyParams(buildings=2)
    return TopologyParams()


@dataclass
class Topology:
    """Directed multigraph with per-wavelength link capacities.

    ``links`` maps ``(i, j)`` to ``{wavelength_index: capacity_gbps}``.
    ``awgr_groups`` maps an AWGR id to its (input ports, output ports).
    ``attachments`` maps each ONU or Ethernet interface to the device it
    serves, and each access point / fog server back to its ONU/interface.
    """

    variant: Variant
    params: TopologyParams
    nodes: tuple[Node, ...]
    links: dict[tuple[str, str], dict[int, float]]
    wavelengths: tuple[str, ...]
    awgr_groups: dict[str, tuple[tuple[str, ...], tuple[str, ...]]]
    awgr_buildings: dict[str, int] = field(default_factory=dict)
    attachments: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_id = {n.id: n for n in self.nodes}
        if len(self._by_id) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        self._out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        self._in: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for (i, j) in self.links:
            self._out[i].append(j)
            self._in[j].append(i)

    # -- queries -------------------------------------------------------
    def node(self, node_id: str) -> Node:
        return self._by_id[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def nodes_of_kind(self, *kinds: NodeKind) -> list[Node]:
        want = set(kinds)
        return [n for n in self.nodes if n.kind in want]

    def out_neighbors(self, node_id: str) -> list[str]:
        return self._out[node_id]

    def in_neighbors(self, node_id: str) -> list[str]:
        return self._in[node_id]

    def user_devices(self, building: int | None = None, room: int | None = None) -> list[Node]:
        out = []
        for n in self.nodes:
            if n.kind is not NodeKind.USER_DEVICE_SOURCE:
                continue
            if building is not None and n.building != building:
                continue
            if room is not None and n.room != room:
                continue
            out.append(n)
        return out

    def aps_in_room(self, building: int, room: int) -> list[Node]:
        return [
            n
            for n in self.nodes
            if n.kind is NodeKind.ACCESS_POINT and n.building == building and n.room == room
        ]

    def per_device_rate(self, building: int) -> float:
        if self.variant is Variant.EXPON and building == 2:
            return self.params.wavelength_line_rate / _EXPON_B2_DEVICES
        return self.params.per_device_rate

    def wavelength_index(self, w: int | str) -> int:
        if isinstance(w, str):
            try:
                return self.wavelengths.index(w)
            except ValueError as exc:
                raise MissingLinkError(f"unknown wavelength {w!r}") from exc
        if not 0 <= w < len(self.wavelengths):
            raise MissingLinkError(f"wavelength index {w} out of range")
        return w


_EXPON_B2_APS = 4
_EXPON_B2_DEVICES = 5


def link_capacity(topo: Topology, i: str, j: str, w: int | str = 0) -> float:
    """Capacity of link ``(i, j)`` on wavelength ``w`` in Gbps.

    For the spine-and-leaf variant the scalar link capacity is returned
    regardless of ``w``.  Raises :class:`MissingLinkError` when the link
    does not exist (or carries nothing on that wavelength).
    """
    caps = topo.links.get((i, j))
    if caps is None:
        raise MissingLinkError(f"no link {i} -> {j}")
    if topo.variant is Variant.SNL:
        return caps[0]
    wi = topo.wavelength_index(w)
    if wi not in caps:
        raise MissingLinkError(f"link {i} -> {j} carries nothing on wavelength {wi}")
    return caps[wi]


def adjacency_dump(topo: Topology) -> str:
    """Plain-text link dump: one ``from to wavelength capacity`` line each."""
    lines = []
    for (i, j), caps in topo.links.items():
        for w in sorted(caps):
            label = topo.wavelengths[w]
            lines.append(f"{i} {j} {label} {caps[w]:.9g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, wavelengths: tuple[str, ...]):
        self.nodes: list[Node] = []
        self.links: dict[tuple[str, str], dict[int, float]] = {}
        self.wavelengths = wavelengths
        self.awgr_groups: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {}
        self.awgr_buildings: dict[str, int] = {}
        self.attachments: dict[str, str] = {}

    def add(self, node_id: str, kind: NodeKind, room: int | None = None, building: int | None = None) -> str:
        self.nodes.append(Node(node_id, kind, room, building))
        return node_id

    def link(self, i: str, j: str, cap: float, w: int | None = None) -> None:
        caps = self.links.setdefault((i, j), {})
        if w is None:
            for wi in range(len(self.wavelengths)):
                caps[wi] = cap
        else:
            caps[w] = cap

    def link2(self, i: str, j: str, cap: float) -> None:
        self.link(i, j, cap)
        self.link(j, i, cap)

    def attach(self, carrier: str, device: str) -> None:
        self.attachments[carrier] = device
        self.attachments[device] = carrier


def _validate_params(variant: Variant, p: TopologyParams) -> None:
    if p.rooms_per_building < 1 or p.aps_per_room < 1 or p.devices_per_room < 1:
        raise TopologyError("room, AP and device counts must be at least 1")
    if p.buildings < 1:
        raise TopologyError("need at least one building")
    if p.wavelength_line_rate <= 0:
        raise TopologyError("line rate must be positive")
    if variant is Variant.EXPON:
        if p.buildings != 2:
            raise TopologyError("the extended variant requires exactly 2 buildings")
    elif p.buildings != 1:
        raise TopologyError(f"{variant.value} supports a single building")
    if variant in (Variant.PON1, Variant.PON1_HDR, Variant.PON2, Variant.EXPON):
        if p.rooms_per_building > AWGR_PORTS - 1:
            raise TopologyError(
                f"at most {AWGR_PORTS - 1} rooms fit a {AWGR_PORTS}x{AWGR_PORTS} AWGR"
            )
    if p.devices_per_room != p.aps_per_room + 1:
        raise TopologyError("devices per room must equal access points plus one fog server")


def _room_devices(b: _Builder, bld: int, room: int, n_aps: int, line: float) -> dict:
    """User devices, APs, ONUs and the fog server of one room (no fabric)."""
    pre = f"b{bld}r{room}"
    uds = [b.add(f"{pre}_ud{k}", NodeKind.USER_DEVICE_SOURCE, room, bld) for k in range(1, n_aps + 1)]
    aps = [b.add(f"{pre}_ap{k}", NodeKind.ACCESS_POINT, room, bld) for k in range(1, n_aps + 1)]
    onus = [b.add(f"{pre}_onu_ap{k}", NodeKind.ONU, room, bld) for k in range(1, n_aps + 1)]
    rfs = b.add(f"{pre}_rfs", NodeKind.RFS, room, bld)
    onu_rfs = b.add(f"{pre}_onu_rfs", NodeKind.ONU, room, bld)
    # VLC association links: any user may sit near any in-room AP; the
    # scenario decides which association is used.
    for ud in uds:
        for ap in aps:
            b.link2(ud, ap, VLC_GBPS)
    for ap, onu in zip(aps, onus):
        b.link2(ap, onu, line)
        b.attach(onu, ap)
    b.link2(rfs, onu_rfs, line)
    b.attach(onu_rfs, rfs)
    return {"uds": uds, "aps": aps, "onus": onus, "rfs": rfs, "onu_rfs": onu_rfs, "pre": pre}


def _pon_building(b: _Builder, bld: int, rooms: int, n_aps: int, line: float, olt: str) -> None:
    """One building's PON fabric: rooms, coupler/splitter pairs, two AWGRs, two AWGs."""
    share = line / (n_aps + 1)
    room_info = []
    for r in range(1, rooms + 1):
        info = _room_devices(b, bld, r, n_aps, line)
        pre = info["pre"]
        cpl = b.add(f"{pre}_cpl", NodeKind.COUPLER, r, bld)
        spl = b.add(f"{pre}_spl", NodeKind.SPLITTER, r, bld)
        for onu in info["onus"] + [info["onu_rfs"]]:
            b.link(onu, cpl, share)
            b.link(spl, onu, share)
        info["cpl"], info["spl"] = cpl, spl
        room_info.append(info)

    for tag in ("a", "b"):
        g = f"awgr_{tag}_b{bld}"
        used = list(range(rooms)) + [AWGR_PORTS - 1]
        ins = {p: b.add(f"{g}_in{p}", NodeKind.AWGR_IN_PORT, None, bld) for p in used}
        outs = {p: b.add(f"{g}_out{p}", NodeKind.AWGR_OUT_PORT, None, bld) for p in used}
        b.awgr_groups[g] = (tuple(ins[p] for p in used), tuple(outs[p] for p in used))
        b.awgr_buildings[g] = bld
        # Cyclic routing matrix: wavelength w entering port p exits (p+w) mod 5.
        for p, in_node in ins.items():
            for w in range(AWGR_PORTS):
                q = (p + w) % AWGR_PORTS
                if q in outs:
                    b.link(in_node, outs[q], line, w)
        awg = b.add(f"awg_{tag}_b{bld}", NodeKind.AWG, None, bld)
        b.link(outs[AWGR_PORTS - 1], awg, line)
        b.link(awg, olt, line)
        b.link(olt, awg, line)
        b.link(awg, ins[AWGR_PORTS - 1], line)
        for r, info in enumerate(room_info):
            b.link(info["cpl"], ins[r], line)
            b.link(outs[r], info["spl"], line)


def _backbone(b: _Builder, olt_or_router: str, with_cfs_switch: bool = True) -> None:
    """Access servers and the metro/core chain behind the building head-end."""
    if with_cfs_switch:
        eth = b.add("eth_sw", NodeKind.ETHERNET_SWITCH)
        b.link(olt_or_router, eth, UNBOUNDED_GBPS)
        b.link(eth, b.add("bfs", NodeKind.BFS), UNBOUNDED_GBPS)
        b.link(eth, b.add("cfs", NodeKind.CFS), UNBOUNDED_GBPS)
    agg = b.add("agg_sw", NodeKind.AGGREGATION_SWITCH)
    b.link(olt_or_router, agg, UNBOUNDED_GBPS)
    b.link(agg, b.add("mfs", NodeKind.MFS), UNBOUNDED_GBPS)
    edge = b.add("edge_router", NodeKind.EDGE_ROUTER)
    opt = b.add("opt_sw", NodeKind.OPTICAL_SWITCH)
    core = b.add("core_router", NodeKind.CORE_ROUTER)
    cloud = b.add("cloud", NodeKind.CLOUD_SERVER)
    b.link(agg, edge, UNBOUNDED_GBPS)
    b.link(edge, opt, UNBOUNDED_GBPS)
    b.link(opt, core, UNBOUNDED_GBPS)
    b.link(core, cloud, UNBOUNDED_GBPS)


def _build_pon(variant: Variant, p: TopologyParams) -> Topology:
    wl = tuple(f"w{i}" for i in range(AWGR_PORTS))
    b = _Builder(wl)
    olt = b.add("olt", NodeKind.OLT)
    _pon_building(b, 1, p.rooms_per_building, p.aps_per_room, p.wavelength_line_rate, olt)
    if variant is Variant.EXPON:
        _pon_building(b, 2, p.rooms_per_building, _EXPON_B2_APS, p.wavelength_line_rate, olt)
    _backbone(b, olt)
    return Topology(
        variant, p, tuple(b.nodes), b.links, wl, b.awgr_groups, b.awgr_buildings, b.attachments
    )


def _build_pon2(p: TopologyParams) -> Topology:
    """Devolved design: per-room AWGR pairs, no couplers/splitters/backbone."""
    wl = tuple(f"w{i}" for i in range(AWGR_PORTS))
    b = _Builder(wl)
    line = p.wavelength_line_rate
    share = p.per_device_rate
    rooms = []
    for r in range(1, p.rooms_per_building + 1):
        info = _room_devices(b, 1, r, p.aps_per_room, line)
        devs = info["onus"] + [info["onu_rfs"]]
        for tag in ("a", "b"):
            g = f"awgr_{tag}_b1r{r}"
            ins = [b.add(f"{g}_in{k}", NodeKind.AWGR_IN_PORT, r, 1) for k in range(len(devs))]
            outs = [b.add(f"{g}_out{k}", NodeKind.AWGR_OUT_PORT, r, 1) for k in range(len(devs))]
            b.awgr_groups[g] = (tuple(ins), tuple(outs))
            b.awgr_buildings[g] = 1
            # Every device holds a dedicated full-rate wavelength toward each
            # in-room peer, so intra-room port links carry the full line rate.
            for k, onu in enumerate(devs):
                b.link(onu, ins[k], line)
                b.link(outs[k], onu, line)
                for m in range(len(devs)):
                    if m != k:
                        b.link(ins[k], outs[m], line)
        rooms.append(info)
    # Passive AP-to-fog-server connections between rooms at the static share.
    for info in rooms:
        for other in rooms:
            if other is info:
                continue
            for onu in info["onus"]:
                b.link2(onu, other["onu_rfs"], share)
    return Topology(
        Variant.PON2, p, tuple(b.nodes), b.links, wl, b.awgr_groups, b.awgr_buildings, b.attachments
    )


def _build_snl(p: TopologyParams) -> Topology:
    wl = (SNL_WAVELENGTH,)
    b = _Builder(wl)
    spines = [b.add(f"spine{s}", NodeKind.SPINE_SWITCH) for s in (1, 2)]
    for r in range(1, p.rooms_per_building + 1):
        pre = f"b1r{r}"
        uds = [b.add(f"{pre}_ud{k}", NodeKind.USER_DEVICE_SOURCE, r, 1) for k in range(1, p.aps_per_room + 1)]
        aps = [b.add(f"{pre}_ap{k}", NodeKind.ACCESS_POINT, r, 1) for k in range(1, p.aps_per_room + 1)]
        ifaces = [b.add(f"{pre}_if{k}", NodeKind.ETHERNET_INTERFACE, r, 1) for k in range(1, p.aps_per_room + 1)]
        rfs = b.add(f"{pre}_rfs", NodeKind.RFS, r, 1)
        leaf = b.add(f"{pre}_leaf", NodeKind.LEAF_SWITCH, r, 1)
        for ud in uds:
            for ap in aps:
                b.link2(ud, ap, VLC_GBPS)
        for ap, iface in zip(aps, ifaces):
            b.link2(ap, iface, SNL_LINK_GBPS)
            b.link2(iface, leaf, SNL_LINK_GBPS)
            b.attach(iface, ap)
        b.link2(rfs, leaf, SNL_LINK_GBPS)
        for spine in spines:
            b.link2(leaf, spine, SNL_LINK_GBPS)
    router = b.add("sl_router", NodeKind.SL_ROUTER)
    eth = b.add("eth_sw", NodeKind.ETHERNET_SWITCH)
    for spine in spines:
        b.link2(spine, router, SNL_LINK_GBPS)
        b.link(spine, eth, SNL_LINK_GBPS)
    b.link(eth, b.add("bfs", NodeKind.BFS), SNL_LINK_GBPS)
    b.link(eth, b.add("cfs", NodeKind.CFS), SNL_LINK_GBPS)
    _backbone(b, router, with_cfs_switch=False)
    return Topology(
        Variant.SNL, p, tuple(b.nodes), b.links, wl, b.awgr_groups, b.awgr_buildings, b.attachments
    )


def build_topology(variant: Variant | str, params: TopologyParams | None = None) -> Topology:
    """Construct the network graph for an architecture variant.

    Every user device ends up with a path to every processing node of the
    variant (the devolved design reaches in-building nodes only, by
    design).  Per-device link capacities follow the static division rule
    ``line_rate / devices_per_room``.
    """
    variant = Variant(variant)
    if params is None:
        params = default_params(variant)
    _validate_params(variant, params)
    if variant in (Variant.PON1, Variant.PON1_HDR, Variant.EXPON):
        return _build_pon(variant, params)
    if variant is Variant.PON2:
        return _build_pon2(params)
    if variant is Variant.SNL:
        return _build_snl(params)
    raise TopologyError(f"unknown variant {variant}")
