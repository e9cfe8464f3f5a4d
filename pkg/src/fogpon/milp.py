"""Mixed-integer formulation of optimal task placement, plus validation.

``formulate`` translates (topology, scenario, catalog, options) into a
solver-agnostic instance: variables with bounds and integrality, tagged
linear rows, and a two-stage objective (maximize accepted tasks, then
minimize total power).  Every constraint row carries a provenance tag
naming its constraint family, e.g. ``(22)`` for per-wavelength flow
conservation or ``(48)`` for scalar link capacities.

Flow variables are generated per commodity on its admissible sub-graph
only: a task's traffic leaves through its assigned access point, passive
elements are traversed only in their own rooms, and store-and-forward
relaying through foreign access points or fog servers is structurally
excluded.  Variables forced to zero by those rules are simply omitted,
which leaves the feasible region unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .netmodel import (
    BACKBONE_KINDS,
    NodeKind,
    Topology,
    Variant,
)
from .powermodel import DeviceCatalog, DeviceRole, default_catalog
from .scenario import Case, Scenario

#: Minimum-activity threshold for reverse activation linking.
EPSILON = 1e-6
#: Absolute feasibility tolerance used by the validator.
VALIDATION_TOL = 1e-6

PON_VARIANTS = (Variant.PON1, Variant.PON1_HDR, Variant.PON2, Variant.EXPON)


class FormulationError(ValueError):
    """Scenario/topology mismatch or invalid option combination."""


class IncompleteSolutionError(KeyError):
    """A solution is missing values for instance variables."""


@dataclass(frozen=True)
class FormulationOptions:
    splitting: bool = False
    dba: bool = False
    #: Account the OLT with the Ethernet-switch profile (False zeroes it).
    olt_powered: bool = True


@dataclass(frozen=True)
class VarDef:
    name: str
    lb: float = 0.0
    ub: float | None = None
    binary: bool = False


@dataclass(frozen=True)
class Row:
    coeffs: dict[str, float]
    sense: str  # '<=', '=' or '>='
    rhs: float
    tag: str


@dataclass(frozen=True)
class Violation:
    tag: str
    detail: str
    amount: float


@dataclass(frozen=True)
class TaskInfo:
    source: str
    demand: float
    traffic: float


@dataclass(frozen=True)
class DestInfo:
    node: str
    node_class: str
    omega: float
    slope: float
    idle: float


@dataclass(frozen=True)
class PowerNodeInfo:
    node: str
    agg: str  # 'mu', 'sigma' or 'lambda_q'
    slope: float
    idle: float
    component: str
    theta: str


@dataclass
class InstanceMeta:
    variant: Variant
    splitting: bool
    dba: bool
    drr: float
    wavelengths: tuple[str, ...]
    tasks: list[TaskInfo]
    dests: list[DestInfo]
    fog_dest_ids: frozenset[str]
    psi: dict[tuple[str, str], str] = field(default_factory=dict)
    xi: dict[tuple[str, str], str] = field(default_factory=dict)
    acc: dict[str, str] = field(default_factory=dict)
    rho: dict[tuple[str, str, int], str] = field(default_factory=dict)
    lam_w: dict[tuple[str, str, int], str] = field(default_factory=dict)
    beta: dict[str, str] = field(default_factory=dict)
    theta: dict[str, str] = field(default_factory=dict)
    mu: dict[str, str] = field(default_factory=dict)
    sig: dict[str, str] = field(default_factory=dict)
    lq: dict[str, str] = field(default_factory=dict)
    flow_vars: dict[tuple[str, str, int], list[tuple[str, str, str]]] = field(default_factory=dict)
    power_nodes: list[PowerNodeInfo] = field(default_factory=list)


@dataclass
class MilpInstance:
    """Architecture-agnostic container for one placement problem."""

    variant: Variant
    variables: dict[str, VarDef]
    rows: list[Row]
    objective_stage1: dict[str, float]  # maximized
    objective_stage2: dict[str, float]  # minimized
    meta: InstanceMeta

    @property
    def task_count(self) -> int:
        return len(self.meta.tasks)

    def binaries(self) -> list[str]:
        return [v.name for v in self.variables.values() if v.binary]

    def with_bound(self, updates: dict[str, tuple[float, float | None]]) -> "MilpInstance":
        """Copy of the instance with replaced (lb, ub) bounds."""
        variables = dict(self.variables)
        for name, (lb, ub) in updates.items():
            variables[name] = replace(variables[name], lb=lb, ub=ub)
        return MilpInstance(
            self.variant, variables, self.rows, self.objective_stage1,
            self.objective_stage2, self.meta,
        )


@dataclass(frozen=True)
class PowerReport:
    pc: float
    pn: float
    tpc: float
    components: dict[str, float]
    y_accepted: int
    #: processing GFLOPs per active destination node
    assignments: dict[str, float] = field(default_factory=dict)


_KIND_ROLE = {
    NodeKind.USER_DEVICE_SOURCE: DeviceRole.USER_DEVICE,
    NodeKind.USER_DEVICE_PROCESSING: DeviceRole.USER_DEVICE,
    NodeKind.RFS: DeviceRole.RFS,
    NodeKind.BFS: DeviceRole.BFS,
    NodeKind.CFS: DeviceRole.CFS,
    NodeKind.MFS: DeviceRole.MFS,
    NodeKind.CLOUD_SERVER: DeviceRole.CLOUD_SERVER,
    NodeKind.ETHERNET_SWITCH: DeviceRole.ETHERNET_SWITCH,
    NodeKind.AGGREGATION_SWITCH: DeviceRole.AGGREGATION_SWITCH,
    NodeKind.EDGE_ROUTER: DeviceRole.EDGE_ROUTER,
    NodeKind.OPTICAL_SWITCH: DeviceRole.OPTICAL_SWITCH,
    NodeKind.CORE_ROUTER: DeviceRole.CORE_ROUTER,
    NodeKind.LEAF_SWITCH: DeviceRole.LEAF_SWITCH,
    NodeKind.SPINE_SWITCH: DeviceRole.SPINE_SWITCH,
    NodeKind.SL_ROUTER: DeviceRole.SL_ROUTER,
}

_NODE_CLASS = {
    NodeKind.USER_DEVICE_SOURCE: "user_device",
    NodeKind.USER_DEVICE_PROCESSING: "user_device",
    NodeKind.RFS: "rfs",
    NodeKind.BFS: "bfs",
    NodeKind.CFS: "cfs",
    NodeKind.MFS: "mfs",
    NodeKind.CLOUD_SERVER: "cloud",
}

_COLOR_ROLE = {
    "red": DeviceRole.AP_RED,
    "yellow": DeviceRole.AP_YELLOW,
    "green": DeviceRole.AP_GREEN,
    "blue": DeviceRole.AP_BLUE,
}

_COLOR_GROUP = {"red": "red", "yellow": "yellow", "green": "green_blue", "blue": "green_blue"}


def _bfs(adj: dict[str, list[str]], start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


class _Formulator:
    def __init__(self, topo: Topology, sc: Scenario, cat: DeviceCatalog, opt: FormulationOptions):
        self.topo = topo
        self.sc = sc
        self.cat = cat
        self.opt = opt
        self.snl = topo.variant is Variant.SNL
        self.wl = list(range(len(topo.wavelengths)))
        self.vars: dict[str, VarDef] = {}
        self.rows: list[Row] = []
        self.obj2: dict[str, float] = {}

    # -- plumbing ------------------------------------------------------
    def var(self, name: str, lb: float = 0.0, ub: float | None = None, binary: bool = False) -> str:
        self.vars[name] = VarDef(name, lb, ub, binary)
        return name

    def row(self, coeffs: dict[str, float], sense: str, rhs: float, tag: str) -> None:
        self.rows.append(Row(coeffs, sense, rhs, tag))

    def add_power(self, meta: InstanceMeta, node: str, agg: str, role_profile, component: str) -> None:
        agg_var = {"mu": meta.mu, "sigma": meta.sig, "lambda_q": meta.lq}[agg][node]
        theta = meta.theta[node]
        slope, idle = role_profile
        self.obj2[agg_var] = self.obj2.get(agg_var, 0.0) + slope
        self.obj2[theta] = self.obj2.get(theta, 0.0) + idle
        meta.power_nodes.append(PowerNodeInfo(node, agg, slope, idle, component, theta))

    # -- commodity sub-graphs -------------------------------------------
    def pair_links(self, u: str, d: str) -> dict[int, list[tuple[str, str]]]:
        """Admissible links per wavelength for commodity (u, d)."""
        topo, sc = self.topo, self.sc
        nd = topo.node(d)
        nu = topo.node(u)
        ap_u = sc.wavelength_assignment[u][0]
        allowed = {u, ap_u}
        att = topo.attachments.get(ap_u)
        if att:
            allowed.add(att)
        ap_d = None
        if nd.kind is NodeKind.USER_DEVICE_SOURCE:
            ap_d = sc.wavelength_assignment[d][0]
            allowed.update((d, ap_d))
            att = topo.attachments.get(ap_d)
            if att:
                allowed.add(att)
            dest_room = (nd.building, nd.room)
        elif nd.kind is NodeKind.RFS:
            allowed.add(d)
            att = topo.attachments.get(d)
            if att:
                allowed.add(att)
            dest_room = (nd.building, nd.room)
        else:
            allowed.add(d)
            dest_room = None
        transit = (
            NodeKind.AWGR_IN_PORT,
            NodeKind.AWGR_OUT_PORT,
            NodeKind.AWG,
            NodeKind.OLT,
            NodeKind.ETHERNET_SWITCH,
            NodeKind.AGGREGATION_SWITCH,
            NodeKind.EDGE_ROUTER,
            NodeKind.OPTICAL_SWITCH,
            NodeKind.CORE_ROUTER,
            NodeKind.LEAF_SWITCH,
            NodeKind.SPINE_SWITCH,
            NodeKind.SL_ROUTER,
        )
        for n in topo.nodes:
            if n.kind in transit:
                allowed.add(n.id)
            elif n.kind is NodeKind.COUPLER:
                if (n.building, n.room) == (nu.building, nu.room):
                    allowed.add(n.id)
            elif n.kind is NodeKind.SPLITTER:
                if dest_room is not None and (n.building, n.room) == dest_room:
                    allowed.add(n.id)

        vlc_ends = {NodeKind.USER_DEVICE_SOURCE, NodeKind.USER_DEVICE_PROCESSING}
        base: list[tuple[str, str]] = []
        for (i, j) in self.topo.links:
            if i not in allowed or j not in allowed:
                continue
            if j == u or i == d:
                continue  # nothing enters the source or leaves the sink
            ki, kj = topo.node(i).kind, topo.node(j).kind
            # a user transmits only through its assigned access point, and
            # delivery reaches a processing user device only through its own
            if ki in vlc_ends and j != ap_u:
                continue
            if kj in vlc_ends and (ap_d is None or i != ap_d):
                continue
            base.append((i, j))

        out: dict[int, list[tuple[str, str]]] = {}
        for w in self.wl:
            links = [lk for lk in base if w in self.topo.links[lk]]
            fwd: dict[str, list[str]] = {}
            bwd: dict[str, list[str]] = {}
            for (i, j) in links:
                fwd.setdefault(i, []).append(j)
                bwd.setdefault(j, []).append(i)
            reach_u = _bfs(fwd, u)
            if d not in reach_u:
                continue
            reach_d = _bfs(bwd, d)
            kept = [
                (i, j)
                for (i, j) in links
                if i in reach_u and j in reach_u and i in reach_d and j in reach_d
            ]
            if kept:
                out[w] = kept
        return out

    def mandatory_nodes(self, u: str, d: str, links: list[tuple[str, str]], powered: set[str]) -> set[str]:
        """Powered nodes present on every u->d route of a wavelength sub-graph."""
        candidates = ({i for i, _ in links} | {j for _, j in links}) & powered
        candidates -= {u, d}
        out = {u, d} & powered
        for n in candidates:
            fwd: dict[str, list[str]] = {}
            for (i, j) in links:
                if n not in (i, j):
                    fwd.setdefault(i, []).append(j)
            if d not in _bfs(fwd, u):
                out.add(n)
        return out


def formulate(
    topo: Topology,
    sc: Scenario,
    cat: DeviceCatalog | None = None,
    opt: FormulationOptions | None = None,
) -> MilpInstance:
    """Build the placement MILP for a topology/scenario pair.

    Raises :class:`FormulationError` on id mismatches, on dynamic
    bandwidth allocation outside the PON variants, and on scenarios with
    neither tasks nor processing candidates.
    """
    cat = cat or default_catalog()
    opt = opt or FormulationOptions()
    if opt.dba and topo.variant not in PON_VARIANTS:
        raise FormulationError("dynamic bandwidth allocation applies to PON variants only")
    for dev in list(sc.wavelength_assignment) + [t.source for t in sc.tasks]:
        if not topo.has_node(dev):
            raise FormulationError(f"scenario device {dev!r} not in topology")
    for dev, (ap, color) in sc.wavelength_assignment.items():
        if not topo.has_node(ap):
            raise FormulationError(f"scenario access point {ap!r} not in topology")
        if color not in _COLOR_ROLE:
            raise FormulationError(f"unknown color {color!r}")

    f = _Formulator(topo, sc, cat, opt)
    snl = f.snl

    # -- ordered sets ---------------------------------------------------
    tasks = [TaskInfo(t.source, t.demand_gflops, t.traffic_gbps) for t in sc.tasks]
    gens = [t.source for t in tasks]
    puds = sorted(sc.processing_user_devices)
    rfs_nodes = [n.id for n in topo.nodes_of_kind(NodeKind.RFS)]
    upper = [
        n.id
        for kind in (NodeKind.BFS, NodeKind.CFS, NodeKind.MFS, NodeKind.CLOUD_SERVER)
        for n in topo.nodes_of_kind(kind)
    ]
    dest_ids = puds + rfs_nodes + upper
    if not tasks and not dest_ids:
        raise FormulationError("empty scenario: no tasks and no processing candidates")

    dests = []
    for d in dest_ids:
        kind = topo.node(d).kind
        prof = cat[_KIND_ROLE[kind]]
        dests.append(DestInfo(d, _NODE_CLASS[kind], prof.capacity, prof.slope, prof.p_idle))
    fog_ids = frozenset(puds) | frozenset(rfs_nodes)

    meta = InstanceMeta(
        variant=topo.variant,
        splitting=opt.splitting,
        dba=opt.dba,
        drr=sc.drr,
        wavelengths=topo.wavelengths,
        tasks=tasks,
        dests=dests,
        fog_dest_ids=fog_ids,
    )

    assoc = sc.wavelength_assignment
    ap_src: list[str] = []
    for u in gens:
        ap = assoc[u][0]
        if ap not in ap_src:
            ap_src.append(ap)
    cp: list[str] = []
    for p in puds:
        ap = assoc[p][0]
        if ap not in ap_src and ap not in cp:
            cp.append(ap)
    u_onus = [] if snl else [topo.attachments[r] for r in rfs_nodes]
    q_nodes = [n.id for n in topo.nodes if n.kind in BACKBONE_KINDS]
    sl_nodes = [
        n.id
        for kind in (NodeKind.LEAF_SWITCH, NodeKind.SPINE_SWITCH, NodeKind.SL_ROUTER)
        for n in topo.nodes_of_kind(kind)
    ]

    demand_of = {t.source: t.demand for t in tasks}
    traffic_of_u = {t.source: t.traffic for t in tasks}
    total_flow = 2.0 * sum(t.traffic for t in tasks)  # both-direction aggregate bound

    # -- commodity sub-graphs and wavelength sets ------------------------
    pair_graphs: dict[tuple[str, str], dict[int, list[tuple[str, str]]]] = {}
    for t in tasks:
        for dd in dests:
            if t.source == dd.node:
                continue
            pair_graphs[(t.source, dd.node)] = f.pair_links(t.source, dd.node)

    # -- variables -------------------------------------------------------
    for t in tasks:
        for dd in dests:
            key = (t.source, dd.node)
            if key not in pair_graphs:
                continue
            meta.xi[key] = f.var(f"xi[{key[0]},{key[1]}]", 0, 1, binary=True)
    if opt.splitting:
        for t in tasks:
            meta.acc[t.source] = f.var(f"acc[{t.source}]", 0, 1, binary=True)
    if not snl:
        for key, graphs in pair_graphs.items():
            u = key[0]
            for w in graphs:
                meta.rho[(*key, w)] = f.var(f"rho[{key[0]},{key[1]},{w}]", 0, 1, binary=True)
    for dd in dests:
        meta.beta[dd.node] = f.var(f"beta[{dd.node}]", 0, 1, binary=True)
    theta_domain = ap_src + gens + cp + puds + u_onus + q_nodes + sl_nodes
    for i in theta_domain:
        meta.theta[i] = f.var(f"theta[{i}]", 0, 1, binary=True)

    for key, graphs in pair_graphs.items():
        u, d = key
        meta.psi[key] = f.var(f"psi[{u},{d}]", 0, demand_of[u])
        for w, links in graphs.items():
            meta.lam_w[(*key, w)] = f.var(f"lw[{u},{d},{w}]", 0, traffic_of_u[u])
            flows = []
            for (i, j) in links:
                cap = topo.links[(i, j)][w]
                name = f.var(
                    f"f[{u},{d},{i},{j},{w}]", 0, min(cap, traffic_of_u[u])
                )
                flows.append((i, j, name))
            meta.flow_vars[(*key, w)] = flows

    wij: dict[tuple[str, str, str, str], str] = {}
    if not snl:
        q_set = set(q_nodes)
        for (u, d, w), flows in meta.flow_vars.items():
            for (i, j, _name) in flows:
                if i in q_set or j in q_set:
                    k4 = (u, d, i, j)
                    if k4 not in wij:
                        wij[k4] = f.var(f"w[{u},{d},{i},{j}]", 0, traffic_of_u[u])

    for i in ap_src + gens:
        meta.mu[i] = f.var(f"mu[{i}]", 0)
    for i in cp + puds + u_onus:
        meta.sig[i] = f.var(f"sig[{i}]", 0)
    for i in q_nodes + sl_nodes:
        meta.lq[i] = f.var(f"lq[{i}]", 0)

    # -- aggregate definitions: (1)/(2)/(3) and their scalar twins --------
    touching: dict[str, list[str]] = {}
    fog_touching: dict[str, list[str]] = {}
    for (u, d, w), flows in meta.flow_vars.items():
        for (i, j, name) in flows:
            for n in (i, j):
                touching.setdefault(n, []).append(name)
                if d in fog_ids:
                    fog_touching.setdefault(n, []).append(name)
    tag_mu, tag_sig, tag_lq = ("(40)", "(41)", "(42)") if snl else ("(1)", "(2)", "(3)")
    for i, var in meta.mu.items():
        coeffs = {name: -1.0 for name in touching.get(i, [])}
        coeffs[var] = 1.0
        f.row(coeffs, "=", 0.0, tag_mu)
    for i, var in meta.sig.items():
        coeffs = {name: -1.0 for name in fog_touching.get(i, [])}
        coeffs[var] = 1.0
        f.row(coeffs, "=", 0.0, tag_sig)
    if snl:
        for i, var in meta.lq.items():
            coeffs = {name: -1.0 for name in touching.get(i, [])}
            coeffs[var] = 1.0
            f.row(coeffs, "=", 0.0, tag_lq)
    else:
        # (38) aggregates wavelengths on backbone-facing links, then (3)
        # sums those per backbone device.
        by_pair_link: dict[tuple[str, str, str, str], list[str]] = {}
        for (u, d, w), flows in meta.flow_vars.items():
            for (i, j, name) in flows:
                if (u, d, i, j) in wij:
                    by_pair_link.setdefault((u, d, i, j), []).append(name)
        for k4, names in by_pair_link.items():
            coeffs = {name: -1.0 for name in names}
            coeffs[wij[k4]] = 1.0
            f.row(coeffs, "=", 0.0, "(38)")
        q_touch: dict[str, list[str]] = {}
        for (u, d, i, j), var in wij.items():
            q_touch.setdefault(i, []).append(var)
            q_touch.setdefault(j, []).append(var)
        for i, var in meta.lq.items():
            coeffs = {}
            for name in q_touch.get(i, []):
                coeffs[name] = coeffs.get(name, 0.0) - 1.0
            coeffs[var] = 1.0
            f.row(coeffs, "=", 0.0, tag_lq)

    # -- assignment and demand coupling ----------------------------------
    if opt.splitting:
        for t in tasks:
            coeffs = {
                meta.psi[(t.source, dd.node)]: 1.0
                for dd in dests
                if (t.source, dd.node) in meta.psi
            }
            coeffs[meta.acc[t.source]] = -t.demand
            f.row(coeffs, "=", 0.0, "(19)")
    else:
        for (u, d), psi in meta.psi.items():
            f.row({psi: 1.0, meta.xi[(u, d)]: -demand_of[u]}, "=", 0.0, "(19)")
        for t in tasks:
            coeffs = {
                meta.xi[(t.source, dd.node)]: 1.0
                for dd in dests
                if (t.source, dd.node) in meta.xi
            }
            if coeffs:
                f.row(coeffs, "<=", 1.0, "(34)")
    for dd in dests:
        coeffs = {
            meta.psi[(t.source, dd.node)]: 1.0
            for t in tasks
            if (t.source, dd.node) in meta.psi
        }
        # capacity gated by activation: inactive means no load, active
        # means the plain capacity limit (same integer solutions)
        coeffs[meta.beta[dd.node]] = -dd.omega
        f.row(coeffs, "<=", 0.0, "(20)")

    demand_tag = "(49)" if snl else "(21)"
    for (u, d), psi in meta.psi.items():
        coeffs = {
            meta.lam_w[(u, d, w)]: 1.0
            for w in f.wl
            if (u, d, w) in meta.lam_w
        }
        coeffs[psi] = -sc.drr
        f.row(coeffs, "=", 0.0, demand_tag)

    # -- flow conservation ------------------------------------------------
    cons_tag = "(47)" if snl else "(22)"
    for (u, d, w), flows in meta.flow_vars.items():
        lam = meta.lam_w[(u, d, w)]
        nodes: dict[str, dict[str, float]] = {}
        for (i, j, name) in flows:
            nodes.setdefault(i, {})[name] = 1.0  # outgoing
            nodes.setdefault(j, {})[name] = -1.0  # incoming
        for n, coeffs in nodes.items():
            coeffs = dict(coeffs)
            if n == u:
                coeffs[lam] = -1.0
                f.row(coeffs, "=", 0.0, cons_tag)
            elif n == d:
                coeffs[lam] = 1.0
                f.row(coeffs, "=", 0.0, cons_tag)
            else:
                f.row(coeffs, "=", 0.0, cons_tag)

    # -- link capacities ---------------------------------------------------
    cap_tag = "(48)" if snl else "(23)"
    per_link: dict[tuple[str, str, int], list[str]] = {}
    for (u, d, w), flows in meta.flow_vars.items():
        for (i, j, name) in flows:
            per_link.setdefault((i, j, w), []).append(name)
    share_links = _share_links(topo) if (opt.dba and not snl) else {}
    pooled: dict[tuple[int, int, str, int], list[str]] = {}
    line = topo.params.wavelength_line_rate
    for (i, j, w), names in per_link.items():
        cap = topo.links[(i, j)][w]
        room_dir = share_links.get((i, j))
        if room_dir is not None:
            # dynamic bandwidth allocation: the per-device static share is
            # lifted to the line rate and the room shares one wavelength pool
            cap = line
            pooled.setdefault((*room_dir, w), []).extend(names)
        f.row({name: 1.0 for name in names}, "<=", cap, cap_tag)
    for _key, names in sorted(pooled.items()):
        f.row({name: 1.0 for name in names}, "<=", line, cap_tag)
    if opt.dba:
        for (u, d, w), flows in meta.flow_vars.items():
            for (i, j, name) in flows:
                if (i, j) in share_links:
                    old = f.vars[name]
                    f.vars[name] = VarDef(name, old.lb, min(line, traffic_of_u[u]), False)

    # -- activation linking ------------------------------------------------
    for (u, d), xi in meta.xi.items():
        f.row({xi: demand_of[u], meta.psi[(u, d)]: -1.0}, ">=", 0.0, "(24)")
        f.row({xi: 1.0, meta.psi[(u, d)]: -1.0 / EPSILON}, "<=", 0.0, "(25)")
    for dd in dests:
        beta = meta.beta[dd.node]
        xis = [
            meta.xi[(t.source, dd.node)]
            for t in tasks
            if (t.source, dd.node) in meta.xi
        ]
        for xi in xis:
            f.row({beta: 1.0, xi: -1.0}, ">=", 0.0, "(26)")
        coeffs = {xi: -1.0 for xi in xis}
        coeffs[beta] = 1.0
        f.row(coeffs, "<=", 0.0, "(27)")
    # Per-node aggregate ceilings: every feasible solution keeps a node's
    # both-direction aggregate under these, so they serve as tight
    # activation coefficients (same integer solutions as one global M).
    omega_of = {dd.node: dd.omega for dd in dests}
    gens_on_ap: dict[str, float] = {}
    for t in tasks:
        ap = assoc[t.source][0]
        gens_on_ap[ap] = gens_on_ap.get(ap, 0.0) + t.traffic
    puds_on_ap: dict[str, float] = {}
    for p in puds:
        ap = assoc[p][0]
        puds_on_ap[ap] = puds_on_ap.get(ap, 0.0) + sc.drr * omega_of[p]
    agg_bound: dict[str, float] = {}
    for i in ap_src:
        agg_bound[i] = 2.0 * (gens_on_ap.get(i, 0.0) + puds_on_ap.get(i, 0.0))
    for t in tasks:
        agg_bound[t.source] = t.traffic
    for i in cp:
        agg_bound[i] = 2.0 * puds_on_ap.get(i, 0.0)
    for p in puds:
        agg_bound[p] = sc.drr * omega_of[p]
    for onu_i, rfs_i in zip(u_onus, rfs_nodes):
        agg_bound[onu_i] = 2.0 * sc.drr * omega_of[rfs_i]
    for i in q_nodes + sl_nodes:
        agg_bound[i] = total_flow

    for i, lq in meta.lq.items():
        theta = meta.theta[i]
        f.row({theta: agg_bound[i], lq: -1.0}, ">=", 0.0, "(28)")
        f.row({theta: 1.0, lq: -1.0 / EPSILON}, "<=", 0.0, "(29)")
    for i, sig in meta.sig.items():
        theta = meta.theta[i]
        f.row({theta: agg_bound[i], sig: -1.0}, ">=", 0.0, "(30)")
        f.row({theta: 1.0, sig: -1.0 / EPSILON}, "<=", 0.0, "(31)")
    for i, mu in meta.mu.items():
        theta = meta.theta[i]
        f.row({theta: agg_bound[i], mu: -1.0}, ">=", 0.0, "(32)")
        f.row({theta: 1.0, mu: -1.0 / EPSILON}, "<=", 0.0, "(33)")

    # -- wavelength uniqueness ----------------------------------------------
    if not snl:
        for (u, d, w), rho in meta.rho.items():
            lam = meta.lam_w[(u, d, w)]
            f.row({rho: traffic_of_u[u], lam: -1.0}, ">=", 0.0, "(35)")
            f.row({rho: 1.0, lam: -1.0 / EPSILON}, "<=", 0.0, "(36)")
        for key in pair_graphs:
            rhos = {
                meta.rho[(*key, w)]: 1.0
                for w in f.wl
                if (*key, w) in meta.rho
            }
            if rhos:
                f.row(rhos, "<=", 1.0, "(37)")

    # -- AWGR port discipline -------------------------------------------------
    if not snl:
        for g, (ins, outs) in topo.awgr_groups.items():
            tag = "(50)" if topo.awgr_buildings.get(g) == 2 else "(39)"
            in_set, out_set = set(ins), set(outs)
            for (u, d, w), flows in meta.flow_vars.items():
                coeffs = {
                    name: 1.0
                    for (i, j, name) in flows
                    if i in out_set and j in in_set
                }
                if coeffs:
                    f.row(coeffs, "<=", 0.0, tag)

    # -- mandatory-node strengthening (integer-equivalent tight linking) -----
    # A powered node present on every route of an accepted pair must be
    # active; aggregating those rows over a task's destinations keeps the
    # relaxation from diluting idle power across fractional assignments.
    powered = set(meta.theta)

    def _theta_tag(n: str) -> str:
        return "(28)" if n in meta.lq else "(30)" if n in meta.sig else "(32)"

    always_by: dict[tuple[str, str], list[str]] = {}
    for key, graphs in pair_graphs.items():
        u, d = key
        per_w = {w: f.mandatory_nodes(u, d, links, powered) for w, links in graphs.items()}
        if not per_w:
            continue
        always = set.intersection(*per_w.values())
        for n in always:
            always_by.setdefault((u, n), []).append(meta.xi[key])
        if not snl:
            for w, nodes in per_w.items():
                for n in sorted(nodes - always):
                    f.row(
                        {meta.theta[n]: 1.0, meta.rho[(*key, w)]: -1.0}, ">=", 0.0,
                        _theta_tag(n),
                    )
    for (u, n), xis in sorted(always_by.items()):
        if opt.splitting:
            # a split task may hold several destinations at once, so only
            # the per-pair form stays valid
            for xi in xis:
                f.row({meta.theta[n]: 1.0, xi: -1.0}, ">=", 0.0, _theta_tag(n))
        else:
            coeffs = {xi: -1.0 for xi in xis}
            coeffs[meta.theta[n]] = 1.0
            f.row(coeffs, ">=", 0.0, _theta_tag(n))

    # -- objectives -------------------------------------------------------------
    if opt.splitting:
        obj1 = {meta.acc[t.source]: 1.0 for t in tasks}
    else:
        obj1 = {xi: 1.0 for xi in meta.xi.values()}

    dest_by_id = {dd.node: dd for dd in dests}
    for (u, d), psi in meta.psi.items():
        f.obj2[psi] = f.obj2.get(psi, 0.0) + dest_by_id[d].slope
    for dd in dests:
        f.obj2[meta.beta[dd.node]] = f.obj2.get(meta.beta[dd.node], 0.0) + dd.idle

    onu = cat[DeviceRole.ONU]
    iface = cat[DeviceRole.ETHERNET_INTERFACE]
    for i in ap_src:
        prof = (iface.slope, iface.p_idle) if snl else (onu.slope, onu.p_idle)
        f.add_power(meta, i, "mu", prof, "iface_source" if snl else "source_onu")
    for ucolor in gens:
        role = _COLOR_ROLE[assoc[ucolor][1]]
        prof = cat[role]
        f.add_power(
            meta, ucolor, "mu", (prof.slope, prof.p_idle),
            f"ap_source_{_COLOR_GROUP[assoc[ucolor][1]]}",
        )
    for i in cp:
        prof = (iface.slope, iface.p_idle) if snl else (onu.slope, onu.p_idle)
        f.add_power(meta, i, "sigma", prof, "iface_processing" if snl else "processing_onu")
    for p in puds:
        role = _COLOR_ROLE[assoc[p][1]]
        prof = cat[role]
        f.add_power(
            meta, p, "sigma", (prof.slope, prof.p_idle),
            f"ap_processing_{_COLOR_GROUP[assoc[p][1]]}",
        )
    for i in u_onus:
        f.add_power(meta, i, "sigma", (onu.slope, onu.p_idle), "rfs_onu")
    for i in q_nodes:
        kind = topo.node(i).kind
        if kind is NodeKind.OLT:
            if opt.olt_powered:
                prof = cat[DeviceRole.ETHERNET_SWITCH]
                f.add_power(meta, i, "lambda_q", (prof.slope, prof.p_idle), "backbone")
            else:
                f.add_power(meta, i, "lambda_q", (0.0, 0.0), "backbone")
        else:
            prof = cat[_KIND_ROLE[kind]]
            f.add_power(meta, i, "lambda_q", (prof.slope, prof.p_idle), "backbone")
    for i in sl_nodes:
        prof = cat[_KIND_ROLE[topo.node(i).kind]]
        f.add_power(meta, i, "lambda_q", (prof.slope, prof.p_idle), "switch_fabric")

    return MilpInstance(topo.variant, f.vars, f.rows, obj1, f.obj2, meta)


def _share_links(topo: Topology) -> dict[tuple[str, str], tuple[int, int, str]]:
    """Static per-device share links, keyed to (building, room, direction)."""
    out: dict[tuple[str, str], tuple[int, int, str]] = {}
    for (i, j) in topo.links:
        ni, nj = topo.node(i), topo.node(j)
        if ni.kind is NodeKind.ONU and nj.kind is NodeKind.COUPLER:
            out[(i, j)] = (nj.building or 0, nj.room or 0, "up")
        elif ni.kind is NodeKind.SPLITTER and nj.kind is NodeKind.ONU:
            out[(i, j)] = (ni.building or 0, ni.room or 0, "down")
    return out


# ---------------------------------------------------------------------------
# solution post-processing
# ---------------------------------------------------------------------------


def _value(sol_values: dict[str, float], name: str) -> float:
    try:
        return sol_values[name]
    except KeyError as exc:
        raise IncompleteSolutionError(f"solution missing variable {name!r}") from exc


def accepted_count(sol_values: dict[str, float], inst: MilpInstance) -> int:
    meta = inst.meta
    if meta.splitting:
        return round(sum(_value(sol_values, v) for v in meta.acc.values()))
    return round(sum(_value(sol_values, v) for v in meta.xi.values()))


def power_breakdown(sol_values: dict[str, float], inst: MilpInstance) -> PowerReport:
    """Recompute the power report from flows and activations.

    All aggregates are rebuilt from the per-link flow values rather than
    the solver's aggregate variables, so the report is an independent
    check of the objective value.
    """
    meta = inst.meta
    touching: dict[str, float] = {}
    fog_touch: dict[str, float] = {}
    for (u, d, w), flows in meta.flow_vars.items():
        fog = d in meta.fog_dest_ids
        for (i, j, name) in flows:
            val = _value(sol_values, name)
            for n in (i, j):
                touching[n] = touching.get(n, 0.0) + val
                if fog:
                    fog_touch[n] = fog_touch.get(n, 0.0) + val

    components: dict[str, float] = {}
    pn = 0.0
    for pnode in meta.power_nodes:
        agg = fog_touch.get(pnode.node, 0.0) if pnode.agg == "sigma" else touching.get(pnode.node, 0.0)
        active = _value(sol_values, pnode.theta)
        term = pnode.slope * agg + pnode.idle * active
        components[pnode.component] = components.get(pnode.component, 0.0) + term
        pn += term

    pc = 0.0
    assignments: dict[str, float] = {}
    for dd in meta.dests:
        load = sum(
            _value(sol_values, meta.psi[(t.source, dd.node)])
            for t in meta.tasks
            if (t.source, dd.node) in meta.psi
        )
        pc += dd.slope * load + dd.idle * _value(sol_values, meta.beta[dd.node])
        if load > 1e-9:
            assignments[dd.node] = load

    return PowerReport(
        pc=pc,
        pn=pn,
        tpc=pc + pn,
        components=components,
        y_accepted=accepted_count(sol_values, inst),
        assignments=assignments,
    )


def validate(sol_values: dict[str, float], inst: MilpInstance) -> list[Violation]:
    """All constraint/bound/integrality violations beyond 1e-6, tagged."""
    out: list[Violation] = []
    for var in inst.variables.values():
        val = _value(sol_values, var.name)
        if val < var.lb - VALIDATION_TOL:
            out.append(Violation("bound", f"{var.name} below lower bound", var.lb - val))
        if var.ub is not None and val > var.ub + VALIDATION_TOL:
            out.append(Violation("bound", f"{var.name} above upper bound", val - var.ub))
        if var.binary and abs(val - round(val)) > VALIDATION_TOL:
            out.append(Violation("integrality", f"{var.name} not integral", abs(val - round(val))))
    for k, row in enumerate(inst.rows):
        lhs = sum(c * _value(sol_values, name) for name, c in row.coeffs.items())
        gap = lhs - row.rhs
        bad = (
            (row.sense == "=" and abs(gap) > VALIDATION_TOL)
            or (row.sense == "<=" and gap > VALIDATION_TOL)
            or (row.sense == ">=" and gap < -VALIDATION_TOL)
        )
        if bad:
            out.append(Violation(row.tag, f"row {k} {row.sense} {row.rhs}", abs(gap)))
    return out


def export_lp(inst: MilpInstance, stage: int = 2) -> str:
    """Instance in CPLEX LP text format with tags embedded in row names."""
    obj = inst.objective_stage2 if stage == 2 else inst.objective_stage1
    sense = "Minimize" if stage == 2 else "Maximize"
    lines = [f"\\ placement instance, stage {stage}", sense, " obj:"]
    terms = [f" {'+' if c >= 0 else '-'} {abs(c):.12g} {n}" for n, c in obj.items()]
    lines.extend(_wrap(terms) or ["   0 dummy_zero"])
    lines.append("Subject To")
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for k, row in enumerate(inst.rows):
        name = f"r{k}_{_safe_tag(row.tag)}"
        terms = [
            f" {'+' if c >= 0 else '-'} {abs(c):.12g} {n}" for n, c in row.coeffs.items()
        ]
        body = "".join(terms)
        lines.append(f" {name}:{body} {op[row.sense]} {row.rhs:.12g}")
    lines.append("Bounds")
    for var in inst.variables.values():
        ub = "+inf" if var.ub is None else f"{var.ub:.12g}"
        lines.append(f" {var.lb:.12g} <= {var.name} <= {ub}")
    if not obj:
        lines.append(" 0 <= dummy_zero <= 0")
    binaries = [v.name for v in inst.variables.values() if v.binary]
    if binaries:
        lines.append("Binary")
        lines.extend(f" {name}" for name in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def _safe_tag(tag: str) -> str:
    return "".join(ch for ch in tag if ch.isalnum()) or "row"


def _wrap(terms: list[str]) -> list[str]:
    return ["".join(terms)] if terms else []
