"""Exact lexicographic solver and an independent enumeration oracle.

``solve`` runs two branch-and-bound passes over the instance: first it
maximizes the number of accepted tasks, then, with that count pinned, it
minimizes total power consumption.  Bounds come from linear-programming
relaxations (HiGHS via scipy); branching is on the lowest-index
fractional binary with best-first node selection.  Ties between equal
optima are broken toward the lexicographically smallest activation
vector among the incumbents encountered, so repeated runs reproduce the
same placement.

``brute_force`` is a fully independent oracle for small instances: it
enumerates every assignment/wavelength pattern, derives the activation
set and link loads combinatorially from the per-commodity sub-graphs,
checks every capacity row exactly, and prices power straight from the
instance metadata.  It refuses instances whose routing admits power
ambiguity (a powered node avoidable on some route of the same
wavelength) instead of guessing.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .milp import MilpInstance, Row, accepted_count

INT_TOL = 1e-6
OBJ_TOL = 1e-9


class SolverError(RuntimeError):
    pass


class BudgetExhausted(SolverError):
    """Node or time budget ran out; carries the best incumbent and gap."""

    def __init__(self, message: str, incumbent: dict[str, float] | None, bound: float):
        super().__init__(message)
        self.incumbent = incumbent
        self.bound = bound


class InstanceExceedsCaps(SolverError):
    """Instance outside the enumeration oracle's supported size."""


@dataclass(frozen=True)
class SolverConfig:
    max_nodes: int = 200_000
    time_budget_s: float | None = None
    #: accepted for interface compatibility; exploration is sequential and
    #: the reported solution is deterministic for any value.
    workers: int = 1


@dataclass
class Solution:
    values: dict[str, float]
    y: int
    tpc: float
    status: str  # 'optimal' or 'infeasible'
    nodes_visited: int = 0
    wall_time_s: float = 0.0


@dataclass(frozen=True)
class BruteForceLimits:
    max_tasks: int = 6
    max_dests: int = 8
    max_wavelengths: int = 5
    max_patterns: int = 5_000_000


# ---------------------------------------------------------------------------
# canonical arrays
# ---------------------------------------------------------------------------


class _Canon:
    """Instance compiled to the arrays scipy.linprog consumes."""

    def __init__(self, inst: MilpInstance, extra_rows: list[Row] = ()):  # type: ignore[assignment]
        names = list(inst.variables)
        self.index = {n: k for k, n in enumerate(names)}
        self.names = names
        n = len(names)
        self.lb = np.zeros(n)
        self.ub = np.full(n, np.inf)
        for k, var in enumerate(inst.variables.values()):
            self.lb[k] = var.lb
            if var.ub is not None:
                self.ub[k] = var.ub
        self.binary_idx = [self.index[v.name] for v in inst.variables.values() if v.binary]

        eq_r, eq_c, eq_v, eq_rhs = [], [], [], []
        ub_r, ub_c, ub_v, ub_rhs = [], [], [], []
        for row in list(inst.rows) + list(extra_rows):
            if row.sense == "=":
                r = len(eq_rhs)
                eq_rhs.append(row.rhs)
                for name, c in row.coeffs.items():
                    eq_r.append(r)
                    eq_c.append(self.index[name])
                    eq_v.append(c)
            else:
                sign = 1.0 if row.sense == "<=" else -1.0
                r = len(ub_rhs)
                ub_rhs.append(sign * row.rhs)
                for name, c in row.coeffs.items():
                    ub_r.append(r)
                    ub_c.append(self.index[name])
                    ub_v.append(sign * c)
        self.a_eq = (
            sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_rhs), n))
            if eq_rhs
            else None
        )
        self.b_eq = np.array(eq_rhs) if eq_rhs else None
        self.a_ub = (
            sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(ub_rhs), n))
            if ub_rhs
            else None
        )
        self.b_ub = np.array(ub_rhs) if ub_rhs else None

    def objective(self, coeffs: dict[str, float], sign: float = 1.0) -> np.ndarray:
        c = np.zeros(len(self.names))
        for name, v in coeffs.items():
            c[self.index[name]] = sign * v
        return c

    def lp(self, c: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        res = linprog(
            c,
            A_ub=self.a_ub,
            b_ub=self.b_ub,
            A_eq=self.a_eq,
            b_eq=self.b_eq,
            bounds=np.column_stack((lb, ub)),
            method="highs",
        )
        return res


def _branch_and_bound(
    canon: _Canon,
    c: np.ndarray,
    cfg: SolverConfig,
    deadline: float | None,
    node_budget: list[int],
    seed: tuple[np.ndarray, float] | None = None,
) -> tuple[np.ndarray | None, float, int]:
    """Minimize c over the canonical MILP; returns (x, value, nodes)."""
    best_x: np.ndarray | None = None
    best_val = np.inf
    best_key: tuple | None = None
    if seed is not None:
        best_x, best_val = seed
        best_key = tuple(int(round(best_x[k])) for k in canon.binary_idx)
    visited = 0
    counter = itertools.count()
    root = (canon.lb.copy(), canon.ub.copy())
    res = canon.lp(c, *root)
    if res.status != 0:
        return (None, np.inf, 1) if seed is None else (best_x, best_val, 1)
    # best-first on the bound; newest node first among ties, so the search
    # dives to an integral incumbent before spreading out
    heap = [(res.fun, -next(counter), res, root)]
    while heap:
        bound, _, res, (lb, ub) = heapq.heappop(heap)
        visited += 1
        node_budget[0] -= 1
        if node_budget[0] < 0:
            raise BudgetExhausted("node budget exhausted", _maybe(best_x, canon), bound)
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExhausted("time budget exhausted", _maybe(best_x, canon), bound)
        if bound >= best_val - OBJ_TOL:
            continue
        x = res.x
        frac = None
        for k in canon.binary_idx:
            if abs(x[k] - round(x[k])) > INT_TOL:
                frac = k
                break
        if frac is None:
            key = tuple(int(round(x[k])) for k in canon.binary_idx)
            if best_val - bound > OBJ_TOL or (
                abs(bound - best_val) <= OBJ_TOL and (best_key is None or key < best_key)
            ):
                best_x, best_val, best_key = x, bound, key
            continue
        for val in (0.0, 1.0):
            lb2, ub2 = lb.copy(), ub.copy()
            lb2[frac] = ub2[frac] = val
            child = canon.lp(c, lb2, ub2)
            if child.status != 0:
                continue
            if child.fun < best_val - OBJ_TOL:
                heapq.heappush(heap, (child.fun, -next(counter), child, (lb2, ub2)))
    return best_x, best_val, visited


def _maybe(x: np.ndarray | None, canon: _Canon) -> dict[str, float] | None:
    if x is None:
        return None
    return {name: float(x[k]) for name, k in canon.index.items()}


def solve(inst: MilpInstance, cfg: SolverConfig | None = None) -> Solution:
    """Lexicographic optimum: maximize accepted tasks, then minimize power."""
    cfg = cfg or SolverConfig()
    start = time.monotonic()
    deadline = start + cfg.time_budget_s if cfg.time_budget_s else None
    budget = [cfg.max_nodes]

    if not inst.meta.tasks:
        values = {name: 0.0 for name in inst.variables}
        return Solution(values, 0, 0.0, "optimal", 0, time.monotonic() - start)

    canon1 = _Canon(inst)
    c1 = canon1.objective(inst.objective_stage1, sign=-1.0)  # maximize
    x1, v1, n1 = _branch_and_bound(canon1, c1, cfg, deadline, budget)
    if x1 is None:
        return Solution({}, 0, 0.0, "infeasible", n1, time.monotonic() - start)
    y_star = int(round(-v1))

    pin = Row(dict(inst.objective_stage1), "=", float(y_star), "(18)")
    canon2 = _Canon(inst, extra_rows=[pin])
    c2 = canon2.objective(inst.objective_stage2)
    # the stage-1 incumbent satisfies the pinned acceptance row, so its
    # stage-2 cost warm-starts the second pass
    seed_x = np.array([x1[canon1.index[n]] for n in canon2.names])
    seed = (seed_x, float(c2 @ seed_x))
    x2, v2, n2 = _branch_and_bound(canon2, c2, cfg, deadline, budget, seed=seed)
    if x2 is None:
        raise SolverError("stage 2 infeasible at pinned acceptance; inconsistent instance")
    x2, v2 = _polish(canon2, c2, x2, v2)
    values = {name: float(x2[k]) for name, k in canon2.index.items()}
    for name in values:
        if inst.variables[name].binary:
            values[name] = float(round(values[name]))
    return Solution(
        values,
        accepted_count(values, inst),
        float(v2),
        "optimal",
        n1 + n2,
        time.monotonic() - start,
    )


def _polish(canon: _Canon, c: np.ndarray, x: np.ndarray, val: float):
    """Re-solve the LP with binaries pinned to their rounded values.

    Clears the 1e-6 integrality slack out of the continuous variables so
    solutions satisfy every row at the binaries' exact integer levels.
    """
    lb, ub = canon.lb.copy(), canon.ub.copy()
    for k in canon.binary_idx:
        v = round(x[k])
        lb[k] = ub[k] = v
    res = canon.lp(c, lb, ub)
    if res.status != 0:
        return x, val
    return res.x, float(res.fun)


def lp_relax(inst: MilpInstance, stage1_value: float | None = None) -> float:
    """Stage-2 value of the continuous relaxation with stage 1 pinned.

    ``stage1_value`` defaults to the stage-1 LP optimum; pass the integer
    optimum to obtain a bound certified against the solved instance.
    """
    if not inst.meta.tasks:
        return 0.0
    canon = _Canon(inst)
    if stage1_value is None:
        res = canon.lp(canon.objective(inst.objective_stage1, -1.0), canon.lb, canon.ub)
        if res.status != 0:
            raise SolverError("stage 1 relaxation infeasible")
        stage1_value = -res.fun
    pin = Row(dict(inst.objective_stage1), "=", float(stage1_value), "(18)")
    canon = _Canon(inst, extra_rows=[pin])
    res = canon.lp(canon.objective(inst.objective_stage2), canon.lb, canon.ub)
    if res.status != 0:
        raise SolverError("stage 2 relaxation infeasible")
    return float(res.fun)


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------


@dataclass
class _Route:
    """Deterministic consequences of serving (u, d) on wavelength w."""

    powered: tuple[str, ...]  # mandatory powered nodes
    endpoints: frozenset[str]  # nodes touched once (source/sink) vs twice
    cut_links: frozenset[str]  # flow-variable names carrying the full demand


class _OracleModel:
    def __init__(self, inst: MilpInstance, limits: BruteForceLimits):
        meta = inst.meta
        if meta.splitting:
            raise InstanceExceedsCaps("oracle enumerates unsplittable assignments only")
        if len(meta.tasks) > limits.max_tasks:
            raise InstanceExceedsCaps(f"{len(meta.tasks)} tasks exceed cap {limits.max_tasks}")
        if len(meta.dests) > limits.max_dests:
            raise InstanceExceedsCaps(f"{len(meta.dests)} destinations exceed cap {limits.max_dests}")
        if len(meta.wavelengths) > limits.max_wavelengths:
            raise InstanceExceedsCaps("too many wavelengths")
        self.inst = inst
        self.meta = meta
        self.limits = limits
        self.powered_nodes = {p.node: p for p in meta.power_nodes}

        # var name -> (u, d, w) for capacity accounting
        self.var_pair: dict[str, tuple[str, str, int]] = {}
        for key, flows in meta.flow_vars.items():
            for (_i, _j, name) in flows:
                self.var_pair[name] = key

        self.routes: dict[tuple[str, str, int], _Route] = {}
        for (u, d, w), flows in meta.flow_vars.items():
            route = self._analyze(u, d, flows)
            if route is not None:
                self.routes[(u, d, w)] = route

        self.cap_rows = self._capacity_rows()
        blocked_xi = {
            key for key, name in meta.xi.items() if _fixed_zero(inst, name)
        }
        self.options: dict[str, list[tuple[str, int]]] = {}
        for t in meta.tasks:
            opts = []
            for dd in meta.dests:
                key = (t.source, dd.node)
                if key in blocked_xi:
                    continue
                if dd.omega + 1e-9 < t.demand:
                    continue
                for w in range(len(meta.wavelengths)):
                    if (t.source, dd.node, w) in self.routes:
                        opts.append((dd.node, w))
            self.options[t.source] = opts

    def _analyze(self, u: str, d: str, flows) -> _Route | None:
        adj: dict[str, list[str]] = {}
        for (i, j, _name) in flows:
            adj.setdefault(i, []).append(j)
        if d not in _reach(adj, u):
            return None
        nodes = {i for i, _, _ in flows} | {j for _, j, _ in flows}
        mandatory: list[str] = []
        for n in sorted(nodes & set(self.powered_nodes)):
            if n in (u, d):
                mandatory.append(n)
                continue
            adj2 = {
                i: [j for j in out if j != n]
                for i, out in adj.items()
                if i != n
            }
            if d in _reach(adj2, u):
                raise InstanceExceedsCaps(
                    f"powered node {n} optional on route {u}->{d}; power ambiguous"
                )
            mandatory.append(n)
        cut = self._cut_links(adj, u, d, flows)
        return _Route(tuple(mandatory), frozenset((u, d)), cut)

    @staticmethod
    def _cut_links(adj, u, d, flows) -> frozenset[str]:
        out = set()
        for (i, j, name) in flows:
            trimmed = dict(adj)
            lst = list(trimmed[i])
            lst.remove(j)
            trimmed[i] = lst
            if d not in _reach(trimmed, u):
                out.add(name)
        return frozenset(out)

    def _capacity_rows(self):
        """(vars-by-route, rhs) for every exactly-checkable capacity row."""
        total_by_pair: dict[tuple[str, str], float] = {}
        for t in self.meta.tasks:
            for dd in self.meta.dests:
                total_by_pair[(t.source, dd.node)] = t.traffic
        rows = []
        for row in self.inst.rows:
            if row.tag not in ("(23)", "(48)") or row.sense != "<=":
                continue
            det: dict[tuple[str, str, int], float] = {}
            worst = 0.0
            exact = True
            seen_pairs = set()
            for name, coeff in row.coeffs.items():
                key = self.var_pair.get(name)
                if key is None:
                    exact = False
                    break
                u, d, w = key
                route = self.routes.get(key)
                pair_traffic = total_by_pair.get((u, d), 0.0)
                if (u, d, w) not in seen_pairs:
                    worst += coeff * pair_traffic
                    seen_pairs.add((u, d, w))
                if route is not None and name in route.cut_links:
                    det[key] = det.get(key, 0.0) + coeff * pair_traffic
                else:
                    exact = False
            if exact:
                rows.append((det, row.rhs))
            elif worst > row.rhs + 1e-9:
                raise InstanceExceedsCaps(
                    "capacity row with routing freedom could bind; oracle cannot certify"
                )
        return rows

    # -- pattern evaluation ------------------------------------------------
    def evaluate(self, chosen: dict[str, tuple[str, int] | None]):
        """(feasible, y, tpc, activation_key) for a complete pattern."""
        meta = self.meta
        loads: dict[tuple[str, str, int], float] = {}
        omega_used: dict[str, float] = {}
        agg: dict[str, float] = {}
        active_dests: set[str] = set()
        y = 0
        for t in meta.tasks:
            pick = chosen[t.source]
            if pick is None:
                continue
            d, w = pick
            y += 1
            omega_used[d] = omega_used.get(d, 0.0) + t.demand
            loads[(t.source, d, w)] = t.traffic
            active_dests.add(d)
            route = self.routes[(t.source, d, w)]
            for n in route.powered:
                agg[n] = agg.get(n, 0.0) + (t.traffic if n in route.endpoints else 2.0 * t.traffic)
        for dd in meta.dests:
            if omega_used.get(dd.node, 0.0) > dd.omega + 1e-9:
                return False, 0, 0.0, ()
        for det, rhs in self.cap_rows:
            lhs = sum(v for key, v in det.items() if key in loads)
            if lhs > rhs + 1e-9:
                return False, 0, 0.0, ()

        pc = 0.0
        for dd in meta.dests:
            used = omega_used.get(dd.node, 0.0)
            if dd.node in active_dests:
                pc += dd.idle + dd.slope * used
        pn = 0.0
        for p in meta.power_nodes:
            a = agg.get(p.node, 0.0)
            if a > 1e-12:
                pn += p.idle + p.slope * a
        activation = tuple(
            sorted(n for n, v in agg.items() if v > 1e-12)
        ) + tuple(sorted(active_dests))
        return True, y, pc + pn, activation


def _fixed_zero(inst: MilpInstance, name: str) -> bool:
    var = inst.variables[name]
    return var.ub is not None and var.ub <= 0.0


def _reach(adj: dict[str, list[str]], start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def brute_force(inst: MilpInstance, limits: BruteForceLimits | None = None) -> Solution:
    """Exact lexicographic optimum by exhaustive pattern enumeration.

    Enumerates assignment/wavelength patterns task by task with capacity
    pruning, prices each feasible pattern combinatorially, and keeps the
    lexicographic best (max accepted, then min power, then smallest
    activation set).  Raises :class:`InstanceExceedsCaps` beyond the size
    caps or when routing freedom would make power accounting ambiguous.
    """
    limits = limits or BruteForceLimits()
    start = time.monotonic()
    model = _OracleModel(inst, limits)
    meta = inst.meta
    tasks = meta.tasks
    if not tasks:
        values = {name: 0.0 for name in inst.variables}
        return Solution(values, 0, 0.0, "optimal", 0, time.monotonic() - start)

    n_patterns = 1
    for t in tasks:
        n_patterns *= 1 + len(model.options[t.source])
        if n_patterns > limits.max_patterns:
            raise InstanceExceedsCaps("pattern space exceeds enumeration cap")

    best: tuple[int, float, tuple] | None = None
    best_pattern: dict[str, tuple[str, int] | None] = {}
    chosen: dict[str, tuple[str, int] | None] = {}
    visited = 0

    def rec(k: int) -> None:
        nonlocal best, best_pattern, visited
        if k == len(tasks):
            visited += 1
            ok, y, tpc, act = model.evaluate(chosen)
            if not ok:
                return
            key = (-y, tpc, act)
            if best is None or _lex_better(key, best):
                best = key
                best_pattern = dict(chosen)
            return
        t = tasks[k]
        accepted_so_far = sum(1 for v in chosen.values() if v is not None)
        if best is not None and accepted_so_far + (len(tasks) - k) < -best[0]:
            return  # even full acceptance of the rest cannot reach best Y
        for opt in model.options[t.source] + [None]:
            chosen[t.source] = opt
            rec(k + 1)
        del chosen[t.source]

    rec(0)
    if best is None:
        best = (0, 0.0, ())
        best_pattern = {t.source: None for t in tasks}

    values = _pattern_solution(inst, best_pattern)
    return Solution(
        values, -best[0], best[1], "optimal", visited, time.monotonic() - start
    )


def _lex_better(a: tuple, b: tuple) -> bool:
    if a[0] != b[0]:
        return a[0] < b[0]
    if abs(a[1] - b[1]) > 1e-9:
        return a[1] < b[1]
    return a[2] < b[2]


def _pattern_solution(inst: MilpInstance, pattern: dict[str, tuple[str, int] | None]) -> dict[str, float]:
    """Variable assignment realizing an oracle pattern (single-path flows)."""
    meta = inst.meta
    values = {name: 0.0 for name in inst.variables}
    demand = {t.source: t.demand for t in meta.tasks}
    traffic = {t.source: t.traffic for t in meta.tasks}
    for u, pick in pattern.items():
        if pick is None:
            continue
        d, w = pick
        values[meta.xi[(u, d)]] = 1.0
        values[meta.psi[(u, d)]] = demand[u]
        if (u, d, w) in meta.rho:
            values[meta.rho[(u, d, w)]] = 1.0
        values[meta.lam_w[(u, d, w)]] = traffic[u]
        values[meta.beta[d]] = 1.0
        path = _one_path(meta.flow_vars[(u, d, w)], u, d)
        for name in path:
            values[name] += traffic[u]
    # aggregates and activations follow from flows
    fog = meta.fog_dest_ids
    touch: dict[str, float] = {}
    fog_touch: dict[str, float] = {}
    for (u, d, w), flows in meta.flow_vars.items():
        for (i, j, name) in flows:
            v = values[name]
            if not v:
                continue
            for n in (i, j):
                touch[n] = touch.get(n, 0.0) + v
                if d in fog:
                    fog_touch[n] = fog_touch.get(n, 0.0) + v
    for i, var in meta.mu.items():
        values[var] = touch.get(i, 0.0)
        values[meta.theta[i]] = 1.0 if values[var] > 1e-12 else 0.0
    for i, var in meta.sig.items():
        values[var] = fog_touch.get(i, 0.0)
        values[meta.theta[i]] = 1.0 if values[var] > 1e-12 else 0.0
    for i, var in meta.lq.items():
        values[var] = touch.get(i, 0.0)
        values[meta.theta[i]] = 1.0 if values[var] > 1e-12 else 0.0
    # backbone per-link aggregates
    for (u, d, w), flows in meta.flow_vars.items():
        for (i, j, name) in flows:
            wname = f"w[{u},{d},{i},{j}]"
            if wname in values:
                values[wname] += values[name]
    return values


def _one_path(flows: list[tuple[str, str, str]], u: str, d: str) -> list[str]:
    """Deterministic u->d path as a list of flow-variable names."""
    adj: dict[str, list[tuple[str, str]]] = {}
    for (i, j, name) in flows:
        adj.setdefault(i, []).append((j, name))
    for outs in adj.values():
        outs.sort()
    parent: dict[str, tuple[str, str]] = {}
    stack = [u]
    seen = {u}
    while stack:
        cur = stack.pop()
        if cur == d:
            break
        for (nxt, name) in reversed(adj.get(cur, ())):
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = (cur, name)
                stack.append(nxt)
    if d not in parent and u != d:
        raise SolverError("no path in route sub-graph")
    path = []
    cur = d
    while cur != u:
        prev, name = parent[cur]
        path.append(name)
        cur = prev
    return path
