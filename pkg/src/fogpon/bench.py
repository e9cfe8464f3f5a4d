"""Experiment harness: demand sweeps, savings comparisons, and the CLI.

A sweep solves one (architecture, scenario, case) combination across a
demand range and records, per demand: accepted tasks, processing power,
networking power, total power, and the per-node processing assignment.
Savings reports compare two runs point by point, skipping demands where
either run rejected tasks, and average over the remaining grid.

CLI::

    fogpon solve --arch pon1 --scenario 1 --case clustered --demand 8
    fogpon sweep --arch pon1 --scenario 1 --case clustered \
        --demand-min 6 --demand-max 20 --out run.csv
    fogpon compare --baseline a.csv --target b.csv --out savings.csv
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .milp import FormulationOptions, MilpInstance, formulate, power_breakdown, validate
from .netmodel import Topology, Variant, build_topology
from .powermodel import DeviceCatalog, catalog_with_overrides, default_catalog
from .scenario import Case, build_scenario
from .solver import BudgetExhausted, SolverConfig, solve

CSV_FIELDS = [
    "demand_gflops",
    "arch",
    "scenario",
    "case",
    "options",
    "y_accepted",
    "pc_w",
    "pn_w",
    "tpc_w",
]


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    architectures: tuple[str, ...]
    scenario_id: int
    case: Case
    demand_min: float
    demand_max: float
    splitting: bool = False
    dba: bool = False
    cloud_only: bool = False
    olt_powered: bool = True
    out_path: str | None = None

    def __post_init__(self) -> None:
        if self.demand_min > self.demand_max:
            raise BenchError("demand range is empty the wrong way around")
        for arch in self.architectures:
            Variant(arch)

    def demands(self) -> list[float]:
        out, d = [], self.demand_min
        while d <= self.demand_max + 1e-9:
            out.append(d)
            d += 1.0
        return out


@dataclass
class RunRow:
    demand: float
    arch: str
    scenario_id: int
    case: Case
    options: str
    y: int
    pc: float
    pn: float
    tpc: float
    task_count: int
    assignments: dict[str, float]
    node_classes: dict[str, float]
    flagged: str = ""
    solve_seconds: float = 0.0

    @property
    def all_accepted(self) -> bool:
        return self.y == self.task_count


@dataclass
class RunArtifact:
    spec: SweepSpec
    rows: list[RunRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_FIELDS + ["assignments..."])
        for r in self.rows:
            base = [
                f"{r.demand:g}", r.arch, r.scenario_id, r.case.value, r.options,
                r.y, f"{r.pc:.6f}", f"{r.pn:.6f}", f"{r.tpc:.6f}",
            ]
            pairs = [f"{n}:{v:.6f}" for n, v in sorted(r.assignments.items())]
            if r.flagged:
                pairs.append(f"flagged:{r.flagged}")
            writer.writerow(base + pairs)
        return buf.getvalue()


@dataclass(frozen=True)
class SavingsReport:
    demands: tuple[float, ...]
    pc_savings: tuple[float, ...]
    pn_savings: tuple[float, ...]
    tpc_savings: tuple[float, ...]
    excluded_demands: tuple[float, ...]

    @property
    def avg_pc(self) -> float:
        return sum(self.pc_savings) / len(self.pc_savings)

    @property
    def avg_pn(self) -> float:
        return sum(self.pn_savings) / len(self.pn_savings)

    @property
    def avg_tpc(self) -> float:
        return sum(self.tpc_savings) / len(self.tpc_savings)


def options_label(splitting: bool, dba: bool, cloud_only: bool) -> str:
    parts = [name for flag, name in ((splitting, "split"), (dba, "dba"), (cloud_only, "cloud-only")) if flag]
    return "+".join(parts) if parts else "none"


def cloud_only_instance(inst: MilpInstance) -> MilpInstance:
    """Copy of the instance with every non-cloud assignment disabled."""
    cloud_ids = {d.node for d in inst.meta.dests if d.node_class == "cloud"}
    updates = {}
    for (u, d), name in inst.meta.xi.items():
        if d not in cloud_ids:
            updates[name] = (0.0, 0.0)
    return inst.with_bound(updates)


def solve_point(
    arch: str | Variant,
    scenario_id: int,
    case: Case | str,
    demand: float,
    splitting: bool = False,
    dba: bool = False,
    cloud_only: bool = False,
    catalog: DeviceCatalog | None = None,
    olt_powered: bool = True,
    topo: Topology | None = None,
    solver_config: SolverConfig | None = None,
) -> RunRow:
    """Build, solve and audit a single sweep point."""
    variant = Variant(arch)
    topo = topo or build_topology(variant)
    case = Case(case)
    cat = catalog or default_catalog()
    sc = build_scenario(scenario_id, case, demand, topo, splittable=splitting)
    inst = formulate(topo, sc, cat, FormulationOptions(splitting=splitting, dba=dba, olt_powered=olt_powered))
    if cloud_only:
        inst = cloud_only_instance(inst)
    label = options_label(splitting, dba, cloud_only)
    t0 = time.monotonic()
    flagged = ""
    try:
        sol = solve(inst, solver_config)
    except BudgetExhausted as exc:
        elapsed = time.monotonic() - t0
        row = RunRow(
            demand, variant.value, scenario_id, case, label,
            0, 0.0, 0.0, 0.0, inst.task_count, {}, {},
            flagged=f"budget-exhausted: {exc}", solve_seconds=elapsed,
        )
        return row
    elapsed = time.monotonic() - t0
    bad = validate(sol.values, inst)
    if bad:
        flagged = f"validation: {bad[0].tag}"
    report = power_breakdown(sol.values, inst)
    classes: dict[str, float] = {}
    class_of = {d.node: d.node_class for d in inst.meta.dests}
    for node, load in report.assignments.items():
        cls = class_of[node]
        classes[cls] = classes.get(cls, 0.0) + load
    return RunRow(
        demand, variant.value, scenario_id, case, label,
        sol.y, report.pc, report.pn, report.tpc,
        inst.task_count, report.assignments, classes,
        flagged=flagged, solve_seconds=elapsed,
    )


def run_sweep(spec: SweepSpec, catalog: DeviceCatalog | None = None,
              solver_config: SolverConfig | None = None) -> RunArtifact:
    """Solve every (demand, architecture) point of the spec.

    Solver budget exhaustion flags the row and the sweep continues.
    Rows are ordered by demand then architecture; reruns are bit-stable.
    """
    art = RunArtifact(spec)
    topos = {arch: build_topology(Variant(arch)) for arch in spec.architectures}
    for demand in spec.demands():
        for arch in spec.architectures:
            row = solve_point(
                arch, spec.scenario_id, spec.case, demand,
                splitting=spec.splitting, dba=spec.dba, cloud_only=spec.cloud_only,
                catalog=catalog, olt_powered=spec.olt_powered,
                topo=topos[arch], solver_config=solver_config,
            )
            art.rows.append(row)
    if spec.out_path:
        Path(spec.out_path).write_text(art.to_csv())
    return art


def cloud_only_run(spec: SweepSpec, catalog: DeviceCatalog | None = None,
                   solver_config: SolverConfig | None = None) -> RunArtifact:
    """Same pipeline with all non-cloud processing disabled."""
    forced = SweepSpec(
        spec.architectures, spec.scenario_id, spec.case,
        spec.demand_min, spec.demand_max,
        splitting=spec.splitting, dba=spec.dba, cloud_only=True,
        olt_powered=spec.olt_powered, out_path=spec.out_path,
    )
    return run_sweep(forced, catalog, solver_config)


def savings(baseline: RunArtifact, target: RunArtifact) -> SavingsReport:
    """Percentage savings of target vs baseline per demand and on average.

    Demands where either run rejected tasks (or was flagged) are excluded
    from the averages and reported separately.
    """
    base_rows = {r.demand: r for r in baseline.rows}
    tgt_rows = {r.demand: r for r in target.rows}
    if set(base_rows) != set(tgt_rows):
        raise BenchError("runs do not share a demand grid")
    demands, pcs, pns, tpcs, excluded = [], [], [], [], []
    for d in sorted(base_rows):
        b, t = base_rows[d], tgt_rows[d]
        if not (b.all_accepted and t.all_accepted) or b.flagged or t.flagged:
            excluded.append(d)
            continue
        if b.tpc <= 0:
            raise BenchError(f"baseline power is zero at demand {d}")
        demands.append(d)
        pcs.append(100.0 * (b.pc - t.pc) / b.pc if b.pc > 0 else 0.0)
        pns.append(100.0 * (b.pn - t.pn) / b.pn if b.pn > 0 else 0.0)
        tpcs.append(100.0 * (b.tpc - t.tpc) / b.tpc)
    if not demands:
        raise BenchError("no common fully-served demands to compare")
    return SavingsReport(tuple(demands), tuple(pcs), tuple(pns), tuple(tpcs), tuple(excluded))


def savings_csv(report: SavingsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["demand_gflops", "pc_savings_pct", "pn_savings_pct", "tpc_savings_pct"])
    for d, pc, pn, tpc in zip(report.demands, report.pc_savings, report.pn_savings, report.tpc_savings):
        w.writerow([f"{d:g}", f"{pc:.4f}", f"{pn:.4f}", f"{tpc:.4f}"])
    w.writerow(["average", f"{report.avg_pc:.4f}", f"{report.avg_pn:.4f}", f"{report.avg_tpc:.4f}"])
    return buf.getvalue()


def load_run_csv(path: str | Path) -> RunArtifact:
    """Rebuild a run artifact from its CSV (for `compare`)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[: len(CSV_FIELDS)] != CSV_FIELDS:
            raise BenchError(f"{path}: not a sweep CSV")
        for rec in reader:
            demand, arch, scenario_id, case, options, y, pc, pn, tpc = rec[:9]
            assignments, flagged = {}, ""
            for pair in rec[9:]:
                key, _, val = pair.partition(":")
                if key == "flagged":
                    flagged = val
                else:
                    assignments[key] = float(val)
            n_tasks_guess = int(y)
            rows.append(
                RunRow(
                    float(demand), arch, int(scenario_id), Case(case), options,
                    int(y), float(pc), float(pn), float(tpc),
                    task_count=n_tasks_guess if not flagged else -1,
                    assignments=assignments, node_classes={}, flagged=flagged,
                )
            )
    spec = SweepSpec(
        (rows[0].arch,) if rows else ("pon1",),
        rows[0].scenario_id if rows else 1,
        rows[0].case if rows else Case.CLUSTERED,
        rows[0].demand if rows else 6,
        rows[-1].demand if rows else 6,
    )
    art = RunArtifact(spec)
    art.rows = rows
    return art


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", required=True, choices=[v.value for v in Variant])
    p.add_argument("--scenario", required=True, type=int, choices=[1, 2, 3])
    p.add_argument("--case", required=True, choices=[c.value for c in Case])
    p.add_argument("--split", action="store_true", help="allow task splitting")
    p.add_argument("--dba", action="store_true", help="dynamic bandwidth allocation")
    p.add_argument("--cloud-only", action="store_true", help="force all tasks to the cloud")
    p.add_argument("--catalog", help="JSON file with device power overrides")
    p.add_argument(
        "--olt-profile", choices=["ethernet-switch", "none"], default="ethernet-switch",
        help="power profile accounted for the OLT",
    )
    p.add_argument("--out", help="output CSV path")


def _catalog_from(args) -> DeviceCatalog:
    return catalog_with_overrides(args.catalog) if args.catalog else default_catalog()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fogpon",
        description="Optimal fog task placement over PON / spine-and-leaf backhauls",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a single demand point")
    _add_common(p_solve)
    p_solve.add_argument("--demand", required=True, type=float)

    p_sweep = sub.add_parser("sweep", help="solve a demand range")
    _add_common(p_sweep)
    p_sweep.add_argument("--demand-min", required=True, type=float)
    p_sweep.add_argument("--demand-max", required=True, type=float)

    p_cmp = sub.add_parser("compare", help="savings of a target run vs a baseline run")
    p_cmp.add_argument("--baseline", required=True)
    p_cmp.add_argument("--target", required=True)
    p_cmp.add_argument("--out", help="output CSV path")

    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            report = savings(load_run_csv(args.baseline), load_run_csv(args.target))
            text = savings_csv(report)
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return 0

        lo = args.demand if args.command == "solve" else args.demand_min
        hi = args.demand if args.command == "solve" else args.demand_max
        spec = SweepSpec(
            (args.arch,), args.scenario, Case(args.case), lo, hi,
            splitting=args.split, dba=args.dba, cloud_only=args.cloud_only,
            olt_powered=args.olt_profile == "ethernet-switch",
            out_path=args.out,
        )
        art = run_sweep(spec, catalog=_catalog_from(args))
        if not args.out:
            sys.stdout.write(art.to_csv())
        return 0
    except (BenchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
