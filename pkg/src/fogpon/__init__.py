"""Optimal fog task placement over PON and spine-and-leaf backhauls.

The package models an indoor VLC access layer backhauled by either a
wavelength-routed passive optical network or a spine-and-leaf switch
fabric, formulates task placement as a two-stage mixed-integer program
(maximize accepted tasks, then minimize processing plus networking
power), and solves it exactly.
"""

from .netmodel import (
    MissingLinkError,
    Node,
    NodeKind,
    PASSIVE_KINDS,
    Topology,
    TopologyError,
    TopologyParams,
    Variant,
    adjacency_dump,
    build_topology,
    default_params,
    link_capacity,
)
from .powermodel import (
    DeviceCatalog,
    DeviceRole,
    PowerModelError,
    PowerProfile,
    catalog_with_overrides,
    default_catalog,
    device_power,
)
from .scenario import (
    Case,
    DRR,
    Scenario,
    ScenarioError,
    Task,
    build_scenario,
    scenario_from_file,
    traffic_of,
)
from .milp import (
    FormulationError,
    FormulationOptions,
    IncompleteSolutionError,
    MilpInstance,
    PowerReport,
    Violation,
    export_lp,
    formulate,
    power_breakdown,
    validate,
)
from .solver import (
    BruteForceLimits,
    BudgetExhausted,
    InstanceExceedsCaps,
    Solution,
    SolverConfig,
    SolverError,
    brute_force,
    lp_relax,
    solve,
)
from .bench import (
    RunArtifact,
    RunRow,
    SavingsReport,
    SweepSpec,
    cloud_only_run,
    run_sweep,
    savings,
    solve_point,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
