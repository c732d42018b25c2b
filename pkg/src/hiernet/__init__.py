"""Analytical performance and cost model for multi-dimensional training networks."""

from .bw_alloc import (
    AllocScheme,
    SolverError,
    TrafficProfile,
    allocate,
    equal_bw,
    fluid_comm_time,
    message_bw,
    smart_bw,
    smart_bw_shared,
    smart_bw_unshared,
    traffic_profile,
    two_phase_time,
)
from .cost import CostBreakdown, DimCost, UnitCosts, network_cost, perf_per_cost
from .dataflow import run_dataflow, verify_schedule_dataflow
from .explorer import (
    ConfigError,
    ReportRow,
    SweepConfig,
    emit_report,
    last_dim_traffic,
    load_config,
    nic_multipliers,
    run_sweep,
)
from .netsim import BwAllocation, NetParams, SimReport, simulate_collective, simulate_iteration
from .schedule import (
    Algorithm,
    CollectiveSchedule,
    Stage,
    StageKind,
    Step,
    build_basic_stage,
    build_hierarchical_allreduce,
    per_dim_traffic,
)
from .topology import BlockKind, DimBlock, Topology, TopologyError, npu_count, parse_topology, topology_name
from .workload import MappingError, ParallelismMapping, Workload, load_workloads, map_parallelism

__version__ = "0.1.0"
