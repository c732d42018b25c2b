"""Dollar cost of a network from its topology and bandwidth allocation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .netsim import BwAllocation, SimReport
from .topology import BlockKind, Topology


@dataclass(frozen=True)
class UnitCosts:
    link_per_gbps: float = 2.0
    nic_per_gbps: float = 48.0
    switch_per_radix_gbps: float = 24.0

    def __post_init__(self):
        if min(self.link_per_gbps, self.nic_per_gbps, self.switch_per_radix_gbps) < 0:
            raise ValueError("unit costs must be >= 0")


@dataclass(frozen=True)
class DimCost:
    link_cost: float
    nic_cost: float
    switch_cost: float

    @property
    def total(self) -> float:
        return self.link_cost + self.nic_cost + self.switch_cost


@dataclass(frozen=True)
class CostBreakdown:
    per_dim: tuple[DimCost, ...] = field(default_factory=tuple)

    @property
    def total(self) -> float:
        return sum(d.total for d in self.per_dim)

    @property
    def links(self) -> float:
        return sum(d.link_cost for d in self.per_dim)

    @property
    def nics(self) -> float:
        return sum(d.nic_cost for d in self.per_dim)

    @property
    def switches(self) -> float:
        return sum(d.switch_cost for d in self.per_dim)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "links": self.links,
            "nics": self.nics,
            "switches": self.switches,
            "per_dim": [
                {"link_cost": d.link_cost, "nic_cost": d.nic_cost, "switch_cost": d.switch_cost}
                for d in self.per_dim
            ],
        }


def network_cost(t: Topology, per_dim_bw, costs: UnitCosts = UnitCosts()) -> CostBreakdown:
    """Price every NPU's injection bandwidth into each dimension.

    Links are charged on all dimensions. Switch dimensions also pay one NIC
    per NPU and one switch per group, with radix equal to the group size.
    ``per_dim_bw`` is a BwAllocation or a plain sequence of GB/s values; zero
    bandwidth is allowed here and costs nothing.
    """
    bws = per_dim_bw.per_dim if isinstance(per_dim_bw, BwAllocation) else tuple(per_dim_bw)
    if len(bws) != len(t):
        raise ValueError(f"{len(bws)} bandwidths given for {len(t)} dimensions of {t.name}")
    if any(b < 0 for b in bws):
        raise ValueError("bandwidths must be >= 0")
    npus = t.npu_count
    dims = []
    for block, b in zip(t.dims, bws):
        link = npus * b * costs.link_per_gbps
        nic = switch = 0.0
        if block.kind is BlockKind.SWITCH:
            nic = npus * b * costs.nic_per_gbps
            groups = npus // block.size
            switch = groups * block.size * b * costs.switch_per_radix_gbps
        dims.append(DimCost(link, nic, switch))
    return CostBreakdown(tuple(dims))


def perf_per_cost(sim: SimReport | float, cost: CostBreakdown | float) -> float:
    """Training iterations per second per dollar: ``1 / (time * cost)``."""
    time = sim.iteration_time if isinstance(sim, SimReport) else float(sim)
    total = cost.total if isinstance(cost, CostBreakdown) else float(cost)
    if time <= 0 or total <= 0:
        raise ValueError("iteration time and cost must both be positive")
    return 1.0 / (time * total)
