"""Analytical simulation of chunked hierarchical collectives.

Every dimension is one serial resource. Chunk-stages queue on their
dimension in arrival order (ties broken by chunk, then stage) and each
step costs ``latency * hops + bytes / bandwidth``. Bandwidths are GB/s
per NPU with 1 GB = 1e9 bytes.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .schedule import CollectiveSchedule, Stage, build_hierarchical_allreduce, groups_for
from .topology import BlockKind, Topology
from .workload import ParallelismMapping, Workload, comm_volumes, map_parallelism

GB = 1e9
DEFAULT_HOPS = {BlockKind.RING: 1, BlockKind.FULLY_CONNECTED: 1, BlockKind.SWITCH: 2}
BUDGET_RTOL = 1e-9


@dataclass(frozen=True)
class NetParams:
    link_latency: float = 500e-9
    hops_per_block: Mapping[BlockKind, int] = field(default_factory=lambda: dict(DEFAULT_HOPS))
    chunks: int = 4

    def __post_init__(self):
        if self.link_latency < 0:
            raise ValueError("link_latency must be >= 0")
        if self.chunks < 1:
            raise ValueError("chunks must be >= 1")
        hops = {}
        for k, v in dict(self.hops_per_block).items():
            kind = k if isinstance(k, BlockKind) else BlockKind.from_name(k)
            if v < 1:
                raise ValueError(f"hops for {kind.value} must be >= 1")
            hops[kind] = int(v)
        object.__setattr__(self, "hops_per_block", {**DEFAULT_HOPS, **hops})

    def hops(self, kind: BlockKind) -> int:
        return self.hops_per_block[kind]


@dataclass(frozen=True)
class BwAllocation:
    per_dim: tuple[float, ...]
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "per_dim", tuple(float(b) for b in self.per_dim))
        if not self.per_dim:
            raise ValueError("allocation needs at least one dimension")
        if any(not b > 0 for b in self.per_dim):
            raise ValueError(f"every dimension needs positive bandwidth: {self.per_dim}")
        if not math.isclose(sum(self.per_dim), self.budget, rel_tol=BUDGET_RTOL):
            raise ValueError(f"bandwidths sum to {sum(self.per_dim)}, budget is {self.budget}")

    def __len__(self):
        return len(self.per_dim)

    def bw(self, dim: int) -> float:
        """Bandwidth of 1-based dimension ``dim``."""
        return self.per_dim[dim - 1]

    def scaled(self, factor: float) -> "BwAllocation":
        return BwAllocation(tuple(b * factor for b in self.per_dim), self.budget * factor)


@dataclass
class CommReport:
    comm_time: float
    per_dim_busy: list[float]
    per_dim_bytes: list[float]
    # (dim, chunk, stage index, start, end)
    timeline: list[tuple] = field(default_factory=list, repr=False)


@dataclass
class SimReport:
    iteration_time: float
    compute_time: float
    mp_comm_time: float
    dp_comm_time: float
    avg_bw_utilization: float
    per_dim_utilization: list[float]
    per_dim_busy: list[float]
    per_dim_bytes: list[float]
    mp: Optional[CommReport] = field(default=None, repr=False)
    dp: Optional[CommReport] = field(default=None, repr=False)

    @property
    def comm_time(self) -> float:
        return self.mp_comm_time + self.dp_comm_time

    def to_dict(self) -> dict:
        return {
            "iteration_time": self.iteration_time,
            "compute_time": self.compute_time,
            "mp_comm_time": self.mp_comm_time,
            "dp_comm_time": self.dp_comm_time,
            "avg_bw_utilization": self.avg_bw_utilization,
            "per_dim_utilization": list(self.per_dim_utilization),
            "per_dim_busy": list(self.per_dim_busy),
            "per_dim_bytes": list(self.per_dim_bytes),
        }


def transfer_time(nbytes: float, bandwidth: float, hops: int, link_latency: float) -> float:
    """Link delay plus serialization; ``bandwidth`` in GB/s."""
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if nbytes < 0:
        raise ValueError(f"byte count must be >= 0, got {nbytes}")
    return link_latency * hops + nbytes / (bandwidth * GB)


def stage_duration(stage: Stage, bw: float, params: NetParams) -> float:
    hops = params.hops(stage.block_kind)
    return sum(transfer_time(s.bytes_per_npu, bw, hops, params.link_latency) for s in stage.steps)


def simulate_collective(
    schedule: CollectiveSchedule, alloc: BwAllocation, params: NetParams, keep_timeline: bool = False
) -> CommReport:
    n_dims = len(alloc)
    stages = schedule.stages
    for st in stages:
        if not 1 <= st.dim_index <= n_dims:
            raise ValueError(f"schedule uses Dim {st.dim_index}, allocation has {n_dims}")
    durations = [stage_duration(st, alloc.bw(st.dim_index), params) for st in stages]

    busy = [0.0] * n_dims
    moved = [0.0] * n_dims
    queues = {d: deque() for d in range(1, n_dims + 1)}
    running: dict[int, tuple] = {}
    events: list[tuple] = []  # (time, chunk, stage)
    timeline = []
    finish = 0.0

    arrivals = [(c, 0) for c in range(schedule.chunks)]
    now = 0.0
    while True:
        for c, s in sorted(arrivals):
            queues[stages[s].dim_index].append((c, s))
        arrivals = []
        for d, q in queues.items():
            if d not in running and q:
                c, s = q.popleft()
                end = now + durations[s]
                running[d] = (c, s)
                heapq.heappush(events, (end, c, s))
                busy[d - 1] += durations[s]
                moved[d - 1] += stages[s].sent_bytes
                if keep_timeline:
                    timeline.append((d, c, s, now, end))
        if not events:
            break
        now = events[0][0]
        while events and events[0][0] == now:
            _, c, s = heapq.heappop(events)
            del running[stages[s].dim_index]
            finish = max(finish, now)
            if s + 1 < len(stages):
                arrivals.append((c, s + 1))
    return CommReport(finish, busy, moved, timeline)


def _collective(t: Topology, groups, nbytes: float, alloc: BwAllocation, params: NetParams):
    if nbytes <= 0 or not groups:
        return None
    sched = build_hierarchical_allreduce(groups_for(t, groups), nbytes, params.chunks)
    return simulate_collective(sched, alloc, params)


def simulate_iteration(
    t: Topology,
    w: Workload,
    mapping: Optional[ParallelismMapping],
    alloc: BwAllocation,
    params: NetParams,
) -> SimReport:
    """MP All-Reduce, then DP All-Reduce, then compute; nothing overlaps."""
    if mapping is None:
        mapping = map_parallelism(t, w)
    if len(alloc) != len(t):
        raise ValueError(f"allocation has {len(alloc)} dims, topology {t.name} has {len(t)}")
    if mapping.mp_size != w.mp_size or mapping.dp_size != w.dp_size:
        raise ValueError(f"mapping does not match {w.name}'s MP/DP sizes")
    m_mp, m_dp = comm_volumes(w)
    mp = _collective(t, mapping.mp_groups(), m_mp, alloc, params)
    dp = _collective(t, mapping.dp_groups(), m_dp, alloc, params)
    n = len(t)
    busy = [0.0] * n
    moved = [0.0] * n
    for rep in (mp, dp):
        if rep is not None:
            busy = [a + b for a, b in zip(busy, rep.per_dim_busy)]
            moved = [a + b for a, b in zip(moved, rep.per_dim_bytes)]
    mp_time = mp.comm_time if mp else 0.0
    dp_time = dp.comm_time if dp else 0.0
    comm = mp_time + dp_time
    if comm > 0:
        per_util = [b / comm for b in busy]
        avg = sum(bw * b for bw, b in zip(alloc.per_dim, busy)) / (alloc.budget * comm)
    else:
        per_util = [0.0] * n
        avg = 0.0
    return SimReport(
        iteration_time=w.compute_time + comm,
        compute_time=w.compute_time,
        mp_comm_time=mp_time,
        dp_comm_time=dp_time,
        avg_bw_utilization=avg,
        per_dim_utilization=per_util,
        per_dim_busy=busy,
        per_dim_bytes=moved,
        mp=mp,
        dp=dp,
    )
