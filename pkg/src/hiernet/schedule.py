"""Topology-aware basic collectives and the 2N-stage hierarchical All-Reduce.

Byte counts are per NPU. A Reduce-Scatter stage's ``input_bytes`` is the
buffer it starts from; an All-Gather stage's ``input_bytes`` is the shard it
starts from, so its output is ``input_bytes * group_size``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Iterable, Union

from .topology import BlockKind, DimBlock, Topology


class ScheduleError(ValueError):
    pass


class StageKind(enum.Enum):
    REDUCE_SCATTER = "ReduceScatter"
    ALL_GATHER = "AllGather"


class Algorithm(enum.Enum):
    RING = "Ring"
    DIRECT = "Direct"
    HALVING_DOUBLING = "HalvingDoubling"


ALGORITHM_FOR_BLOCK = {
    BlockKind.RING: Algorithm.RING,
    BlockKind.FULLY_CONNECTED: Algorithm.DIRECT,
    BlockKind.SWITCH: Algorithm.HALVING_DOUBLING,
}
BLOCK_FOR_ALGORITHM = {v: k for k, v in ALGORITHM_FOR_BLOCK.items()}


@dataclass(frozen=True)
class Step:
    bytes_per_npu: float
    concurrent_transfers: int = 1


@dataclass(frozen=True)
class Stage:
    kind: StageKind
    dim_index: int
    group_size: int
    algorithm: Algorithm
    input_bytes: float
    steps: tuple[Step, ...]

    @property
    def output_bytes(self) -> float:
        if self.kind is StageKind.REDUCE_SCATTER:
            return self.input_bytes / self.group_size
        return self.input_bytes * self.group_size

    @property
    def sent_bytes(self) -> float:
        """Bytes each NPU injects during the stage: the full buffer times (P-1)/P."""
        return sum(s.bytes_per_npu for s in self.steps)

    @property
    def block_kind(self) -> BlockKind:
        return BLOCK_FOR_ALGORITHM[self.algorithm]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "dim": self.dim_index,
            "group_size": self.group_size,
            "algorithm": self.algorithm.value,
            "input_bytes": self.input_bytes,
            "output_bytes": self.output_bytes,
            "steps": [
                {"bytes_per_npu": s.bytes_per_npu, "concurrent_transfers": s.concurrent_transfers}
                for s in self.steps
            ],
        }


@dataclass(frozen=True)
class CollectiveSchedule:
    """Stages of one chunk; every chunk carries ``total_bytes / chunks``."""

    stages: tuple[Stage, ...]
    total_bytes: float
    chunks: int = 1

    @property
    def chunk_bytes(self) -> float:
        return self.total_bytes / self.chunks

    @property
    def dims(self) -> list[int]:
        return [s.dim_index for s in self.stages[: len(self.stages) // 2]]

    def chunk_schedules(self) -> list["CollectiveSchedule"]:
        one = replace(self, total_bytes=self.chunk_bytes, chunks=1)
        return [one] * self.chunks

    def traffic_by_dim(self) -> dict[int, float]:
        """Bytes per NPU sent on each dimension over all chunks."""
        out: dict[int, float] = {}
        for st in self.stages:
            out[st.dim_index] = out.get(st.dim_index, 0.0) + st.sent_bytes * self.chunks
        return out

    def to_dict(self) -> dict:
        return {
            "total_bytes": self.total_bytes,
            "chunks": self.chunks,
            "chunk_bytes": self.chunk_bytes,
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _steps(kind: StageKind, algorithm: Algorithm, p: int, input_bytes: float) -> tuple[Step, ...]:
    # Every algorithm moves full * (p-1)/p per NPU; "full" is the unsharded buffer.
    full = input_bytes if kind is StageKind.REDUCE_SCATTER else input_bytes * p
    shard = full / p
    if algorithm is Algorithm.RING:
        return tuple(Step(shard, 1) for _ in range(p - 1))
    if algorithm is Algorithm.DIRECT:
        return (Step(shard * (p - 1), p - 1),)
    if not _is_pow2(p):
        raise ScheduleError(f"halving-doubling needs a power-of-two group, got {p}")
    rounds = p.bit_length() - 1
    halving = [full / 2**i for i in range(1, rounds + 1)]
    if kind is StageKind.ALL_GATHER:
        halving.reverse()
    return tuple(Step(b, 1) for b in halving)


BlockLike = Union[DimBlock, tuple]


def build_basic_stage(
    kind: StageKind, block: BlockLike, input_bytes: float, dim_index: int = 1
) -> Stage:
    """One Reduce-Scatter or All-Gather on a single block with its matching algorithm.

    ``block`` is a DimBlock or a ``(kind, group_size)`` pair; the latter covers
    the MP or DP slice of a shared dimension.
    """
    if isinstance(block, DimBlock):
        p = block.size
        algorithm = ALGORITHM_FOR_BLOCK[block.kind]
    else:
        bkind, p = block
        if isinstance(bkind, str):
            bkind = BlockKind.from_name(bkind)
        algorithm = ALGORITHM_FOR_BLOCK[bkind]
    if p < 2:
        raise ScheduleError(f"group size must be >= 2, got {p}")
    if not input_bytes > 0:
        raise ScheduleError(f"stage input must be positive, got {input_bytes}")
    steps = _steps(kind, algorithm, p, float(input_bytes))
    return Stage(kind, dim_index, p, algorithm, float(input_bytes), steps)


def _normalize_groups(dims) -> list[tuple[int, tuple[BlockKind, int]]]:
    groups = []
    for i, item in enumerate(dims, start=1):
        if isinstance(item, DimBlock):
            groups.append((i, (item.kind, item.size)))
        elif isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], DimBlock):
            groups.append((item[0], (item[1].kind, item[1].size)))
        elif isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], (str, BlockKind)):
            kind = BlockKind.from_name(item[0]) if isinstance(item[0], str) else item[0]
            groups.append((i, (kind, item[1])))
        elif isinstance(item, tuple) and len(item) == 3:
            idx, kind, size = item
            if isinstance(kind, str):
                kind = BlockKind.from_name(kind)
            groups.append((idx, (kind, size)))
        else:
            raise ScheduleError(f"cannot interpret dimension spec {item!r}")
    return groups


def build_hierarchical_allreduce(dims, total_bytes: float, chunks: int = 1) -> CollectiveSchedule:
    """Reduce-Scatter up Dim 1..N, then All-Gather back down Dim N..1.

    ``dims`` holds DimBlocks or ``(kind, group_size)`` pairs, indexed 1..N in
    order, or ``(dim_index, DimBlock)`` / ``(dim_index, kind, group_size)``
    tuples when the collective runs on a subset of a topology's dimensions.
    """
    if not total_bytes > 0:
        raise ScheduleError(f"total_bytes must be positive, got {total_bytes}")
    if chunks < 1:
        raise ScheduleError(f"chunks must be >= 1, got {chunks}")
    groups = _normalize_groups(dims)
    if not groups:
        raise ScheduleError("collective needs at least one dimension")
    size = total_bytes / chunks
    rs, ag = [], []
    for idx, block in groups:
        stage = build_basic_stage(StageKind.REDUCE_SCATTER, block, size, idx)
        rs.append(stage)
        size = stage.output_bytes
    for idx, block in reversed(groups):
        stage = build_basic_stage(StageKind.ALL_GATHER, block, size, idx)
        ag.append(stage)
        size = stage.output_bytes
    return CollectiveSchedule(tuple(rs + ag), float(total_bytes), chunks)


def topology_allreduce(t: Topology, total_bytes: float, chunks: int = 1) -> CollectiveSchedule:
    return build_hierarchical_allreduce(t.dims, total_bytes, chunks)


def groups_for(t: Topology, groups: Iterable[tuple[int, int]]) -> list[tuple[int, BlockKind, int]]:
    """Attach block kinds to ``(dim, group_size)`` pairs from a parallelism mapping."""
    return [(d, t.dim(d).kind, p) for d, p in groups]


def per_dim_traffic(dims, total_bytes: float) -> list[float]:
    """Bytes per NPU sent on each listed dimension by one hierarchical All-Reduce.

    Both the Reduce-Scatter and All-Gather stages of a dimension count, each
    moving ``buffer * (P-1)/P`` where the buffer is the Reduce-Scatter input.
    """
    groups = _normalize_groups(dims)
    if total_bytes == 0:
        return [0.0] * len(groups)
    sched = build_hierarchical_allreduce(dims, total_bytes, 1)
    n = len(groups)
    return [sched.stages[i].sent_bytes + sched.stages[2 * n - 1 - i].sent_bytes for i in range(n)]
