"""Data-flow oracle for hierarchical All-Reduce schedules.

The oracle ignores the Step lists when moving data. It rebuilds the peer
transfers of each stage from the algorithm and the group size alone, runs
them on real vectors, and only then compares what it moved against the
schedule's declared steps. NPUs are numbered mixed-radix with the first
Reduce-Scatter group varying fastest.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .schedule import Algorithm, CollectiveSchedule, StageKind

log = logging.getLogger(__name__)

_REL_TOL = 1e-9


class DataflowMismatch(Exception):
    def __init__(self, stage: Optional[int], reason: str):
        super().__init__(f"stage {stage}: {reason}" if stage is not None else reason)
        self.stage = stage
        self.reason = reason


@dataclass
class DataflowResult:
    ok: bool
    failed_stage: Optional[int] = None
    reason: str = ""
    final: Optional[np.ndarray] = None
    # bytes per NPU moved on each dim index, from the transfer log
    bytes_by_dim: dict = field(default_factory=dict)
    steps_by_stage: list = field(default_factory=list)


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=1e-12)


def _check_structure(schedule: CollectiveSchedule):
    stages = schedule.stages
    if len(stages) % 2 or not stages:
        raise DataflowMismatch(None, f"expected an even, non-zero stage count, got {len(stages)}")
    n = len(stages) // 2
    for i in range(n):
        rs, ag = stages[i], stages[2 * n - 1 - i]
        if rs.kind is not StageKind.REDUCE_SCATTER:
            raise DataflowMismatch(i, "expected Reduce-Scatter")
        if ag.kind is not StageKind.ALL_GATHER:
            raise DataflowMismatch(2 * n - 1 - i, "expected All-Gather")
        if (rs.dim_index, rs.group_size, rs.algorithm) != (ag.dim_index, ag.group_size, ag.algorithm):
            raise DataflowMismatch(2 * n - 1 - i, "All-Gather does not mirror its Reduce-Scatter")
        if rs.group_size < 2:
            raise DataflowMismatch(i, "group size < 2")
    return [s.group_size for s in stages[:n]]


class _Machine:
    """Buffers plus the contiguous range each NPU is responsible for."""

    def __init__(self, data: np.ndarray, sizes: list[int]):
        self.buf = data
        self.sizes = sizes
        self.n = data.shape[0]
        self.start = np.zeros(self.n, dtype=np.int64)
        self.length = data.shape[1]
        self.saved: list[np.ndarray] = []
        strides = np.cumprod([1] + sizes[:-1])
        self.strides = [int(s) for s in strides]

    def groups(self, level: int) -> np.ndarray:
        """Member NPU ids, shape (groups, P), for groups along ``level``."""
        p, stride = self.sizes[level], self.strides[level]
        ids = np.arange(self.n)
        bases = ids[(ids // stride) % p == 0]
        return bases[:, None] + stride * np.arange(p)[None, :]

    def run_step(self, transfers, reduce: bool) -> tuple[int, int]:
        """Apply simultaneous transfers ``(src, dst, start, length)`` (arrays over groups).

        Returns (elements sent per NPU, distinct destinations per NPU).
        """
        sent = np.zeros(self.n, dtype=np.int64)
        payloads = []
        for src, dst, start, length in transfers:
            idx = start[:, None] + np.arange(length)[None, :]
            payloads.append((dst, idx, self.buf[src[:, None], idx].copy()))
            np.add.at(sent, src, length)
        pairs = np.unique(
            np.concatenate([np.stack([t[0], t[1]], axis=1) for t in transfers]), axis=0
        )
        fanout = np.bincount(pairs[:, 0], minlength=self.n)
        for dst, idx, data in payloads:
            if reduce:
                self.buf[dst[:, None], idx] += data
            else:
                self.buf[dst[:, None], idx] = data
        senders = sent[sent > 0]
        if senders.size != self.n or senders.min() != senders.max():
            raise DataflowMismatch(None, "uneven per-NPU send volume within a step")
        if fanout.min() != fanout.max():
            raise DataflowMismatch(None, "uneven per-NPU fan-out within a step")
        return int(senders[0]), int(fanout[0])

    # --- Reduce-Scatter -------------------------------------------------

    def reduce_scatter(self, level: int, algorithm: Algorithm) -> list[tuple[int, int]]:
        mem = self.groups(level)
        p = self.sizes[level]
        seg = self.length // p
        self.saved.append(self.start.copy())
        base = self.start[mem[:, 0]]
        log_ = []
        if algorithm is Algorithm.RING:
            for s in range(p - 1):
                tr = [
                    (mem[:, j], mem[:, (j + 1) % p], base + ((j - s) % p) * seg, seg)
                    for j in range(p)
                ]
                log_.append(self.run_step(tr, reduce=True))
            owned = [(j + 1) % p for j in range(p)]
            for j in range(p):
                self.start[mem[:, j]] = base + owned[j] * seg
        elif algorithm is Algorithm.DIRECT:
            tr = [
                (mem[:, j], mem[:, q], base + q * seg, seg)
                for j in range(p) for q in range(p) if q != j
            ]
            log_.append(self.run_step(tr, reduce=True))
            for j in range(p):
                self.start[mem[:, j]] = base + j * seg
        else:
            cur = np.repeat(base[:, None], p, axis=1)
            length = self.length
            d = p // 2
            while d >= 1:
                half = length // 2
                tr = []
                keep = np.empty_like(cur)
                for j in range(p):
                    upper = bool(j & d)
                    keep[:, j] = cur[:, j] + (half if upper else 0)
                    send_start = cur[:, j] + (0 if upper else half)
                    tr.append((mem[:, j], mem[:, j ^ d], send_start, half))
                log_.append(self.run_step(tr, reduce=True))
                cur, length = keep, half
                d //= 2
            for j in range(p):
                self.start[mem[:, j]] = cur[:, j]
        self.length = seg
        return log_

    # --- All-Gather -----------------------------------------------------

    def all_gather(self, level: int, algorithm: Algorithm) -> list[tuple[int, int]]:
        mem = self.groups(level)
        p = self.sizes[level]
        seg = self.length
        parent = self.saved.pop()
        base = parent[mem[:, 0]]
        log_ = []
        if algorithm is Algorithm.RING:
            part = [((self.start[mem[:, j]] - base) // seg) for j in range(p)]
            for s in range(p - 1):
                tr = []
                for j in range(p):
                    # member j forwards what it received s steps ago
                    src_part = part[(j - s) % p]
                    tr.append((mem[:, j], mem[:, (j + 1) % p], base + src_part * seg, seg))
                log_.append(self.run_step(tr, reduce=False))
        elif algorithm is Algorithm.DIRECT:
            tr = [
                (mem[:, j], mem[:, q], self.start[mem[:, j]], seg)
                for j in range(p) for q in range(p) if q != j
            ]
            log_.append(self.run_step(tr, reduce=False))
        else:
            cur = np.stack([self.start[mem[:, j]] for j in range(p)], axis=1)
            length = seg
            d = 1
            while d < p:
                tr = [(mem[:, j], mem[:, j ^ d], cur[:, j], length) for j in range(p)]
                log_.append(self.run_step(tr, reduce=False))
                cur = np.stack([np.minimum(cur[:, j], cur[:, j ^ d]) for j in range(p)], axis=1)
                length *= 2
                d *= 2
        self.start[mem.ravel()] = np.repeat(base, p)
        self.length = seg * p
        return log_


def run_dataflow(schedule: CollectiveSchedule, vectors) -> DataflowResult:
    """Execute ``schedule`` on ``vectors`` (shape ``(npus, length, ...)``)."""
    try:
        sizes = _check_structure(schedule)
    except DataflowMismatch as exc:
        return DataflowResult(False, exc.stage, exc.reason)
    data = np.array(vectors, copy=True)
    npus = math.prod(sizes)
    if data.ndim < 2 or data.shape[0] != npus:
        return DataflowResult(False, None, f"need {npus} input vectors, got shape {data.shape}")
    length = data.shape[1]
    if length % npus:
        return DataflowResult(False, None, f"vector length {length} not divisible by {npus}")
    expected = data.sum(axis=0)
    elem_bytes = schedule.chunk_bytes / length
    machine = _Machine(data, sizes)
    result = DataflowResult(True)
    n = len(sizes)
    stages = schedule.stages
    try:
        for k, stage in enumerate(stages):
            level = k if k < n else 2 * n - 1 - k
            if not _close(stage.input_bytes, machine.length * elem_bytes):
                raise DataflowMismatch(
                    k, f"declared input {stage.input_bytes} B but {machine.length * elem_bytes} B present"
                )
            try:
                if stage.kind is StageKind.REDUCE_SCATTER:
                    steps = machine.reduce_scatter(level, stage.algorithm)
                else:
                    steps = machine.all_gather(level, stage.algorithm)
            except DataflowMismatch as exc:
                raise DataflowMismatch(k, exc.reason) from None
            if len(steps) != len(stage.steps):
                raise DataflowMismatch(k, f"{len(stage.steps)} steps declared, {len(steps)} executed")
            for declared, (elems, fan) in zip(stage.steps, steps):
                if not _close(declared.bytes_per_npu, elems * elem_bytes):
                    raise DataflowMismatch(
                        k, f"step declares {declared.bytes_per_npu} B, moved {elems * elem_bytes} B"
                    )
                if declared.concurrent_transfers != fan:
                    raise DataflowMismatch(
                        k, f"step declares {declared.concurrent_transfers} transfers, used {fan}"
                    )
            moved = sum(e for e, _ in steps) * elem_bytes * schedule.chunks
            result.bytes_by_dim[stage.dim_index] = result.bytes_by_dim.get(stage.dim_index, 0.0) + moved
            result.steps_by_stage.append(steps)
            if k == n - 1:
                _check_shards(machine, expected, k)
    except DataflowMismatch as exc:
        return DataflowResult(False, exc.stage, exc.reason, bytes_by_dim=result.bytes_by_dim)
    result.final = machine.buf
    if not _equal(machine.buf, np.broadcast_to(expected, machine.buf.shape)):
        result.ok = False
        result.reason = "final buffers differ from the global sum"
        result.failed_stage = len(stages) - 1
    return result


def _equal(a: np.ndarray, b: np.ndarray) -> bool:
    if np.issubdtype(a.dtype, np.integer):
        return bool(np.array_equal(a, b))
    return bool(np.allclose(a, b))


def _check_shards(machine: _Machine, expected: np.ndarray, stage: int):
    idx = machine.start[:, None] + np.arange(machine.length)[None, :]
    got = machine.buf[np.arange(machine.n)[:, None], idx]
    if not _equal(got, expected[idx]):
        raise DataflowMismatch(stage, "Reduce-Scatter phase left an unreduced shard")


def verify_schedule_dataflow(schedule: CollectiveSchedule, npu_initial_vectors) -> bool:
    """True iff running ``schedule`` leaves every NPU with the elementwise global sum."""
    result = run_dataflow(schedule, npu_initial_vectors)
    if not result.ok:
        log.warning("dataflow check failed at stage %s: %s", result.failed_stage, result.reason)
    return result.ok
