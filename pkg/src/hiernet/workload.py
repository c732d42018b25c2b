"""Training workloads and their MP/DP placement onto topology dimensions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Optional

from .topology import Topology

DEFAULT_BYTES_PER_PARAM = 2


class MappingError(ValueError):
    """The workload's parallelism cannot be laid out on the topology."""


@dataclass(frozen=True)
class Workload:
    """Per-iteration description of a training job.

    ``mp_comm_bytes`` and ``compute_time`` are calibration inputs and are never
    derived here. ``dp_comm_bytes`` falls back to ``params * bytes_per_param``.
    """

    name: str
    params: float
    mp_size: int
    dp_size: int
    compute_time: float
    bytes_per_param: float = DEFAULT_BYTES_PER_PARAM
    mp_comm_bytes: float = 0.0
    dp_comm_bytes: Optional[float] = None

    def __post_init__(self):
        if self.mp_size < 1 or self.dp_size < 1:
            raise ValueError(f"{self.name}: mp_size and dp_size must be >= 1")
        if self.params < 0 or self.bytes_per_param < 0 or self.compute_time < 0:
            raise ValueError(f"{self.name}: params, bytes_per_param and compute_time must be >= 0")
        if self.mp_comm_bytes < 0 or (self.dp_comm_bytes is not None and self.dp_comm_bytes < 0):
            raise ValueError(f"{self.name}: communication sizes must be >= 0")
        if self.mp_size == 1 and self.mp_comm_bytes != 0:
            raise ValueError(f"{self.name}: mp_size == 1 requires mp_comm_bytes == 0")

    @property
    def npus(self) -> int:
        return self.mp_size * self.dp_size

    def to_record(self) -> dict:
        rec = {
            "name": self.name,
            "params": self.params,
            "mp_size": self.mp_size,
            "dp_size": self.dp_size,
            "bytes_per_param": self.bytes_per_param,
            "mp_comm_bytes": self.mp_comm_bytes,
            "compute_time": self.compute_time,
        }
        if self.dp_comm_bytes is not None:
            rec["dp_comm_bytes"] = self.dp_comm_bytes
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "Workload":
        allowed = {
            "name", "params", "mp_size", "dp_size", "bytes_per_param",
            "mp_comm_bytes", "dp_comm_bytes", "compute_time",
        }
        unknown = set(rec) - allowed
        if unknown:
            raise ValueError(f"unknown workload field(s): {', '.join(sorted(unknown))}")
        missing = {"name", "params", "mp_size", "dp_size", "compute_time"} - set(rec)
        if missing:
            raise ValueError(f"missing workload field(s): {', '.join(sorted(missing))}")
        return cls(**rec)


def comm_volumes(w: Workload) -> tuple[float, float]:
    """Return ``(M_MP, M_DP)``: per-iteration payload of the MP and DP all-reduces."""
    dp = w.dp_comm_bytes if w.dp_comm_bytes is not None else w.params * w.bytes_per_param
    return float(w.mp_comm_bytes), float(dp)


@dataclass(frozen=True)
class SharedDim:
    dim: int
    mp_factor: int
    dp_factor: int


@dataclass(frozen=True)
class ParallelismMapping:
    """MP/DP factors per 1-based dimension.

    ``mp_dims`` and ``dp_dims`` list only dimensions owned entirely by one
    kind of parallelism; the shared dimension, if any, is kept apart.
    """

    mp_dims: tuple[tuple[int, int], ...] = ()
    dp_dims: tuple[tuple[int, int], ...] = ()
    shared_dim: Optional[SharedDim] = None

    def mp_groups(self) -> list[tuple[int, int]]:
        """(dim, group size) in MP all-reduce order, shared dim last."""
        groups = list(self.mp_dims)
        if self.shared_dim is not None:
            groups.append((self.shared_dim.dim, self.shared_dim.mp_factor))
        return groups

    def dp_groups(self) -> list[tuple[int, int]]:
        """(dim, group size) in DP all-reduce order, shared dim first."""
        groups = []
        if self.shared_dim is not None:
            groups.append((self.shared_dim.dim, self.shared_dim.dp_factor))
        groups.extend(self.dp_dims)
        return groups

    @property
    def mp_size(self) -> int:
        return math.prod(f for _, f in self.mp_groups())

    @property
    def dp_size(self) -> int:
        return math.prod(f for _, f in self.dp_groups())


def map_parallelism(t: Topology, w: Workload) -> ParallelismMapping:
    """Pack MP into the innermost dimensions and DP into the rest.

    If the MP size ends strictly inside a dimension, that dimension is shared:
    MP takes its low-order factor and DP the remainder.
    """
    n = t.npu_count
    if w.mp_size * w.dp_size != n:
        raise MappingError(
            f"{w.name}: mp_size*dp_size = {w.mp_size * w.dp_size} != {n} NPUs of {t.name}"
        )
    mp_dims: list[tuple[int, int]] = []
    dp_dims: list[tuple[int, int]] = []
    shared = None
    remaining = w.mp_size
    for index, block in enumerate(t.dims, start=1):
        if remaining == 1:
            dp_dims.append((index, block.size))
        elif remaining % block.size == 0:
            mp_dims.append((index, block.size))
            remaining //= block.size
        elif block.size % remaining == 0:
            shared = SharedDim(index, remaining, block.size // remaining)
            remaining = 1
        else:
            raise MappingError(
                f"{w.name}: MP factor {remaining} does not divide Dim {index} of size {block.size}"
            )
    return ParallelismMapping(tuple(mp_dims), tuple(dp_dims), shared)


def load_workloads(path=None) -> list[Workload]:
    """Load a JSON list of workload records; defaults to the bundled set."""
    if path is None:
        text = resources.files("hiernet.data").joinpath("workloads.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    data = json.loads(text)
    if isinstance(data, Mapping):
        data = data.get("workloads", [data])
    return [Workload.from_record(rec) for rec in data]
