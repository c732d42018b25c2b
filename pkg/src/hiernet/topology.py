"""N-dimensional hierarchical topologies built from Ring, FC and Switch blocks.

A topology is written innermost dimension first, e.g. ``"Ring(8)_FC(8)_Switch(16)"``
is an 8-NPU ring, eight of which are fully connected, sixteen of those groups
hanging off a switch.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

DEFAULT_MAX_DIMS = 4


class TopologyError(ValueError):
    """Raised for malformed topology specs or invalid dimensions."""


class BlockKind(enum.Enum):
    RING = "Ring"
    FULLY_CONNECTED = "FC"
    SWITCH = "Switch"

    @classmethod
    def from_name(cls, name: str) -> "BlockKind":
        try:
            return _KIND_ALIASES[name]
        except KeyError:
            raise TopologyError(f"unknown block name {name!r}") from None


_KIND_ALIASES = {
    "Ring": BlockKind.RING,
    "FC": BlockKind.FULLY_CONNECTED,
    "FullyConnected": BlockKind.FULLY_CONNECTED,
    "Switch": BlockKind.SWITCH,
}


@dataclass(frozen=True)
class DimBlock:
    kind: BlockKind
    size: int

    def __post_init__(self):
        if isinstance(self.size, bool) or not isinstance(self.size, int):
            raise TopologyError(f"dimension size must be an integer, got {self.size!r}")
        if self.size < 2:
            raise TopologyError(f"dimension size must be >= 2, got {self.size}")

    @property
    def name(self) -> str:
        return f"{self.kind.value}({self.size})"


@dataclass(frozen=True)
class Topology:
    """Ordered dimensions; ``dims[0]`` is Dim 1 (innermost)."""

    dims: tuple[DimBlock, ...]
    max_dims: int = DEFAULT_MAX_DIMS

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise TopologyError("topology needs at least one dimension")
        if len(self.dims) > self.max_dims:
            raise TopologyError(
                f"{len(self.dims)} dimensions exceed the configured maximum of {self.max_dims}"
            )

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __getitem__(self, index: int) -> DimBlock:
        return self.dims[index]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(d.size for d in self.dims)

    @property
    def npu_count(self) -> int:
        return npu_count(self)

    @property
    def name(self) -> str:
        return topology_name(self)

    def dim(self, index: int) -> DimBlock:
        """Return the block of 1-based dimension ``index``."""
        if not 1 <= index <= len(self.dims):
            raise IndexError(f"dimension {index} out of range 1..{len(self.dims)}")
        return self.dims[index - 1]

    def to_records(self) -> list[dict]:
        return [{"kind": d.kind.value, "size": d.size} for d in self.dims]

    @classmethod
    def from_records(cls, records: Iterable[Mapping], max_dims: int = DEFAULT_MAX_DIMS) -> "Topology":
        dims = []
        for i, rec in enumerate(records):
            extra = set(rec) - {"kind", "size"}
            if extra or "kind" not in rec or "size" not in rec:
                raise TopologyError(f"dimension record {i} must have exactly 'kind' and 'size'")
            dims.append(DimBlock(BlockKind.from_name(rec["kind"]), rec["size"]))
        return cls(tuple(dims), max_dims=max_dims)


_BLOCK_RE = re.compile(r"([A-Za-z]+)\((\d+)\)")


def parse_topology(spec: str, max_dims: int = DEFAULT_MAX_DIMS) -> Topology:
    """Parse a name such as ``"FC(4)_Ring(2)"`` into a :class:`Topology`.

    ``FullyConnected`` is accepted as an alias of ``FC``.
    """
    if not isinstance(spec, str):
        raise TopologyError(f"topology spec must be a string, got {type(spec).__name__}")
    dims = []
    pos = 0
    while True:
        m = _BLOCK_RE.match(spec, pos)
        if m is None:
            raise TopologyError(f"syntax error at position {pos} in {spec!r}: expected Block(int)")
        dims.append(DimBlock(BlockKind.from_name(m.group(1)), int(m.group(2))))
        pos = m.end()
        if pos == len(spec):
            break
        if spec[pos] != "_":
            raise TopologyError(f"syntax error at position {pos} in {spec!r}: expected '_'")
        pos += 1
    return Topology(tuple(dims), max_dims=max_dims)


def topology_name(t: Topology) -> str:
    return "_".join(d.name for d in t.dims)


def npu_count(t: Topology) -> int:
    return math.prod(d.size for d in t.dims)


def make_topology(kinds: Sequence[str], sizes: Sequence[int], max_dims: int = DEFAULT_MAX_DIMS) -> Topology:
    if len(kinds) != len(sizes):
        raise TopologyError("kinds and sizes must have equal length")
    return Topology(
        tuple(DimBlock(BlockKind.from_name(k), s) for k, s in zip(kinds, sizes)),
        max_dims=max_dims,
    )
