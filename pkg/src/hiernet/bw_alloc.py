"""Per-dimension bandwidth allocation: EqualBW, MessageBW and SmartBW.

SmartBW treats MP and DP as two serial phases and minimizes
``M_MP / BW_MP + M_DP / BW_DP`` under the bandwidth budget. Without a
shared dimension the optimum splits the budget by square roots of the two
traffic volumes. With a shared dimension the budget constraint picks up a
``max`` term and the problem is solved numerically by golden-section search.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .netsim import GB, BwAllocation
from .schedule import groups_for, per_dim_traffic
from .topology import Topology
from .workload import ParallelismMapping, Workload, comm_volumes, map_parallelism

DEFAULT_FLOOR = 1e-3
_INVPHI = (math.sqrt(5) - 1) / 2


class AllocScheme(enum.Enum):
    EQUAL = "equal"
    MESSAGE = "message"
    SMART = "smart"

    @property
    def label(self) -> str:
        return {"equal": "EqualBW", "message": "MessageBW", "smart": "SmartBW"}[self.value]

    @classmethod
    def parse(cls, text) -> "AllocScheme":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        if key.endswith("bw"):
            key = key[:-2]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown allocation scheme {text!r}; use equal, message or smart") from None


class SolverError(RuntimeError):
    pass


def equal_bw(budget: float, n_dims: int) -> BwAllocation:
    if not budget > 0 or n_dims < 1:
        raise ValueError("need a positive budget and at least one dimension")
    return BwAllocation((budget / n_dims,) * n_dims, budget)


def _proportional(total: float, weights: Sequence[float]) -> list[float]:
    s = sum(weights)
    if s <= 0:
        return [total / len(weights)] * len(weights)
    return [total * w / s for w in weights]


def message_bw(budget: float, messages: Sequence[float], floor: float = DEFAULT_FLOOR) -> BwAllocation:
    """Split ``budget`` in proportion to per-dimension traffic.

    Dimensions without traffic get ``floor * budget`` so no dimension is
    left at zero bandwidth; the rest share what remains.
    """
    if not budget > 0:
        raise ValueError(f"budget must be positive, got {budget}")
    messages = [float(m) for m in messages]
    if any(m < 0 for m in messages):
        raise ValueError("message sizes must be >= 0")
    if sum(messages) <= 0:
        raise ValueError("message_bw needs at least one dimension with traffic")
    zero = [m == 0 for m in messages]
    reserved = floor * budget * sum(zero)
    if reserved >= budget:
        raise ValueError("floor leaves no bandwidth for dimensions with traffic")
    bw = _proportional(budget - reserved, messages)
    bw = [floor * budget if z else b for z, b in zip(zero, bw)]
    return BwAllocation(tuple(bw), budget)


def smart_bw_unshared(budget: float, m_mp: float, m_dp: float) -> tuple[float, float]:
    """Square-root split of the budget between the MP and DP phases."""
    if not budget > 0:
        raise ValueError(f"budget must be positive, got {budget}")
    if m_mp < 0 or m_dp < 0 or m_mp + m_dp <= 0:
        raise ValueError("need non-negative traffic with a positive total")
    a, b = math.sqrt(m_mp), math.sqrt(m_dp)
    return a / (a + b) * budget, b / (a + b) * budget


def two_phase_time(m_mp: float, m_dp: float, bw_mp: float, bw_dp: float) -> float:
    """Fluid MP-then-DP communication time (the SmartBW objective)."""
    t = 0.0
    if m_mp:
        t += m_mp / bw_mp if bw_mp > 0 else math.inf
    if m_dp:
        t += m_dp / bw_dp if bw_dp > 0 else math.inf
    return t


def shared_budget_use(bw_mp: float, bw_dp: float, r_mp: float, r_dp: float) -> float:
    """Budget consumed by group bandwidths when one dimension serves both phases."""
    return (1 - r_mp) * bw_mp + (1 - r_dp) * bw_dp + max(r_mp * bw_mp, r_dp * bw_dp)


def golden_section(
    f: Callable[[float], float], lo: float, hi: float, tol: float, max_iter: int = 200
) -> tuple[float, float, int]:
    """Minimize a unimodal ``f`` on ``[lo, hi]`` until the bracket is narrower than ``tol``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for it in range(1, max_iter + 1):
        if b - a <= tol:
            x = (a + b) / 2
            return x, f(x), it
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    raise SolverError(f"golden-section search did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class SharedSolution:
    bw_mp: float
    bw_dp: float
    bw_mp_ns: float
    bw_dp_ns: float
    bw_shared: float
    objective: float


def smart_bw_shared(
    budget: float,
    m_mp: float,
    m_dp: float,
    r_mp: float,
    r_dp: float,
    rtol: float = 1e-9,
    max_iter: int = 200,
) -> SharedSolution:
    """SmartBW when one dimension carries a fraction of both phases' traffic.

    ``r_mp`` and ``r_dp`` are the fractions of MP and DP traffic crossing the
    shared dimension. The budget identity is
    ``(1-r_mp)*BW_MP + (1-r_dp)*BW_DP + max(r_mp*BW_MP, r_dp*BW_DP) = B``.
    Each branch of the max is searched separately and the better optimum kept.
    """
    if not budget > 0:
        raise ValueError(f"infeasible: budget must be positive, got {budget}")
    if not (0 <= r_mp <= 1 and 0 <= r_dp <= 1):
        raise ValueError("shared ratios must lie in [0, 1]")
    if m_mp <= 0 or m_dp <= 0:
        raise ValueError("smart_bw_shared needs traffic in both phases")

    def _solution(x: float, y: float) -> SharedSolution:
        return SharedSolution(
            bw_mp=x,
            bw_dp=y,
            bw_mp_ns=(1 - r_mp) * x,
            bw_dp_ns=(1 - r_dp) * y,
            bw_shared=max(r_mp * x, r_dp * y),
            objective=two_phase_time(m_mp, m_dp, x, y),
        )

    if r_mp == 0 and r_dp == 0:
        return _solution(*smart_bw_unshared(budget, m_mp, m_dp))

    # Largest DP bandwidth affordable for a given MP bandwidth, per branch:
    # branch "dp" has the shared dim sized by DP (r_dp*y >= r_mp*x), branch "mp" by MP.
    def y_dp_branch(x):
        return budget - (1 - r_mp) * x

    def y_mp_branch(x):
        return (budget - x) / (1 - r_dp) if r_dp < 1 else math.inf

    cross = budget * r_dp / (r_mp + r_dp - r_mp * r_dp)
    candidates = []
    for y_of, lo, hi in ((y_dp_branch, 0.0, cross), (y_mp_branch, cross, budget)):
        if hi - lo <= 0:
            continue

        def obj(x, y_of=y_of):
            y = y_of(x)
            if x <= 0 or y <= 0:
                return math.inf
            return m_mp / x + m_dp / y

        x, val, _ = golden_section(obj, lo, hi, rtol * budget, max_iter)
        candidates.append((val, x))
    val, x = min(candidates)
    y = min(y_dp_branch(x), y_mp_branch(x))
    # land exactly on the budget surface
    scale = budget / shared_budget_use(x, y, r_mp, r_dp)
    return _solution(x * scale, y * scale)


@dataclass(frozen=True)
class TrafficProfile:
    """Per-dimension bytes per NPU of the MP and DP All-Reduces of one iteration."""

    mp: tuple[float, ...]
    dp: tuple[float, ...]
    shared_dim: Optional[int]

    @property
    def total(self) -> tuple[float, ...]:
        return tuple(a + b for a, b in zip(self.mp, self.dp))

    @property
    def m_mp(self) -> float:
        return sum(self.mp)

    @property
    def m_dp(self) -> float:
        return sum(self.dp)

    @property
    def r_mp(self) -> float:
        if self.shared_dim is None or self.m_mp == 0:
            return 0.0
        return self.mp[self.shared_dim - 1] / self.m_mp

    @property
    def r_dp(self) -> float:
        if self.shared_dim is None or self.m_dp == 0:
            return 0.0
        return self.dp[self.shared_dim - 1] / self.m_dp


def traffic_profile(t: Topology, w: Workload, mapping: Optional[ParallelismMapping] = None) -> TrafficProfile:
    if mapping is None:
        mapping = map_parallelism(t, w)
    m_mp, m_dp = comm_volumes(w)
    mp = [0.0] * len(t)
    dp = [0.0] * len(t)
    for vec, groups, size in ((mp, mapping.mp_groups(), m_mp), (dp, mapping.dp_groups(), m_dp)):
        if groups and size > 0:
            for (d, _), m in zip(groups, per_dim_traffic(groups_for(t, groups), size)):
                vec[d - 1] += m
    shared = mapping.shared_dim.dim if mapping.shared_dim else None
    return TrafficProfile(tuple(mp), tuple(dp), shared)


def fluid_comm_time(profile: TrafficProfile, alloc: BwAllocation) -> float:
    """MP-then-DP time in the infinitely-chunked limit, in seconds.

    Each phase lasts as long as its most loaded dimension. SmartBW minimizes
    exactly this quantity over all allocations with the same budget.
    """
    if len(alloc) != len(profile.mp):
        raise ValueError("allocation and traffic profile disagree on dimension count")
    t = 0.0
    for phase in (profile.mp, profile.dp):
        t += max(m / (b * GB) for m, b in zip(phase, alloc.per_dim))
    return t


def smart_bw(budget: float, profile: TrafficProfile, floor: float = DEFAULT_FLOOR) -> BwAllocation:
    """SmartBW for a full traffic profile, spreading group bandwidth by per-dim traffic."""
    if profile.m_mp == 0 or profile.m_dp == 0:
        return message_bw(budget, profile.total, floor)
    if profile.shared_dim is None:
        bw_mp, bw_dp = smart_bw_unshared(budget, profile.m_mp, profile.m_dp)
        shared_bw = None
    else:
        sol = smart_bw_shared(budget, profile.m_mp, profile.m_dp, profile.r_mp, profile.r_dp)
        bw_mp, bw_dp, shared_bw = sol.bw_mp, sol.bw_dp, sol.bw_shared
    bw = []
    for k, (mp, dp) in enumerate(zip(profile.mp, profile.dp), start=1):
        if k == profile.shared_dim:
            bw.append(shared_bw)
        elif mp > 0:
            bw.append(bw_mp * mp / profile.m_mp)
        elif dp > 0:
            bw.append(bw_dp * dp / profile.m_dp)
        else:
            bw.append(0.0)
    if any(b == 0 for b in bw):
        # unused dimension: reserve the floor and shrink the others to fit
        reserved = floor * budget * sum(b == 0 for b in bw)
        shrink = (budget - reserved) / budget
        bw = [floor * budget if b == 0 else b * shrink for b in bw]
    return BwAllocation(tuple(bw), budget)


def allocate(
    scheme,
    t: Topology,
    w: Workload,
    mapping: Optional[ParallelismMapping],
    budget: float,
    floor: float = DEFAULT_FLOOR,
) -> BwAllocation:
    scheme = AllocScheme.parse(scheme)
    if scheme is AllocScheme.EQUAL:
        return equal_bw(budget, len(t))
    profile = traffic_profile(t, w, mapping)
    if scheme is AllocScheme.MESSAGE:
        return message_bw(budget, profile.total, floor)
    return smart_bw(budget, profile, floor)
