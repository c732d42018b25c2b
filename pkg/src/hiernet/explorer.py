"""Sweep configuration, batch evaluation and CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .bw_alloc import DEFAULT_FLOOR, AllocScheme, allocate, traffic_profile
from .cost import UnitCosts, network_cost, perf_per_cost
from .netsim import NetParams, simulate_iteration
from .topology import DEFAULT_MAX_DIMS, Topology, TopologyError, parse_topology
from .workload import MappingError, Workload, load_workloads, map_parallelism

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Malformed sweep configuration; the message names the offending location."""


@dataclass(frozen=True)
class OutputSpec:
    path: str = "results"
    format: str = "csv"


@dataclass(frozen=True)
class SweepConfig:
    topologies: tuple[Topology, ...]
    workloads: tuple[Workload, ...]
    budgets: tuple[float, ...]
    schemes: tuple[AllocScheme, ...]
    net: NetParams = field(default_factory=NetParams)
    costs: UnitCosts = field(default_factory=UnitCosts)
    output: OutputSpec = field(default_factory=OutputSpec)
    bw_floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        for name in ("topologies", "workloads", "budgets", "schemes"):
            if not getattr(self, name):
                raise ConfigError(f"config.{name}: must be a non-empty list")
        if any(not b > 0 for b in self.budgets):
            raise ConfigError("config.budgets: every budget must be > 0")


_TOP_KEYS = {"topologies", "workloads", "budgets", "schemes", "net", "costs", "output", "max_dims", "bw_floor"}
_NET_KEYS = {"link_latency", "hops_per_block", "chunks"}
_COST_KEYS = {"link_per_gbps", "nic_per_gbps", "switch_per_radix_gbps"}
_OUT_KEYS = {"path", "format"}
FORMATS = ("csv", "json", "both")


def _reject_unknown(obj: Mapping, allowed: set, where: str):
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _dedup(items: list, key, what: str) -> list:
    seen, out = set(), []
    for it in items:
        k = key(it)
        if k in seen:
            log.warning("duplicate %s %r ignored", what, k)
            continue
        seen.add(k)
        out.append(it)
    return out


def config_from_dict(doc: Mapping, base_dir: Optional[Path] = None) -> SweepConfig:
    _reject_unknown(doc, _TOP_KEYS, "config")
    for key in ("topologies", "workloads", "budgets", "schemes"):
        if key not in doc:
            raise ConfigError(f"config.{key}: missing")
    max_dims = doc.get("max_dims", DEFAULT_MAX_DIMS)

    topologies = []
    for i, spec in enumerate(doc["topologies"]):
        try:
            if isinstance(spec, str):
                topologies.append(parse_topology(spec, max_dims))
            else:
                topologies.append(Topology.from_records(spec, max_dims))
        except (TopologyError, TypeError) as exc:
            raise ConfigError(f"config.topologies[{i}]: {exc}") from None

    raw_w = doc["workloads"]
    if isinstance(raw_w, str):
        path = Path(raw_w)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            workloads = load_workloads(path)
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"config.workloads: {exc}") from None
    else:
        workloads = []
        for i, rec in enumerate(raw_w):
            try:
                workloads.append(Workload.from_record(rec))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"config.workloads[{i}]: {exc}") from None

    try:
        budgets = [float(b) for b in doc["budgets"]]
    except (TypeError, ValueError):
        raise ConfigError("config.budgets: expected a list of numbers") from None
    schemes = []
    for i, s in enumerate(doc["schemes"]):
        try:
            schemes.append(AllocScheme.parse(s))
        except ValueError as exc:
            raise ConfigError(f"config.schemes[{i}]: {exc}") from None

    net_doc = doc.get("net", {})
    _reject_unknown(net_doc, _NET_KEYS, "config.net")
    cost_doc = doc.get("costs", {})
    _reject_unknown(cost_doc, _COST_KEYS, "config.costs")
    out_doc = doc.get("output", {})
    _reject_unknown(out_doc, _OUT_KEYS, "config.output")
    try:
        net = NetParams(**net_doc)
    except (ValueError, TypeError, TopologyError) as exc:
        raise ConfigError(f"config.net: {exc}") from None
    try:
        costs = UnitCosts(**cost_doc)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config.costs: {exc}") from None
    output = OutputSpec(**out_doc)
    if output.format not in FORMATS:
        raise ConfigError(f"config.output.format: expected one of {FORMATS}, got {output.format!r}")

    return SweepConfig(
        topologies=tuple(_dedup(topologies, lambda t: t.name, "topology")),
        workloads=tuple(_dedup(workloads, lambda w: w.name, "workload")),
        budgets=tuple(_dedup(budgets, lambda b: b, "budget")),
        schemes=tuple(_dedup(schemes, lambda s: s, "scheme")),
        net=net,
        costs=costs,
        output=output,
        bw_floor=float(doc.get("bw_floor", DEFAULT_FLOOR)),
    )


def load_config(path=None) -> SweepConfig:
    """Read a JSON sweep config; ``None`` loads the bundled default sweep."""
    if path is None:
        text = resources.files("hiernet.data").joinpath("sweep.json").read_text()
        base = None
    else:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path or 'bundled config'}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if base is None:
        workloads = doc.get("workloads")
        if isinstance(workloads, str):
            doc = {**doc, "workloads": [w.to_record() for w in load_workloads()]}
    return config_from_dict(doc, base)


# --- rows ---------------------------------------------------------------


@dataclass
class ReportRow:
    topology: str
    workload: str
    scheme: str
    budget_gbps: float
    iteration_time_s: Optional[float] = None
    compute_time_s: Optional[float] = None
    mp_comm_time_s: Optional[float] = None
    dp_comm_time_s: Optional[float] = None
    bw_per_dim_gbps: list = field(default_factory=list)
    util_per_dim: list = field(default_factory=list)
    avg_bw_utilization: Optional[float] = None
    cost_total_usd: Optional[float] = None
    cost_links_usd: Optional[float] = None
    cost_nics_usd: Optional[float] = None
    cost_switches_usd: Optional[float] = None
    perf_per_cost: Optional[float] = None
    normalized_time: Optional[float] = None
    normalized_perf_per_cost: Optional[float] = None
    status: str = "ok"
    skip_reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


COLUMNS = [f.name for f in fields(ReportRow)]


def evaluate(
    t: Topology,
    w: Workload,
    scheme: AllocScheme,
    budget: float,
    net: NetParams,
    costs: UnitCosts,
    bw_floor: float = DEFAULT_FLOOR,
) -> ReportRow:
    """Allocate, simulate and price one design point."""
    row = ReportRow(t.name, w.name, scheme.label, float(budget))
    try:
        mapping = map_parallelism(t, w)
    except MappingError as exc:
        row.status, row.skip_reason = "skipped", str(exc)
        return row
    alloc = allocate(scheme, t, w, mapping, budget, bw_floor)
    sim = simulate_iteration(t, w, mapping, alloc, net)
    cost = network_cost(t, alloc, costs)
    row.iteration_time_s = sim.iteration_time
    row.compute_time_s = sim.compute_time
    row.mp_comm_time_s = sim.mp_comm_time
    row.dp_comm_time_s = sim.dp_comm_time
    row.bw_per_dim_gbps = list(alloc.per_dim)
    row.util_per_dim = list(sim.per_dim_utilization)
    row.avg_bw_utilization = sim.avg_bw_utilization
    row.cost_total_usd = cost.total
    row.cost_links_usd = cost.links
    row.cost_nics_usd = cost.nics
    row.cost_switches_usd = cost.switches
    row.perf_per_cost = perf_per_cost(sim, cost)
    return row


def _evaluate_job(args):
    return evaluate(*args)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list[ReportRow]:
    """Evaluate the full topology x workload x scheme x budget product, in that order."""
    jobs = [
        (t, w, s, b, cfg.net, cfg.costs, cfg.bw_floor)
        for t in cfg.topologies
        for w in cfg.workloads
        for s in cfg.schemes
        for b in cfg.budgets
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_job, jobs, chunksize=8))
    else:
        rows = [_evaluate_job(j) for j in jobs]
    _normalize(rows, cfg)
    return rows


def _normalize(rows: list[ReportRow], cfg: SweepConfig):
    """Divide by EqualBW at the smallest budget of the same topology and workload."""
    lowest = min(cfg.budgets)
    base: dict[tuple, ReportRow] = {}
    for r in rows:
        if r.ok and r.scheme == AllocScheme.EQUAL.label and r.budget_gbps == lowest:
            base[(r.topology, r.workload)] = r
    topo = {t.name: t for t in cfg.topologies}
    work = {w.name: w for w in cfg.workloads}
    for r in rows:
        if not r.ok:
            continue
        key = (r.topology, r.workload)
        if key not in base:
            base[key] = evaluate(topo[r.topology], work[r.workload], AllocScheme.EQUAL, lowest,
                                 cfg.net, cfg.costs, cfg.bw_floor)
        ref = base[key]
        r.normalized_time = r.iteration_time_s / ref.iteration_time_s
        r.normalized_perf_per_cost = r.perf_per_cost / ref.perf_per_cost


# --- NIC traffic ---------------------------------------------------------


def last_dim_traffic(t: Topology, w: Workload) -> float:
    """Bytes per NPU leaving through the outermost dimension in one iteration.

    Counts every collective that crosses that dimension, so MP traffic on a
    shared outermost dimension is included.
    """
    return traffic_profile(t, w).total[-1]


def nic_multipliers(topologies: Sequence[Topology], w: Workload, reference: Optional[Topology] = None) -> list[float]:
    """NICs per NPU each topology needs to match ``reference``'s last-dimension time.

    ``reference`` defaults to the topology with the most dimensions.
    """
    if reference is None:
        reference = max(topologies, key=len)
    ref = last_dim_traffic(reference, w)
    return [last_dim_traffic(t, w) / ref for t in topologies]


@dataclass
class NicRow:
    workload: str
    topology: str
    dims: int
    last_dim_bytes: float
    nics_per_npu: float


def nic_traffic_table(cfg: SweepConfig) -> list[NicRow]:
    rows = []
    for w in cfg.workloads:
        usable = []
        for t in cfg.topologies:
            try:
                map_parallelism(t, w)
                usable.append(t)
            except MappingError as exc:
                log.warning("skipping %s on %s: %s", w.name, t.name, exc)
        if not usable:
            continue
        mult = nic_multipliers(usable, w)
        for t, m in zip(usable, mult):
            rows.append(NicRow(w.name, t.name, len(t), last_dim_traffic(t, w), m))
    return rows


# --- serialization -------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, list):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def rows_to_csv(rows: Sequence, columns: Optional[list[str]] = None) -> str:
    if not rows:
        raise ValueError("nothing to report")
    columns = columns or [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        d = asdict(r)
        writer.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def rows_to_json(rows: Sequence) -> str:
    if not rows:
        raise ValueError("nothing to report")
    return json.dumps([asdict(r) for r in rows], indent=1)


def rows_from_json(text: str) -> list[ReportRow]:
    return [ReportRow(**d) for d in json.loads(text)]


def rows_from_csv(text: str) -> list[ReportRow]:
    """Parse a report CSV; floats carry the 9 significant digits written out."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw: dict[str, Any] = {}
        for f in fields(ReportRow):
            raw = rec[f.name]
            if f.name in ("topology", "workload", "scheme", "status", "skip_reason"):
                kw[f.name] = raw
            elif f.name in ("bw_per_dim_gbps", "util_per_dim"):
                kw[f.name] = [float(x) for x in raw.split(";")] if raw else []
            else:
                kw[f.name] = float(raw) if raw != "" else None
        out.append(ReportRow(**kw))
    return out


def emit_report(rows: Sequence, fmt: str = "csv", out_dir=".", stem: str = "report") -> list[Path]:
    """Write ``rows`` as CSV and/or JSON into ``out_dir``; returns the written paths."""
    if not rows:
        raise ValueError("nothing to report")
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}")
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        p = out_dir / f"{stem}.csv"
        p.write_text(rows_to_csv(rows))
        written.append(p)
    if fmt in ("json", "both"):
        p = out_dir / f"{stem}.json"
        p.write_text(rows_to_json(rows))
        written.append(p)
    return written
