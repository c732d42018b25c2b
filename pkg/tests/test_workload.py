import json

import pytest

from hiernet.topology import parse_topology
from hiernet.workload import MappingError, SharedDim, Workload, comm_volumes, load_workloads, map_parallelism

T4D = parse_topology("Ring(2)_FC(8)_Ring(8)_Switch(8)")


def wl(mp, dp, **kw):
    kw.setdefault("mp_comm_bytes", 1e9 if mp > 1 else 0.0)
    return Workload("w", 1e9, mp, dp, 1.0, **kw)


def test_mp16_packs_inner_dims():
    m = map_parallelism(T4D, wl(16, 64))
    assert m.mp_dims == ((1, 2), (2, 8))
    assert m.dp_dims == ((3, 8), (4, 8))
    assert m.shared_dim is None


def test_mp32_shares_dim3():
    m = map_parallelism(T4D, wl(32, 32))
    assert m.mp_dims == ((1, 2), (2, 8))
    assert m.shared_dim == SharedDim(3, 2, 4)
    assert (4, 8) in m.dp_dims
    assert m.mp_groups() == [(1, 2), (2, 8), (3, 2)]
    assert m.dp_groups() == [(3, 4), (4, 8)]
    assert (m.mp_size, m.dp_size) == (32, 32)


def test_pure_dp_uses_every_dim():
    t = parse_topology("Ring(8)_Switch(128)")
    m = map_parallelism(t, wl(1, 1024))
    assert m.mp_dims == () and m.shared_dim is None
    assert m.dp_dims == ((1, 8), (2, 128))


def test_npu_mismatch():
    with pytest.raises(MappingError, match="1024"):
        map_parallelism(T4D, wl(16, 32))


def test_mp_factor_not_dividing():
    t = parse_topology("Ring(4)_Ring(6)")
    with pytest.raises(MappingError):
        map_parallelism(t, wl(6, 4))


def test_comm_volumes_default_rule():
    w = Workload("Transformer-17B", 17e9, 1, 1024, 1.0)
    assert comm_volumes(w) == (0.0, 34e9)


def test_comm_volumes_explicit():
    w = Workload("x", 1e9, 2, 2, 1.0, mp_comm_bytes=8e9, dp_comm_bytes=1e9)
    assert comm_volumes(w) == (8e9, 1e9)


def test_comm_volumes_zero_params():
    w = Workload("x", 0.0, 2, 2, 1.0, mp_comm_bytes=3e9)
    assert comm_volumes(w) == (3e9, 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mp_size=0, dp_size=4),
        dict(mp_size=1, dp_size=4, mp_comm_bytes=5.0),
        dict(mp_size=2, dp_size=2, mp_comm_bytes=-1.0),
        dict(mp_size=2, dp_size=2, compute_time=-1.0),
    ],
)
def test_invalid_workloads(kwargs):
    base = dict(name="x", params=1.0, compute_time=1.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        Workload(**base)


def test_record_round_trip():
    w = Workload("x", 1e9, 4, 2, 0.5, mp_comm_bytes=1e6, dp_comm_bytes=2e6)
    assert Workload.from_record(w.to_record()) == w


def test_record_rejects_unknown_and_missing():
    with pytest.raises(ValueError, match="unknown"):
        Workload.from_record({"name": "x", "params": 1, "mp_size": 1, "dp_size": 1, "compute_time": 1, "layers": 3})
    with pytest.raises(ValueError, match="missing"):
        Workload.from_record({"name": "x", "params": 1})


def test_bundled_workloads():
    ws = {w.name: w for w in load_workloads()}
    assert set(ws) == {"Transformer-17B", "GPT-3", "Transformer-1T"}
    assert all(w.npus == 1024 for w in ws.values())
    assert (ws["GPT-3"].mp_size, ws["GPT-3"].dp_size) == (16, 64)
    assert (ws["Transformer-1T"].mp_size, ws["Transformer-1T"].dp_size) == (128, 8)
    assert comm_volumes(ws["Transformer-17B"]) == (0.0, 34e9)


def test_load_from_file(tmp_path):
    p = tmp_path / "w.json"
    p.write_text(json.dumps([{"name": "a", "params": 1e6, "mp_size": 2, "dp_size": 2, "compute_time": 1,
                              "mp_comm_bytes": 10}]))
    (w,) = load_workloads(p)
    assert w.name == "a" and w.mp_comm_bytes == 10
