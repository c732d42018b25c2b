import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiernet.bw_alloc import (
    AllocScheme,
    SolverError,
    TrafficProfile,
    allocate,
    equal_bw,
    fluid_comm_time,
    golden_section,
    message_bw,
    shared_budget_use,
    smart_bw,
    smart_bw_shared,
    smart_bw_unshared,
    traffic_profile,
    two_phase_time,
)
from hiernet.schedule import per_dim_traffic
from hiernet.topology import parse_topology
from hiernet.workload import Workload, map_parallelism


@pytest.mark.parametrize("budget, n, out", [(300, 3, [100] * 3), (300, 4, [75] * 4), (100, 1, [100])])
def test_equal(budget, n, out):
    assert list(equal_bw(budget, n).per_dim) == out


@pytest.mark.parametrize(
    "messages, out", [([100, 200], [100, 200]), ([1, 1, 1], [100, 100, 100])]
)
def test_message(messages, out):
    assert list(message_bw(300, messages).per_dim) == pytest.approx(out)


def test_message_from_traffic_count():
    traffic = per_dim_traffic([("Ring", 4), ("Ring", 2), ("Ring", 2)], 16e6)
    assert list(message_bw(300, traffic).per_dim) == pytest.approx([240, 40, 20])


def test_message_floor_for_idle_dim():
    a = message_bw(100, [3.0, 0.0, 1.0])
    assert a.per_dim[1] == pytest.approx(0.1)
    assert sum(a.per_dim) == pytest.approx(100)
    assert a.per_dim[0] / a.per_dim[2] == pytest.approx(3)


def test_message_errors():
    with pytest.raises(ValueError):
        message_bw(100, [0.0, 0.0])
    with pytest.raises(ValueError):
        message_bw(0, [1.0])


def test_unshared_closed_form():
    assert smart_bw_unshared(300, 4e9, 1e9) == pytest.approx((200, 100))
    assert smart_bw_unshared(120, 7.0, 7.0) == pytest.approx((60, 60))


@settings(max_examples=100)
@given(st.floats(1, 1000), st.floats(1e3, 1e12), st.floats(1e3, 1e12))
def test_unshared_beats_grid(budget, m_mp, m_dp):
    x, y = smart_bw_unshared(budget, m_mp, m_dp)
    best = two_phase_time(m_mp, m_dp, x, y)
    grid = np.linspace(budget / 1000, budget * 999 / 1000, 1000)
    assert best <= (m_mp / grid + m_dp / (budget - grid)).min() * (1 + 1e-12)


def test_shared_reduces_to_unshared():
    sol = smart_bw_shared(300, 4e9, 1e9, 0.0, 0.0)
    assert (sol.bw_mp, sol.bw_dp) == pytest.approx((200, 100))


def test_shared_boundary_all_mp_on_shared_dim():
    sol = smart_bw_shared(300, 4e9, 1e9, 1.0, 0.0)
    assert (sol.bw_mp, sol.bw_dp) == pytest.approx((200, 100), rel=1e-6)


def _grid_min(budget, m_mp, m_dp, r_mp, r_dp, n=1500):
    x = np.linspace(budget / n, budget, n)[:, None]
    y = np.linspace(budget / n, budget * 3, n)[None, :]
    use = (1 - r_mp) * x + (1 - r_dp) * y + np.maximum(r_mp * x, r_dp * y)
    s = budget / use
    return (m_mp / (x * s) + m_dp / (y * s)).min()


def test_shared_matches_grid():
    sol = smart_bw_shared(300, 4.0, 4.0, 0.5, 0.5)
    assert sol.objective == pytest.approx(_grid_min(300, 4.0, 4.0, 0.5, 0.5), rel=1e-5)
    assert shared_budget_use(sol.bw_mp, sol.bw_dp, 0.5, 0.5) == pytest.approx(300, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(10, 1000), st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 0.99), st.floats(0.01, 0.99)
)
def test_shared_never_worse_than_grid(budget, m_mp, m_dp, r_mp, r_dp):
    sol = smart_bw_shared(budget, m_mp, m_dp, r_mp, r_dp)
    assert sol.objective <= _grid_min(budget, m_mp, m_dp, r_mp, r_dp, 600) * (1 + 1e-9)
    assert sol.bw_shared == pytest.approx(max(r_mp * sol.bw_mp, r_dp * sol.bw_dp))


def test_shared_rejects_bad_input():
    with pytest.raises(ValueError):
        smart_bw_shared(0, 1, 1, 0.5, 0.5)
    with pytest.raises(ValueError):
        smart_bw_shared(10, 1, 1, 1.5, 0.5)


def test_golden_section_reports_non_convergence():
    with pytest.raises(SolverError):
        golden_section(lambda x: (x - 1) ** 2, 0, 10, tol=1e-30, max_iter=20)
    x, fx, _ = golden_section(lambda x: (x - 1) ** 2, 0, 10, tol=1e-10)
    assert x == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("text", ["smart", "SmartBW", "smartbw", AllocScheme.SMART])
def test_scheme_parse(text):
    assert AllocScheme.parse(text) is AllocScheme.SMART


def test_scheme_parse_error():
    with pytest.raises(ValueError, match="unknown"):
        AllocScheme.parse("fair")


def test_smart_equals_message_for_pure_dp(workloads, topologies):
    w = workloads["Transformer-17B"]
    for t in topologies.values():
        m = map_parallelism(t, w)
        assert allocate("smart", t, w, m, 250).per_dim == allocate("message", t, w, m, 250).per_dim


def test_equal_on_3d(workloads, topologies):
    t = topologies[3]
    w = workloads["GPT-3"]
    assert allocate("equal", t, w, None, 300).per_dim == pytest.approx((100, 100, 100))


def test_message_gpt3_4d_group_split(workloads, topologies):
    t, w = topologies[4], workloads["GPT-3"]
    prof = traffic_profile(t, w)
    assert prof.mp[2:] == (0.0, 0.0) and prof.dp[:2] == (0.0, 0.0)
    a = allocate("message", t, w, None, 400)
    assert sum(a.per_dim) == pytest.approx(400)
    assert [b / 400 for b in a.per_dim] == pytest.approx([m / sum(prof.total) for m in prof.total])


def test_smart_shared_dim_allocation():
    t = parse_topology("Ring(2)_FC(8)_Ring(8)_Switch(8)")
    w = Workload("hyb", 1e9, 32, 32, 1.0, mp_comm_bytes=4e9)
    prof = traffic_profile(t, w, map_parallelism(t, w))
    assert prof.shared_dim == 3
    assert 0 < prof.r_mp < 1 and 0 < prof.r_dp < 1
    a = smart_bw(300, prof)
    sol = smart_bw_shared(300, prof.m_mp, prof.m_dp, prof.r_mp, prof.r_dp)
    assert a.per_dim[2] == pytest.approx(sol.bw_shared)
    assert sum(a.per_dim) == pytest.approx(300)


@st.composite
def profiles(draw):
    n = draw(st.integers(2, 4))
    split = draw(st.integers(1, n - 1))
    shared = draw(st.sampled_from([None, split]))
    vals = st.floats(1e6, 1e11)
    mp = [draw(vals) if k <= split else 0.0 for k in range(1, n + 1)]
    dp = [draw(vals) if k >= split + (shared is None) else 0.0 for k in range(1, n + 1)]
    return TrafficProfile(tuple(mp), tuple(dp), shared)


@settings(max_examples=200, deadline=None)
@given(profiles(), st.floats(10, 1000))
def test_smart_is_fluid_optimal(prof, budget):
    smart = fluid_comm_time(prof, smart_bw(budget, prof))
    message = fluid_comm_time(prof, message_bw(budget, prof.total))
    equal = fluid_comm_time(prof, equal_bw(budget, len(prof.mp)))
    assert smart <= message * (1 + 1e-7)
    assert smart <= equal * (1 + 1e-7)
