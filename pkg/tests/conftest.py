import pytest

from hiernet import load_config, load_workloads, parse_topology

TOPOLOGY_2D = "Ring(8)_Switch(128)"
TOPOLOGY_3D = "Ring(8)_FC(8)_Switch(16)"
TOPOLOGY_4D = "Ring(2)_FC(8)_Ring(8)_Switch(8)"


@pytest.fixture(scope="session")
def workloads():
    return {w.name: w for w in load_workloads()}


@pytest.fixture(scope="session")
def topologies():
    return {len(t): t for t in map(parse_topology, (TOPOLOGY_2D, TOPOLOGY_3D, TOPOLOGY_4D))}


@pytest.fixture(scope="session")
def bundled_config():
    return load_config()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
