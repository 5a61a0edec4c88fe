import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from grid_interdict import load_toy  # noqa: E402
from grid_interdict.grid_model import network_from_dict  # noqa: E402


def make_net(buses, branches, generators, demands, base_mva=100.0, v=(0.9, 1.1)):
    """Small network from compact tuples.

    branches: (id, from, to, s_max[, r, x]); generators: (id, bus, p_max[, q_min, q_max, alpha]);
    demands: (id, bus, p_base[, alpha]).
    """
    brs = []
    for rec in branches:
        i, f, t, s = rec[:4]
        r, x = rec[4:6] if len(rec) > 4 else (0.01, 0.1)
        d = r * r + x * x
        brs.append({"id": i, "from_bus": f, "to_bus": t, "g": r / d, "b": -x / d, "s_max": s})
    gens = []
    for k, rec in enumerate(generators):
        i, bus, p = rec[:3]
        qmin, qmax, alpha = rec[3:6] if len(rec) > 3 else (-1.0, 1.0, 1.0)
        gens.append({"id": i, "bus": bus, "p_max": p, "q_min": qmin, "q_max": qmax,
                     "alpha": alpha, "external": k == 0})
    dems = [{"id": rec[0], "bus": rec[1], "p_base": rec[2], "alpha": rec[3] if len(rec) > 3 else 0.0}
            for rec in demands]
    return network_from_dict({"base_mva": base_mva,
                              "buses": [{"id": b, "v_min": v[0], "v_max": v[1]} for b in buses],
                              "branches": brs, "generators": gens, "demands": dems})


@pytest.fixture(scope="session")
def meshed5():
    return load_toy("meshed5")


@pytest.fixture(scope="session")
def radial7():
    return load_toy("radial7")


@pytest.fixture(scope="session")
def reactive6():
    return load_toy("reactive6")


@pytest.fixture(scope="session")
def toys(meshed5, radial7, reactive6):
    return {"meshed5": meshed5, "radial7": radial7, "reactive6": reactive6}


def two_bus(s_max=1.0, demand=1.0):
    return make_net([1, 2], [(1, 1, 2, s_max)], [(1, 1, 5.0)], [(1, 2, demand)])


def rel_close(a, b, tol):
    return abs(a - b) <= tol * max(abs(a), abs(b)) + 1e-12


INF = math.inf


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list = []


def acceptance_line(name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print(ACCEPTANCE[-1])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
