import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def crypt_cell():
    """Invariant density and averaged coefficients for the default crypt coefficients, n_ref = 32."""
    from crypthom.cell_problem import solve_cell_problem
    return solve_cell_problem(32)


@pytest.fixture(scope="session")
def crypt_hc(crypt_cell):
    return crypt_cell[1]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
