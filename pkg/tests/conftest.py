import numpy as np
import pytest

from egorov_spin import ModelSpec, advance_ensemble

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criteria_log():
    """Registry of acceptance verdict lines, echoed in the final summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger kernel compilation up front so timed tests measure the math."""
    z = np.zeros(4)
    n = np.array([0.0, 0.0, 0.0, 0.0])
    nz = np.ones(4)
    advance_ensemble(ModelSpec.rabi(0.1), z.copy(), z.copy(),
                     n.copy(), n.copy(), nz.copy(), 0.02, 0.01)
    advance_ensemble(ModelSpec(epsilon=0.1, sg_profile=("sine", 1.0, 1.0, 2.0)),
                     z.copy(), z.copy(), n.copy(), n.copy(), nz.copy(),
                     0.02, 0.01)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
