from __future__ import annotations

import numpy as np
import pytest

from q2c.ansatz import AnsatzParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_theta(rng, n_layers=3, n_qubits=2) -> AnsatzParams:
    return AnsatzParams(rng.uniform(0, 2 * np.pi, size=(n_layers, n_qubits, 3)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
