import numpy as np
import pytest

from ficic.channel import NarrowbandScenario


def scalar_scenario(p0=1.0, h=(1.0,), hbar_m=0.0, hbar_mp=(1.0,), sigma_n2=1.0, sigma_i2=0.0, phi=0.0):
    """Single-user scenario from explicit values; ``hbar_mp`` is the N_r vector itself."""
    return NarrowbandScenario(np.array([h], dtype=complex), np.array([[hbar_m]], dtype=complex),
                              np.conj(np.array([hbar_mp], dtype=complex)), sigma_n2, sigma_i2, p0, phi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def record_criterion(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    _CRITERIA[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
