import math

import numpy as np
import pytest

from photon_echo.model import SystemParams


@pytest.fixture
def preset_params():
    """Reference parameter set with d = 0."""
    return SystemParams(omega12=2.4e15, omega23=2.4e15, gamma1=5e9, gamma3=5e9, gamma12=1e10,
                        capital_gamma=1e12)


@pytest.fixture
def bare_params():
    return SystemParams(omega12=2.4e15, omega23=2.4e15)


def random_density(rng, n=3):
    """Random positive unit-trace Hermitian matrix."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def rabi_populations(g0, t):
    """Closed-form two-level populations (rho11, rho22) for a ground-start atom.

    Derived independently from i d/dt (c1, c2) = -(g0 c2, g0 c1) at resonance:
    c2 = cos(g0 t), c1 = i sin(g0 t).
    """
    t = np.asarray(t, dtype=float)
    return np.sin(g0 * t) ** 2, np.cos(g0 * t) ** 2


PI = math.pi


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
    missing = sorted(set(range(1, 8)) - set(results))
    for n in missing:
        terminalreporter.write_line(f"criterion {n}: FAIL  (not completed, see traceback above)")
