import numpy as np
import pytest

from pulserecon.grape import GrapeSettings, sweep_family
from pulserecon.harness import TargetFamily
from pulserecon.hydrogen import load_basis
from pulserecon.transmon import DeviceConfig

# desk-scale resolution used wherever a family is optimized
N_STEPS = 400

DT_GRID = np.arange(1, 8) * 0.5                 # 0.5 .. 3.5 inverse Hartree
MASS_GRID = np.round(0.7 + 0.1 * np.arange(13), 10)
MASS_DT = 0.5
# per-step gate errors accumulate along the dynamic-mass run
MASS_SETTINGS = GrapeSettings(target_infidelity=1e-10)

_acceptance = {}


def record(criterion, passed, detail):
    _acceptance[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance):
        ok, detail = _acceptance[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


def random_hermitian(rng, n, scale=1.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (A + A.conj().T) / 2


def random_unitary(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sto2g():
    return load_basis("sto-2g")


@pytest.fixture(scope="session")
def sto3g():
    return load_basis("sto-3g")


@pytest.fixture(scope="session")
def device2():
    return DeviceConfig(dim=2, n_steps=N_STEPS)


@pytest.fixture(scope="session")
def device3():
    return DeviceConfig(dim=3, n_steps=N_STEPS)


@pytest.fixture(scope="session")
def dt_targets(sto2g):
    return TargetFamily(sto2g, "dt", m_e=1.0)


@pytest.fixture(scope="session")
def dt_family(dt_targets, device2):
    return sweep_family(dt_targets.targets(DT_GRID), device2, GrapeSettings(), "dt")


@pytest.fixture(scope="session")
def mass_targets(sto2g):
    return TargetFamily(sto2g, "m_e", dt=MASS_DT)


@pytest.fixture(scope="session")
def mass_family(mass_targets, device2):
    return sweep_family(mass_targets.targets(MASS_GRID), device2, MASS_SETTINGS, "m_e")


@pytest.fixture(scope="session")
def sto3g_targets(sto3g):
    return TargetFamily(sto3g, "m_e", dt=MASS_DT)


@pytest.fixture(scope="session")
def sto3g_family(sto3g_targets, device3):
    return sweep_family(sto3g_targets.targets(MASS_GRID), device3, MASS_SETTINGS, "m_e")
