import numpy as np
import pytest

from fwmsource.atoms import AtomEnsemble, DriveConfig
from fwmsource.config import RunConfig
from fwmsource.sweep import evaluate

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ens():
    return AtomEnsemble.from_constants()


@pytest.fixture(scope="session")
def drive():
    return DriveConfig.from_mhz(4.6, 11.5)


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def operating_point(cfg):
    """(figures, waveform) at the reference operating point, uncalibrated."""
    return evaluate(cfg, cfg.point)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# close to what ``fwmsource calibrate`` fits to the bundled reference points;
# unit tests only need realistic, mutually consistent rates
NOMINAL_CALIBRATION = dict(c_g=1.424e-3, c_R=8.775e-4, c_eta=1.0188e-3)


@pytest.fixture(scope="session")
def calibrated_point(cfg):
    from fwmsource.biphoton import Calibration
    return evaluate(cfg, cfg.point, Calibration(**NOMINAL_CALIBRATION))
