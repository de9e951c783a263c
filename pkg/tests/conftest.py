import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from dfrelay.constellation import make_mpsk
from dfrelay.labeling import LabelingProfile, Scheme

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = Path(ROOT) / "configs"

# reference maps for the 4- and 8-PSK labelling tables
XR_8 = (1, 5, 2, 7, 3, 8, 4, 6)
XS2_8 = (1, 3, 5, 6, 8, 2, 4, 7)
XR_4 = (1, 3, 4, 2)
XS2_4 = (1, 2, 4, 3)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def psk4():
    return make_mpsk(4)


@pytest.fixture(scope="session")
def psk8():
    return make_mpsk(8)


@pytest.fixture(scope="session")
def nodf8():
    return LabelingProfile(Scheme.NODF, tuple(range(1, 9)), XR_8, XS2_8)


@pytest.fixture(scope="session")
def odf8():
    return LabelingProfile(Scheme.ODF, tuple(range(1, 9)), XR_8)


@pytest.fixture(scope="session")
def nodf4():
    return LabelingProfile(Scheme.NODF, (1, 2, 3, 4), XR_4, XS2_4)


@pytest.fixture(scope="session")
def odf4():
    return LabelingProfile(Scheme.ODF, (1, 2, 3, 4), XR_4)
