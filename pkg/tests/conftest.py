import math
import warnings

import pytest
from hypothesis import settings

from slitwave.geometry import GratingGeometry
from slitwave.transmission import TransmissionModel, de_broglie

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

PAPER = dict(d_nm=100.0, t_nm=118.3, beta_deg=6.7, s0_nm=60.3493, theta0_deg=21.0)


def paper_geometry(theta0_deg=21.0):
    return GratingGeometry.from_degrees(PAPER["d_nm"], PAPER["t_nm"], PAPER["beta_deg"],
                                        PAPER["s0_nm"], theta0_deg)


@pytest.fixture
def geom():
    return paper_geometry()


@pytest.fixture
def model(geom):
    return TransmissionModel.for_geometry(geom)


@pytest.fixture
def trimer():
    return de_broglie("trimer", 0.4)


@pytest.fixture(autouse=True)
def _quiet_fit_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def thin_geometry(s0=60.0, theta0_deg=0.0):
    """Thin plate: alpha = 0 and S0 = s0."""
    return GratingGeometry(100.0, 0.0, 0.0, s0, math.radians(theta0_deg))


# --- acceptance report -------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def accept():
    """Record one acceptance line and assert on it."""

    def record(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


@pytest.fixture
def note():
    """Informational line that does not gate anything."""

    def record(label, detail):
        ACCEPTANCE_LINES.append(f"[INFO] {label}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
