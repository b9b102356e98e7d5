import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slitwave.errors import GeometryError
from slitwave.geometry import (
    GratingGeometry,
    diagonal_slit,
    projected_slit_width,
    projected_slit_width_direct,
    solve_slit_width,
)

from .conftest import paper_geometry


def ray_traced_width(g, nz=20001):
    """Width of the bundle of straight rays that clear the channel walls.

    The left wall runs from (-t tan beta, 0) to (0, t), the right wall is
    vertical at y = s0; rays travel along (sin theta0, cos theta0).
    """
    t, tb, tt = g.thickness, math.tan(g.wedge_angle), math.tan(g.incidence)
    z = np.linspace(0.0, t, nz)
    left = -t * tb + z * tb
    lo = np.max(left - z * tt)
    hi = np.min(g.slit_width - z * tt)
    return max(hi - lo, 0.0) * math.cos(g.incidence)


def test_paper_projection():
    g = paper_geometry()
    assert g.s_perp == pytest.approx(26.92, abs=1e-3)
    # frozen from the closed forms
    assert g.S0 == pytest.approx(139.66893494598597, rel=1e-12)
    assert math.degrees(g.alpha) == pytest.approx(57.88717476734379, rel=1e-12)
    assert g.zeta == pytest.approx(0.19274161674049947, rel=1e-12)


def test_solve_slit_width_round_trip():
    s0 = solve_slit_width(26.92, 100, 118.3, 6.7, 21)
    assert s0 == pytest.approx(60.3493, abs=1e-4)
    assert GratingGeometry.from_degrees(100, 118.3, 6.7, s0, 21).s_perp == pytest.approx(26.92, rel=1e-12)


def test_ray_trace_oracle():
    for theta in (12.0, 18.0, 21.0, 25.0):
        g = paper_geometry(theta)
        assert projected_slit_width(g) == pytest.approx(ray_traced_width(g), abs=1e-9)


def test_thin_plate():
    g = GratingGeometry.from_degrees(100, 0, 0, 50, 10)
    S0, alpha = diagonal_slit(g)
    assert S0 == 50 and alpha == 0
    assert g.s_perp == pytest.approx(50 * math.cos(math.radians(10)))


@pytest.mark.parametrize("kwargs", [
    dict(d_nm=100, t_nm=118.3, beta_deg=6.7, s0_nm=60, theta0_deg=5),    # shadowing regime
    dict(d_nm=100, t_nm=118.3, beta_deg=6.7, s0_nm=-1, theta0_deg=21),
    dict(d_nm=50, t_nm=118.3, beta_deg=6.7, s0_nm=60, theta0_deg=21),
    dict(d_nm=100, t_nm=-1, beta_deg=6.7, s0_nm=60, theta0_deg=21),
])
def test_rejects_invalid(kwargs):
    with pytest.raises(GeometryError):
        GratingGeometry.from_degrees(**kwargs)


def test_fully_shadowed():
    g = GratingGeometry.from_degrees(100, 118.3, 6.7, 60.3493, 35)
    assert projected_slit_width_direct(g) < 0
    with pytest.raises(GeometryError):
        projected_slit_width(g)


geometries = st.builds(
    lambda d, t, beta, frac, extra: (d, t, beta, frac * d, beta + extra),
    st.floats(50, 200), st.floats(0.1, 200), st.floats(0, 20), st.floats(0.2, 0.9), st.floats(0.5, 40),
)


@given(geometries)
def test_two_forms_agree(p):
    d, t, beta, s0, theta0 = p
    g = GratingGeometry.from_degrees(d, t, beta, s0, theta0)
    direct = projected_slit_width_direct(g)
    S0, alpha = diagonal_slit(g)
    assert S0 * math.cos(g.incidence + alpha) == pytest.approx(direct, abs=1e-12 * S0)
    assert S0 >= s0 and 0 <= alpha < math.pi / 2


@given(geometries, st.floats(0.01, 5))
def test_projection_decreases_with_incidence(p, step):
    d, t, beta, s0, theta0 = p
    g1 = GratingGeometry.from_degrees(d, t, beta, s0, theta0)
    g2 = GratingGeometry.from_degrees(d, t, beta, s0, theta0 + step)
    assert projected_slit_width_direct(g2) < projected_slit_width_direct(g1)


def test_digest_is_stable():
    assert paper_geometry().digest() == paper_geometry().digest()
    assert paper_geometry().digest() != paper_geometry(18).digest()
