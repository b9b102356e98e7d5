import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from slitwave.quadrature import build_half_rule
from slitwave.transmission import TransmissionModel, atom_transmission, de_broglie, phase_strength


def single_wall_model(h=5000.0, cutoff=1e-3):
    return TransmissionModel(c3=0.113, path_length=614.0, bond_length=0.0, zeta=1.0,
                             wall_cutoff=cutoff, slit_length=2 * h)


def test_single_wall_closed_form():
    """h - int tau over a half slit -> Gamma(2/3) A^(1/3) exp(-i pi/6) for a far second wall."""
    m = single_wall_model()
    b = de_broglie("trimer", 0.4)
    A = phase_strength(m, b)
    h = m.half_width
    rule = build_half_rule(m, b, [0.0])
    r1 = h - rule.integral()
    # leading far-wall and tail corrections: + i A / (8 h^2)
    expected = gamma(2 / 3) * A ** (1 / 3) * np.exp(-1j * math.pi / 6) + 1j * A / (8 * h * h)
    assert abs(r1 - expected) < 1e-9 * abs(expected)


def test_against_brute_force(geom, trimer):
    """Independent adaptive quadrature in the wall distance l = h - eta.

    A 1 nm cutoff keeps the phase below a few hundred radians so that
    plain adaptive quadrature converges.
    """
    model = TransmissionModel.for_geometry(geom, wall_cutoff=1.0)
    rule = build_half_rule(model, trimer, [0.0])
    h, c = model.half_width, model.cutoff

    def part(fn, lo, hi):
        return quad(lambda l: fn(atom_transmission(model, trimer, h - l)), lo, hi,
                    limit=5000, epsabs=1e-13, epsrel=1e-13)[0]

    ref = sum(part(np.real, lo, hi) + 1j * part(np.imag, lo, hi)
              for lo, hi in ((c, 2.0), (2.0, 10.0), (10.0, h)))
    assert abs(rule.integral() - ref) < 1e-10 * h


def test_free_slit_exact(geom, trimer):
    m = TransmissionModel.for_geometry(geom, c3=0.0)
    rule = build_half_rule(m, trimer, [0.0])
    h = m.half_width
    assert rule.integral() == pytest.approx(h, rel=1e-14)
    assert rule.edge_moment() == pytest.approx(h * h / 2, rel=1e-13)
    K = 0.37
    assert rule.cosine_transform(K) == pytest.approx(math.sin(K * h) / K, rel=1e-12)


def test_refinement_stable(model, trimer):
    a = build_half_rule(model, trimer, [0.0]).integral()
    b = build_half_rule(model, trimer, [0.0], nodes=16, phase_step=math.pi / 4, max_panel=0.5).integral()
    assert abs(a - b) < 1e-11 * model.half_width
