"""Diffraction intensities of the inclined grating.

Principal maxima sit at the Bragg angles of the y-periodic grating, while
the single-slit envelope is a Fourier transform along the tilted slit
(``eta`` axis).  Because the two axes are not aligned, the wave-vector
transfer along ``eta`` is not odd in the order ``n`` and the pattern
becomes asymmetric.

Two routes to ``I_n / I_0`` are provided:

* :func:`intensities_exact` integrates the slit amplitude directly;
* :func:`intensities_cumulant` uses the closed form built from the first
  two cumulants of the half-slit edge distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EvanescentOrderError, NumericalError
from .quadrature import build_half_rule
from .transmission import atom_shifts, check_cluster_fits

AMPLITUDE_RTOL = 1e-8


# --- angles and wave-vector transfer -------------------------------------

def bragg_angle(geom, beam, n):
    """Angle (rad) of the n-th principal maximum: ``sin(theta_n) = sin(theta0) + n lambda / d``."""
    arg = math.sin(geom.incidence) + n * beam.wavelength / geom.period
    if not -1.0 < arg < 1.0:
        raise EvanescentOrderError(f"order {n} is evanescent (sin theta_n = {arg:.6g})")
    return math.asin(arg)


def wavevector_transfer(geom, beam, theta):
    """``K(theta) = k [sin(theta + alpha) - sin(theta0 + alpha)]`` along the slit (1/nm)."""
    alpha = geom.alpha
    theta = np.asarray(theta, dtype=float)
    K = beam.wavenumber * (np.sin(theta + alpha) - math.sin(geom.incidence + alpha))
    return K if K.ndim else float(K)


def wavevector_transfer_quadratic(geom, beam, n):
    """Second-order-in-n expansion of ``K(theta_n)``.

    ``K / cos(theta0+alpha) ~ q + lambda (tan theta0 - tan(theta0+alpha)) q^2 / (4 pi)``
    with ``q = 2 pi n / (d cos theta0)``.
    """
    theta0, alpha = geom.incidence, geom.alpha
    q = 2 * math.pi * np.asarray(n, dtype=float) / (geom.period * math.cos(theta0))
    curvature = beam.wavelength * (math.tan(theta0) - math.tan(theta0 + alpha)) / (4 * math.pi)
    K = math.cos(theta0 + alpha) * (q + curvature * q ** 2)
    return K if K.ndim else float(K)


def propagating_orders(geom, beam, n_max):
    """Orders ``-n_max..n_max`` that propagate; evanescent ones are dropped."""
    out = []
    for n in range(-n_max, n_max + 1):
        try:
            out.append((n, bragg_angle(geom, beam, n)))
        except EvanescentOrderError:
            continue
    return out


# --- patterns -------------------------------------------------------------

@dataclass(frozen=True)
class PatternOrder:
    n: int
    theta: float
    K: float
    intensity: float
    uncertainty: float = 0.0


@dataclass(frozen=True)
class DiffractionPattern:
    """Relative intensities ``I_n / I_0`` of one pattern."""

    orders: tuple
    species: str
    wavelength: float
    geometry: str
    method: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return np.array([o.n for o in self.orders])

    @property
    def theta(self):
        return np.array([o.theta for o in self.orders])

    @property
    def K(self):
        return np.array([o.K for o in self.orders])

    @property
    def intensity(self):
        return np.array([o.intensity for o in self.orders])

    @property
    def uncertainty(self):
        return np.array([o.uncertainty for o in self.orders])

    def get(self, n):
        for o in self.orders:
            if o.n == n:
                return o
        raise KeyError(n)


def _pattern(geom, beam, orders, values, method):
    ns, thetas = zip(*orders)
    Ks = np.asarray(wavevector_transfer(geom, beam, np.array(thetas)))
    rows = tuple(PatternOrder(int(n), float(t), float(k), float(v))
                 for n, t, k, v in zip(ns, thetas, np.atleast_1d(Ks), values))
    return DiffractionPattern(rows, beam.species.name.lower(), beam.wavelength,
                              geom.digest(), method)


def contrast(pattern):
    """``C_n = (I_n - I_-n) / (I_n + I_-n)`` for every ``n > 0`` with a mirror order."""
    by_n = {o.n: o.intensity for o in pattern.orders}
    out = []
    for n in sorted(k for k in by_n if k > 0):
        if -n not in by_n:
            raise KeyError(f"order {-n} missing for contrast of order {n}")
        a, b = by_n[n], by_n[-n]
        out.append((n, (a - b) / (a + b) if a + b > 0 else 0.0))
    return out


# --- exact amplitude -----------------------------------------------------

@lru_cache(maxsize=256)
def slit_rule(model, beam, refined=False):
    """Half-slit quadrature rule for the cluster transmission (cached per model and beam)."""
    check_cluster_fits(model, beam)
    shifts = atom_shifts(model, beam)
    if refined:
        return build_half_rule(model, beam, shifts, nodes=12, phase_step=math.pi / 2,
                               p_switch=1000.0, max_panel=1.0)
    return build_half_rule(model, beam, shifts)


def slit_transform(model, beam, K, refined=False):
    """``int_{-S0/2}^{S0/2} e^{-i K eta} tau(eta) d eta`` (tau is even in eta)."""
    return 2.0 * slit_rule(model, beam, refined).cosine_transform(K)


def _obliquity(geom, theta, obliquity):
    if obliquity == "incident":
        return np.full(np.shape(theta), geom.zeta)
    if obliquity == "outgoing":
        return np.cos(np.asarray(theta) + geom.alpha)
    raise ValueError("obliquity must be 'incident' or 'outgoing'")


def slit_amplitude_exact(geom, model, beam, theta, *, obliquity="incident", return_error=False):
    """Scattering amplitude of the diagonal slit at angle(s) ``theta``.

    ``f = cos(theta0 + alpha) / sqrt(lambda) * int e^{-i K eta} tau d eta``;
    ``obliquity="outgoing"`` uses ``cos(theta + alpha)`` instead.

    The quadrature error is estimated against a refined rule and must stay
    below ``1e-8 |f(theta0)|``.
    """
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    K = np.atleast_1d(wavevector_transfer(geom, beam, theta_arr))
    pref = _obliquity(geom, theta_arr, obliquity) / math.sqrt(beam.wavelength)
    coarse = slit_transform(model, beam, np.append(K, 0.0))
    fine = slit_transform(model, beam, np.append(K, 0.0), refined=True)
    err = np.max(np.abs(coarse - fine)) / abs(fine[-1])
    if err > AMPLITUDE_RTOL:
        raise NumericalError(f"slit quadrature did not converge (relative error {err:.2e})")
    f = pref * fine[:-1]
    if np.ndim(theta) == 0:
        f = complex(f[0])
    return (f, err) if return_error else f


def absolute_intensities_exact(geom, model, beam, n_max, *, obliquity="incident"):
    """``|f(theta_n)|^2`` per propagating order (arbitrary common scale)."""
    orders = propagating_orders(geom, beam, n_max)
    thetas = np.array([t for _, t in orders])
    f = slit_amplitude_exact(geom, model, beam, thetas, obliquity=obliquity)
    return orders, np.abs(f) ** 2


def intensities_exact(geom, model, beam, n_max, *, obliquity="incident"):
    """``|f(theta_n)|^2 / |f(theta_0)|^2`` from the untruncated slit amplitude."""
    orders, I = absolute_intensities_exact(geom, model, beam, n_max, obliquity=obliquity)
    I0 = I[[n for n, _ in orders].index(0)]
    return _pattern(geom, beam, orders, I / I0, "exact")


# --- cumulant route ------------------------------------------------------

@dataclass(frozen=True)
class CumulantSet:
    """First two cumulants of each half-slit and the parameters derived from them (nm, nm^2)."""

    r1_plus: complex
    r1_minus: complex
    r2_plus: complex
    r2_minus: complex
    s_eff: float
    sigma: float
    delta: float
    gamma: float
    tau0: complex = 1.0 + 0j

    @classmethod
    def from_cumulants(cls, S0, r1p, r1m, r2p, r2m, tau0=1.0 + 0j):
        var = ((r2p + r2m) / 2).real
        if var < 0:
            raise NumericalError(f"negative Debye-Waller variance {var:.4g} nm^2")
        s_eff = S0 - (r1p + r1m).real
        if s_eff <= 0:
            raise NumericalError(f"effective slit width {s_eff:.4g} nm is not positive")
        return cls(complex(r1p), complex(r1m), complex(r2p), complex(r2m), float(s_eff),
                   math.sqrt(var), float((r1p + r1m).imag), float((r1p - r1m).imag),
                   complex(tau0))


def cumulants(geom, model, beam):
    """Cumulants ``R1, R2`` of both half slits.

    ``R1 = int_0^{S0/2} (1 - tau/tau(0))`` and
    ``R2 = 2 int_0^{S0/2} (S0/2 - eta) (1 - tau/tau(0)) - R1^2``,
    the mean and variance of the edge distribution ``d tau / d eta``.
    """
    rule = slit_rule(model, beam)
    h = model.half_width
    tau0 = rule.tau0
    if abs(tau0) == 0:
        raise NumericalError("slit centre is blocked")
    r1 = h - rule.integral() / tau0
    r2 = h * h - 2 * rule.edge_moment() / tau0 - r1 * r1
    # tau is even in eta, so both halves share their cumulants
    return CumulantSet.from_cumulants(geom.S0, r1, r1, r2, r2, tau0)


def relative_intensity(K, s_eff, sigma, delta, gamma):
    """Two-cumulant intensity ratio ``I(K)/I(0)``.

    ``exp(-K^2 Sigma^2 - K Gamma) [sin^2(K S/2) + sinh^2(K Delta/2)] / (K^2 (S^2+Delta^2)/4)``,
    written as a weighted mean of ``sinc^2`` and ``sinhc^2`` so that ``K = 0`` is regular.
    """
    K = np.asarray(K, dtype=float)
    x = 0.5 * K * s_eff
    y = 0.5 * K * delta
    sinc2 = np.sinc(x / np.pi) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        shc2 = np.where(y == 0, 1.0, (np.sinh(y) / np.where(y == 0, 1.0, y)) ** 2)
    bracket = (s_eff ** 2 * sinc2 + delta ** 2 * shc2) / (s_eff ** 2 + delta ** 2)
    return np.exp(-(K * sigma) ** 2 - K * gamma) * bracket


def absolute_intensity_cumulant(K, cs):
    """Two-cumulant ``|int e^{-iK eta} tau|^2`` (same scale as :func:`absolute_intensities_exact`)."""
    return abs(cs.tau0) ** 2 * (cs.s_eff ** 2 + cs.delta ** 2) * relative_intensity(
        K, cs.s_eff, cs.sigma, cs.delta, cs.gamma)


def intensities_cumulant(geom, model, beam, n_max, *, cumulant_set=None):
    """``I_n / I_0`` from the two-cumulant formula at the exact Bragg ``K``."""
    cs = cumulant_set or cumulants(geom, model, beam)
    orders = propagating_orders(geom, beam, n_max)
    K = np.asarray(wavevector_transfer(geom, beam, np.array([t for _, t in orders])))
    values = relative_intensity(K, cs.s_eff, cs.sigma, cs.delta, cs.gamma)
    pat = _pattern(geom, beam, orders, values, "cumulant")
    pat.meta["cumulants"] = cs
    return pat
