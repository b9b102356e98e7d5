"""Inversion of diffraction data.

Per pattern, the two-cumulant intensity formula is fitted to the peak
table.  Across a velocity series, the projected effective widths are then
fitted with the cluster-size model to extract the bond length ``<r>``,
with asymmetric errors from a chi-square profile.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar

from .engine import (
    absolute_intensities_exact,
    absolute_intensity_cumulant,
    bragg_angle,
    cumulants,
    propagating_orders,
    relative_intensity,
    wavevector_transfer,
)
from .errors import DataError, NumericalError
from .peaks import PeakTable
from .quadrature import build_half_rule
from .transmission import Species, de_broglie

PARAMS = ("s_eff", "sigma", "delta", "gamma", "scale")

#: documented starting point (nm); s_eff starts at s_perp / zeta
START = {"sigma": 5.0, "delta": 10.0, "gamma": 1.5}


# --- single pattern --------------------------------------------------------

@dataclass(frozen=True)
class PatternFit:
    """Least-squares fit of the intensity formula to one peak table."""

    params: dict
    errors: dict
    covariance: np.ndarray
    chi2: float
    dof: int
    zeta: float
    fixed: tuple = ()
    warnings: tuple = ()
    residuals: np.ndarray = field(default=None, compare=False)

    @property
    def s_perp_eff(self):
        return self.params["s_eff"] * self.zeta

    @property
    def s_perp_eff_err(self):
        return self.errors["s_eff"] * self.zeta


def _model(K, p):
    return p[4] * relative_intensity(K, p[0], p[1], p[2], p[3])


def fit_pattern(peaks, geom, beam, *, fixed=None, start="scan", max_nfev=2000):
    """Weighted least-squares fit of ``(S_eff, Sigma, Delta, Gamma, scale)``.

    Parameters
    ----------
    peaks : PeakTable
        Needs the zeroth order, two negative orders and six orders overall.
    fixed : dict, optional
        Parameters held at given values (e.g. ``{"gamma": 0.0}``).
    start : {"scan", "fixed"}
        ``"fixed"`` starts from ``S_eff = s_perp/zeta`` and the magnitudes
        in :data:`START`.  ``"scan"`` (default) additionally scans ``S_eff``
        on a 0.25 nm grid with the other shape parameters at :data:`START`
        and polishes the three best local minima; both are deterministic.
    """
    peaks.validate()
    ok = peaks.present
    n = peaks.n[ok]
    if n.size < 6 or np.sum(n < 0) < 2:
        raise DataError("pattern fit needs >= 6 orders including n=0 and two negative orders")
    y = peaks.intensity[ok]
    e = peaks.uncertainty[ok]
    K = np.array([wavevector_transfer(geom, beam, bragg_angle(geom, beam, int(k))) for k in n])

    S0 = geom.S0
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAMS)
    if unknown:
        raise ValueError(f"unknown fixed parameters {sorted(unknown)}")
    free = [i for i, name in enumerate(PARAMS) if name not in fixed]
    lo = np.array([1e-3 * S0, 0.0, 0.0, -S0 / 2, 0.0])
    hi = np.array([S0, S0 / 2, S0, S0 / 2, np.inf])

    def full(q):
        p = np.array([fixed.get(name, 0.0) for name in PARAMS], dtype=float)
        p[free] = q
        return p

    def resid(q):
        return (_model(K, full(q)) - y) / e

    i0 = y[list(n).index(0)]
    base = np.array([geom.s_perp / geom.zeta, START["sigma"], START["delta"], START["gamma"], i0])
    for name, val in fixed.items():
        base[PARAMS.index(name)] = val
    base = np.clip(base, lo + 1e-9 * (hi - lo).clip(max=S0), hi - 1e-9 * S0)

    starts = [base]
    if start == "scan" and "s_eff" not in fixed:
        grid = np.arange(0.4 * S0, S0, 0.25)
        chis = []
        for s in grid:
            p = base.copy()
            p[0] = s
            shape = relative_intensity(K, *p[:4])
            if "scale" not in fixed:
                p[4] = np.sum(shape * y / e ** 2) / np.sum(shape ** 2 / e ** 2)
            chis.append(np.sum(((p[4] * shape - y) / e) ** 2))
        chis = np.array(chis)
        minima = [i for i in range(1, grid.size - 1) if chis[i] <= chis[i - 1] and chis[i] <= chis[i + 1]]
        minima = sorted(minima, key=lambda i: chis[i])[:3] or [int(np.argmin(chis))]
        starts = []
        for i in minima:
            p = base.copy()
            p[0] = grid[i]
            shape = relative_intensity(K, *p[:4])
            if "scale" not in fixed:
                p[4] = np.sum(shape * y / e ** 2) / np.sum(shape ** 2 / e ** 2)
            starts.append(p)
    elif start not in ("scan", "fixed"):
        raise ValueError("start must be 'scan' or 'fixed'")

    best = None
    for p0 in starts:
        res = least_squares(resid, p0[free], bounds=(lo[free], hi[free]), method="trf",
                            x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_nfev)
        if best is None or res.cost < best.cost:
            best = res
    if best.status <= 0:
        raise NumericalError(f"pattern fit did not converge: {best.message}")

    p = full(best.x)
    J = best.jac
    cov_free = np.linalg.pinv(J.T @ J)
    cov = np.zeros((len(PARAMS), len(PARAMS)))
    cov[np.ix_(free, free)] = cov_free
    err = {name: math.sqrt(max(cov[i, i], 0.0)) for i, name in enumerate(PARAMS)}
    notes = []
    for i in free:
        if np.isclose(p[i], lo[i], rtol=0, atol=1e-7 * S0) or np.isclose(p[i], hi[i], rtol=0, atol=1e-7 * S0):
            notes.append(f"{PARAMS[i]} at bound ({p[i]:.6g})")
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    chi2 = float(2 * best.cost)
    return PatternFit(dict(zip(PARAMS, map(float, p))), err, cov, chi2, int(n.size - len(free)),
                      geom.zeta, tuple(sorted(fixed)), tuple(notes), best.fun)


def bootstrap_pattern(peaks, geom, beam, *, replicas=20, seed=0, **fit_kwargs):
    """Parametric bootstrap: refit with intensities redrawn from their errors.

    Returns the list of :class:`PatternFit` results; the spread of
    ``s_perp_eff`` across them is the bootstrap error.
    """
    rng = np.random.default_rng(seed)
    ok = peaks.present
    fits = []
    for _ in range(replicas):
        I = peaks.intensity.copy()
        I[ok] = I[ok] + peaks.uncertainty[ok] * rng.standard_normal(int(ok.sum()))
        table = PeakTable(peaks.n, I, peaks.uncertainty, peaks.status, peaks.meta)
        fits.append(fit_pattern(table, geom, beam, **fit_kwargs))
    return fits


# --- cluster size ----------------------------------------------------------

@lru_cache(maxsize=65536)
def _surface_term(model, beam):
    offsets = [o * model.bond_length / model.zeta for o in beam.species.atom_offsets]
    # plus half: trailing atoms at eta - o
    rule = build_half_rule(model, beam, [-o for o in offsets])
    h = model.half_width
    return 2.0 * (h - rule.integral().real)


def surface_term(r, geom, model, beam):
    """``zeta Re{...}``: the van der Waals part of the width deficit (nm, projected)."""
    return geom.zeta * _surface_term(model.with_bond_length(r), beam)


def effective_width_model(r, geom, model, beam):
    """Projected effective slit width ``s_perp - f <r> - zeta Re{...}`` (nm).

    ``f`` is 0, 1/2, 3/4 for atom, dimer, trimer; the braces hold the
    half-slit integrals of ``1 - prod tau_at`` over the cluster's atoms.
    """
    if r < 0:
        raise ValueError("bond length must be >= 0")
    s = geom.s_perp - beam.species.width_fraction * r - surface_term(r, geom, model, beam)
    if s <= 0:
        raise NumericalError(f"<r>={r} nm leaves no effective slit width")
    return s


@dataclass(frozen=True)
class SizeFit:
    """Bond length with asymmetric (Delta chi^2 = 1) errors."""

    r: float
    err_plus: float
    err_minus: float
    chi2: float = float("nan")
    dof: int = 0
    residuals: tuple = ()
    one_sided: str = ""
    profile: tuple = ()

    @property
    def interval(self):
        return self.r - self.err_minus, self.r + self.err_plus


def _max_bond_length(geom, model, species):
    # keep every atom inside the slit and the width positive
    f = species.width_fraction or 0.5
    return 0.95 * min(geom.s_perp / f, 0.6 * model.slit_length * model.zeta)


def fit_bond_length(series, geom, model, species, *, r_max=None, profile_points=81):
    """One-parameter weighted fit of ``<r>`` to ``(velocity, s_perp_eff, err)`` points.

    Errors come from the ``Delta chi^2 = 1`` crossings of the chi-square
    profile.  Without a crossing inside ``[0, r_max]`` that side is
    reported as a one-sided bound (``one_sided`` = ``"lower"``/``"upper"``).
    """
    species = Species.parse(species)
    series = [(float(v), float(s), float(e)) for v, s, e in series]
    if len(series) < 3:
        raise DataError("need at least three velocity points")
    v = np.array([p[0] for p in series])
    if v.max() / v.min() < 1.5:
        raise DataError("velocities must span a factor of at least 1.5")
    s = np.array([p[1] for p in series])
    e = np.array([p[2] for p in series])
    if np.any(e <= 0):
        raise DataError("width uncertainties must be positive")
    beams = [de_broglie(species, vi, check_band=False) for vi in v]
    r_max = r_max or _max_bond_length(geom, model, species)

    def predict(r):
        return np.array([effective_width_model(r, geom, model, b) for b in beams])

    def chi2(r):
        try:
            return float(np.sum(((s - predict(r)) / e) ** 2))
        except NumericalError:
            return np.inf

    grid = np.linspace(0.0, r_max, 41)
    chis = np.array([chi2(r) for r in grid])
    i = int(np.argmin(chis))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(chi2, bounds=(a, b), method="bounded", options={"xatol": 1e-7})
    r_hat, c_min = (res.x, res.fun) if res.fun <= chis[i] else (grid[i], chis[i])

    def excess(r):
        return chi2(r) - c_min - 1.0

    one_sided = []
    if excess(0.0) < 0:
        lo = 0.0
        one_sided.append("lower")
    else:
        lo = brentq(excess, 0.0, r_hat, xtol=1e-7) if r_hat > 0 else 0.0
    if excess(r_max) < 0:
        hi = r_max
        one_sided.append("upper")
    else:
        hi = brentq(excess, r_hat, r_max, xtol=1e-7)

    span = max(hi - lo, 1e-3)
    prof_r = np.linspace(max(0.0, lo - span), min(r_max, hi + span), profile_points)
    profile = tuple((float(r), chi2(r) - c_min) for r in prof_r)
    resid = tuple((s - predict(r_hat)) / e)
    return SizeFit(float(r_hat), float(hi - r_hat), float(r_hat - lo), float(c_min),
                   len(series) - 1, resid, "+".join(one_sided), profile)


def combine_size_fits(fits):
    """Inverse-variance average of independent bond-length results.

    Weights use the mean of the two-sided errors; each side's error
    combines in inverse quadrature.
    """
    fits = list(fits)
    w = np.array([1.0 / (0.5 * (f.err_plus + f.err_minus)) ** 2 for f in fits])
    r = float(np.sum(w * [f.r for f in fits]) / np.sum(w))
    plus = float(np.sum([1.0 / f.err_plus ** 2 for f in fits]) ** -0.5)
    minus = float(np.sum([1.0 / f.err_minus ** 2 for f in fits]) ** -0.5)
    return SizeFit(r, plus, minus)


# --- Efimov admixture -------------------------------------------------------

@dataclass(frozen=True)
class ShiftBand:
    """Error band ``[centre - minus, centre + plus]`` (nm) for the inferred size.

    ``centre`` is the measured bond length the band belongs to.  With
    ``centre=None`` the band is placed around the pure ground-state fit,
    i.e. it bounds the shift itself.
    """

    plus: float = 0.4
    minus: float = 0.5
    centre: float | None = 1.1

    def limits(self, r_reference):
        c = r_reference if self.centre is None else self.centre
        return c - self.minus, c + self.plus

    def accepts(self, r, r_reference):
        lo, hi = self.limits(r_reference)
        return lo <= r <= hi

    def boundary(self, r, r_reference):
        lo, hi = self.limits(r_reference)
        return hi if r > hi else lo


@dataclass(frozen=True)
class EfimovLimit:
    limit: float
    curve: tuple  # (x, inferred r, shift)
    one_sided: bool = False


def mixture_widths(geom, model, velocities, r_ground, r_efimov, x, *, n_max=8,
                   method="cumulant", rel_error=0.05, _cache=None):
    """Fitted projected widths for a ground/Efimov trimer mixture with fraction ``x``."""
    out = []
    for v in velocities:
        beam = de_broglie(Species.TRIMER, v, check_band=False)
        key = (v, r_ground, r_efimov, n_max, method)
        if _cache is not None and key in _cache:
            orders, Ig, Ie = _cache[key]
        else:
            orders, Ig = _absolute(geom, model.with_bond_length(r_ground), beam, n_max, method)
            _, Ie = _absolute(geom, model.with_bond_length(r_efimov), beam, n_max, method)
            if _cache is not None:
                _cache[key] = (orders, Ig, Ie)
        # fractions by number: mix absolute intensities
        I = (1 - x) * Ig + x * Ie
        I = I / I[[n for n, _ in orders].index(0)]
        table = PeakTable.from_rows([(n, val, rel_error * val) for (n, _), val in zip(orders, I)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_pattern(table, geom, beam)
        out.append((v, fit.s_perp_eff, max(fit.s_perp_eff_err, 1e-6)))
    return out


def _absolute(geom, model, beam, n_max, method):
    if method == "exact":
        return absolute_intensities_exact(geom, model, beam, n_max)
    if method == "cumulant":
        orders = propagating_orders(geom, beam, n_max)
        K = np.asarray(wavevector_transfer(geom, beam, np.array([t for _, t in orders])))
        return orders, absolute_intensity_cumulant(K, cumulants(geom, model, beam))
    raise ValueError("method must be 'exact' or 'cumulant'")


def limit_from_curve(curve, band):
    """First band exit along an ``(x, r, shift)`` curve, linearly interpolated.

    Returns ``(limit, one_sided)``; ``one_sided`` is true when the curve
    never leaves the band and the last fraction is returned.
    """
    r0 = curve[0][1]
    if not band.accepts(r0, r0):
        raise DataError(f"pure ground-state size {r0:.4g} nm is already outside the band")
    for (x_prev, r_prev, _), (x, r, _) in zip(curve, curve[1:]):
        if not band.accepts(r, r0):
            edge = band.boundary(r, r0)
            return x_prev + (edge - r_prev) * (x - x_prev) / (r - r_prev), False
    return curve[-1][0], True


def efimov_upper_limit(geom, model, velocities, r_ground, r_efimov, *, band=ShiftBand(),
                       fractions=None, n_max=8, method="cumulant", rel_error=0.05):
    """Largest Efimov fraction whose inferred size stays inside ``band``.

    For each fraction the mixed patterns are fitted as if they came from a
    single species and the widths are turned into ``<r>``.  The first grid
    point outside the band is interpolated linearly against its
    predecessor.  Patterns come from the cumulant formula by default, the
    same model the fits assume; ``method="exact"`` uses full quadrature.
    """
    fractions = np.round(np.arange(0.0, 0.3001, 0.01), 10) if fractions is None else np.asarray(fractions)
    cache = {}
    curve = []
    for x in fractions:
        series = mixture_widths(geom, model, velocities, r_ground, r_efimov, float(x),
                                n_max=n_max, method=method, rel_error=rel_error, _cache=cache)
        r = fit_bond_length(series, geom, model, Species.TRIMER).r
        r0 = curve[0][1] if curve else r
        curve.append((float(x), float(r), float(r - r0)))
    limit, one_sided = limit_from_curve(curve, band)
    return EfimovLimit(float(limit), tuple(curve), one_sided)


# --- thermal estimate --------------------------------------------------------

def equilibrium_fraction(e_ground, e_excited, t_inf):
    """``exp(-|E_g - E_e| / k_B T)`` with energies and temperature in kelvin."""
    if not t_inf > 0:
        raise ValueError("temperature must be positive")
    if math.isinf(t_inf):
        return 1.0
    return math.exp(-abs(e_ground - e_excited) / t_inf)
