"""Angular scans and per-order peak extraction."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import DataError

SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class AngularScan:
    """Detector rate (counts/s) versus detector angle (deg)."""

    theta_deg: np.ndarray
    rate: np.ndarray
    rate_err: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        theta = np.asarray(self.theta_deg, dtype=float)
        if theta.ndim != 1 or theta.size != np.size(self.rate):
            raise DataError("scan columns must be 1-D and of equal length")
        if theta.size < 2 or not np.all(np.diff(theta) > 0):
            raise DataError("scan angles must be strictly increasing")


@dataclass(frozen=True)
class PeakTable:
    """Integrated intensity per diffraction order.

    ``status`` is ``"ok"``, ``"missing"`` (below threshold or fit failed)
    or ``"blended"`` (coincides with another species' peak).  Missing
    orders keep ``nan`` intensities; they are never zero.
    """

    n: np.ndarray
    intensity: np.ndarray
    uncertainty: np.ndarray
    status: tuple
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_rows(cls, rows, meta=None):
        rows = sorted(rows, key=lambda r: r[0])
        n = np.array([int(r[0]) for r in rows])
        if len(set(n.tolist())) != n.size:
            raise DataError("duplicate diffraction orders in peak table")
        I = np.array([float(r[1]) for r in rows])
        err = np.array([float(r[2]) for r in rows])
        status = tuple(r[3] if len(r) > 3 else "ok" for r in rows)
        return cls(n, I, err, status, dict(meta or {}))

    @property
    def present(self):
        return np.array([s == "ok" for s in self.status], dtype=bool)

    def validate(self):
        ok = self.present
        if 0 not in self.n[ok]:
            raise DataError("zeroth order missing from peak table")
        if np.any(~(self.uncertainty[ok] > 0)):
            raise DataError("peak uncertainties must be positive")
        if np.any(~np.isfinite(self.intensity[ok])):
            raise DataError("non-finite peak intensity")

    def relative(self):
        """Intensities and errors divided by the zeroth order (errors not propagated from I_0)."""
        i0 = self.intensity[list(self.n).index(0)]
        return self.intensity / i0, self.uncertainty / i0


def gaussian(x, area, centre, width, background):
    return area / (width * SQRT_2PI) * np.exp(-0.5 * ((x - centre) / width) ** 2) + background


def synthesize_scan(peak_positions_deg, areas, *, width_deg=0.004, background=0.0,
                    step_deg=0.0005, margin_deg=0.05, rate_err=None):
    """Noise-free scan of Gaussian peaks of given areas (rate * deg) on a flat background."""
    pos = np.asarray(peak_positions_deg, dtype=float)
    areas = np.asarray(areas, dtype=float)
    lo, hi = pos.min() - margin_deg, pos.max() + margin_deg
    theta = np.arange(lo, hi + 0.5 * step_deg, step_deg)
    rate = np.full(theta.shape, float(background))
    for p, a in zip(pos, areas):
        rate += gaussian(theta, a, p, width_deg, 0.0)
    err = None if rate_err is None else np.broadcast_to(np.asarray(rate_err, float), theta.shape).copy()
    return AngularScan(theta, rate, err)


def _windows(positions):
    pos = np.asarray(positions, dtype=float)
    order = np.argsort(pos)
    gaps = np.diff(pos[order])
    half = np.empty(pos.size)
    for k, idx in enumerate(order):
        left = gaps[k - 1] if k > 0 else np.inf
        right = gaps[k] if k < gaps.size else np.inf
        half[idx] = 0.5 * min(left, right)
    if not np.all(np.isfinite(half)):
        raise DataError("need at least two expected orders to set peak windows")
    return half


def extract_peaks(scan, expected, *, snr_threshold=5.0, width_guess_deg=None,
                  dwell_s=1.0, rel_error_floor=0.0, other_peaks_deg=(), meta=None):
    """Fit a Gaussian plus constant around each expected order.

    Parameters
    ----------
    scan : AngularScan
    expected : mapping or sequence of (n, theta_deg)
        Predicted Bragg angles of the species of interest.
    snr_threshold : float
        Minimum fitted area over its standard error for a detection.
    dwell_s : float
        Counting time per scan point, used for Poisson errors when the
        scan carries none.
    rel_error_floor : float
        Relative error added in quadrature to each area (systematics).
    other_peaks_deg : sequence of float
        Bragg angles of other species; orders closer than half a window
        to any of them are flagged ``"blended"``.
    """
    if isinstance(expected, dict):
        expected = expected.items()
    expected = sorted((int(n), float(t)) for n, t in expected)
    ns = [n for n, _ in expected]
    pos = np.array([t for _, t in expected])
    half = _windows(pos)
    x_all = np.asarray(scan.theta_deg, float)
    y_all = np.asarray(scan.rate, float)
    if scan.rate_err is not None:
        e_all = np.asarray(scan.rate_err, float)
    else:
        e_all = np.sqrt(np.maximum(y_all, 1.0 / dwell_s) / dwell_s)
    if x_all[0] > pos.min() or x_all[-1] < pos.max():
        raise DataError("scan does not cover all expected Bragg angles")
    other = np.asarray(other_peaks_deg, dtype=float)

    rows = []
    for n, centre, w in zip(ns, pos, half):
        if other.size and np.min(np.abs(other - centre)) < 0.5 * w:
            rows.append((n, np.nan, np.nan, "blended"))
            continue
        sel = (x_all >= centre - w) & (x_all <= centre + w)
        x, y, e = x_all[sel], y_all[sel], e_all[sel]
        if x.size < 6:
            rows.append((n, np.nan, np.nan, "missing"))
            continue
        width0 = width_guess_deg or w / 4
        bg0 = float(np.median(np.concatenate((y[:2], y[-2:]))))
        area0 = max(float(np.trapezoid(y - bg0, x)), 1e-12)
        p0 = [area0, centre, width0, bg0]
        bounds = ([0.0, centre - w / 2, (x[1] - x[0]) / 4, -np.inf],
                  [np.inf, centre + w / 2, w, np.inf])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, pcov = curve_fit(gaussian, x, y, p0=p0, sigma=e, absolute_sigma=True,
                                       bounds=bounds, max_nfev=2000)
        except (RuntimeError, ValueError):
            rows.append((n, np.nan, np.nan, "missing"))
            continue
        area = popt[0]
        err = math.sqrt(pcov[0, 0]) if np.isfinite(pcov[0, 0]) else np.inf
        if not (err > 0 and area / err >= snr_threshold):
            rows.append((n, np.nan, np.nan, "missing"))
            continue
        err = math.hypot(err, rel_error_floor * area)
        rows.append((n, float(area), float(err), "ok"))
    return PeakTable.from_rows(rows, meta)
