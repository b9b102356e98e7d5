"""Quadrature over one half of the slit for integrands ``F(eta) tau(eta)``.

Near a wall the van der Waals phase grows like ``A/l^3`` and the
transmission oscillates tens of thousands of times before the cutoff.
The half slit is therefore split in two zones:

* ``l > l_x`` (phase below ``p_switch``): Gauss-Legendre panels graded so
  that the phase advances by at most ``phase_step`` per panel;
* ``cutoff < l < l_x``: integration by parts, keeping the first two terms
  of the endpoint expansion ``e^{i psi} (-i F/psi' + F'/psi'^2 - F psi''/psi'^3)``.
  Successive terms shrink by ``4/(3 p_switch)``.

``F`` must be smooth on the wall scale (Fourier kernels with ``K S0 <~ 100``
and polynomial moments qualify).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError
from .transmission import atom_transmission, phase_strength


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class HalfSlitRule:
    """Discretised ``int_0^{eta_end} F(eta) tau(eta) d eta``.

    ``weights`` already contain ``tau`` at the nodes.  The endpoint arrays
    carry the asymptotic-zone contribution as coefficients of ``F`` and
    ``F'`` at ``end_eta``.
    """

    half_width: float
    eta_end: float
    nodes: np.ndarray
    weights: np.ndarray
    end_eta: np.ndarray
    end_f: np.ndarray
    end_df: np.ndarray
    tau0: complex

    def integrate(self, f, df=None):
        """Apply the rule; ``f`` and ``df`` map an eta array to values (may add leading axes)."""
        total = np.asarray(f(self.nodes)) @ self.weights
        if self.end_eta.size:
            total = total + np.asarray(f(self.end_eta)) @ self.end_f
            if df is not None:
                total = total + np.asarray(df(self.end_eta)) @ self.end_df
        return total

    def integral(self):
        """``int tau``."""
        return self.integrate(np.ones_like)

    def edge_moment(self):
        """``int (h - eta) tau``, the first moment measured from the wall."""
        h = self.half_width
        return self.integrate(lambda x: h - x, lambda x: -np.ones_like(x))

    def cosine_transform(self, K):
        """``int cos(K eta) tau`` for each wave-vector transfer in ``K``."""
        K = np.atleast_1d(np.asarray(K, dtype=float))[:, None]
        return self.integrate(lambda x: np.cos(K * x), lambda x: -K * np.sin(K * x))


def _phase_derivatives(A, h, u):
    """Total phase and its first two eta-derivatives for atoms at positions ``u``."""
    u = np.atleast_2d(u)
    dp, dm = h - u, h + u
    psi = A * np.sum(dp ** -3 + dm ** -3, axis=0)
    d1 = 3 * A * np.sum(dp ** -4 - dm ** -4, axis=0)
    d2 = 12 * A * np.sum(dp ** -5 + dm ** -5, axis=0)
    return psi, d1, d2


def build_half_rule(model, beam, shifts, *, nodes=8, phase_step=math.pi,
                    p_switch=500.0, max_panel=2.0, growth=0.25):
    """Rule for ``tau(eta) = prod_j tau_at(eta + shifts[j])`` on ``[0, h]``.

    ``shifts`` are atom displacements from the integration coordinate; the
    largest one belongs to the atom nearest the plus wall, which sets where
    the integrand is cut off.
    """
    shifts = np.asarray(shifts, dtype=float)
    h = model.half_width
    c = model.cutoff
    s_max = float(shifts.max())
    eta_end = h - c - s_max
    if eta_end <= 0:
        raise NumericalError("transmitting region of the half slit is empty")
    l_max = h - s_max  # wall distance of the leading atom at eta = 0
    A = phase_strength(model, beam)

    l_x = None
    if A == 0:
        l_lo = c
        phase_grid = np.empty(0)
    else:
        A_tot = A * shifts.size
        l_x = (A / p_switch) ** (1 / 3)
        l_lo = max(l_x, c)
        p = np.arange(A_tot / l_lo ** 3, 0.0, -phase_step)
        phase_grid = (A_tot / p) ** (1 / 3)
        if l_x <= c:
            l_x = None
    # union of partitions: each panel satisfies the phase, relative-width
    # and absolute-width limits at once
    uniform = np.linspace(l_lo, l_max, max(2, math.ceil((l_max - l_lo) / max_panel) + 1))
    geometric = l_lo * (1 + growth) ** np.arange(
        math.ceil(math.log(l_max / l_lo) / math.log1p(growth)) + 1) if l_lo > 0 else np.empty(0)
    l_edges = np.unique(np.concatenate((phase_grid, geometric, uniform)))
    l_edges = l_edges[(l_edges >= l_lo) & (l_edges <= l_max)]

    x, w = _gauss_legendre(nodes)
    a, b = l_edges[:-1, None], l_edges[1:, None]
    l_nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    l_weights = (0.5 * (b - a) * w).ravel()
    eta_nodes = l_max - l_nodes
    tau = np.ones(eta_nodes.shape, dtype=complex)
    for s in shifts:
        tau = tau * atom_transmission(model, beam, eta_nodes + s)

    if l_x is not None:
        end_eta = np.array([l_max - l_x, l_max - c])
        sign = np.array([-1.0, 1.0])
        psi, d1, d2 = _phase_derivatives(A, h, end_eta[None, :] + shifts[:, None])
        tau_end = np.exp(1j * psi)
        end_f = sign * tau_end * (-1j / d1 - d2 / d1 ** 3)
        end_df = sign * tau_end / d1 ** 2
    else:
        end_eta = end_f = end_df = np.empty(0)

    tau0 = complex(np.prod(atom_transmission(model, beam, shifts)))
    return HalfSlitRule(h, eta_end, eta_nodes, l_weights * tau, end_eta, end_f, end_df, tau0)
