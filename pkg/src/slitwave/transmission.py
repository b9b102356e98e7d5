"""Beam kinematics and the complex transmission function of the diagonal slit.

Every atom crossing the slit picks up an eikonal phase from the attractive
``-C3/l^3`` potential of both walls.  Along the slit coordinate ``eta``
(``|eta| < S0/2``) the single-atom factor is::

    tau_at(eta) = exp(i A [(S0/2 - eta)^-3 + (S0/2 + eta)^-3]),
    A = C3 * L_eff / (hbar v)

and it vanishes within ``wall_cutoff`` of either wall.  Clusters multiply
one factor per atom, displaced by fixed fractions of ``<r>/zeta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import ConfigError, NumericalError


class Species(enum.Enum):
    """He cluster species; the value is the number of atoms."""

    ATOM = 1
    DIMER = 2
    TRIMER = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ConfigError(f"unknown species {value!r} (atom, dimer, trimer)") from None

    @property
    def size(self):
        return self.value

    @property
    def atom_offsets(self):
        """Positions of the atoms behind the leading one, in units of ``<r>/zeta``."""
        return _OFFSETS[self]

    @property
    def width_fraction(self):
        """Slit-width deficit in units of ``<r>``: 0, 1/2, 3/4."""
        return _WIDTH_FRACTION[self]


_OFFSETS = {Species.ATOM: (0.0,), Species.DIMER: (0.0, 0.5), Species.TRIMER: (0.0, 0.5, 0.625)}
_WIDTH_FRACTION = {Species.ATOM: 0.0, Species.DIMER: 0.5, Species.TRIMER: 0.75}


@dataclass(frozen=True)
class BeamState:
    """Monochromatic cluster beam.

    ``velocity`` in km/s, ``wavelength`` in nm, ``wavenumber`` in 1/nm.
    """

    species: Species
    velocity: float
    wavelength: float
    wavenumber: float

    @property
    def wavelength_angstrom(self):
        return 10.0 * self.wavelength


def de_broglie(species, velocity, *, check_band=True):
    """Beam state for ``species`` moving at ``velocity`` km/s.

    ``lambda = h / (N m_He v)``.
    """
    species = Species.parse(species)
    lo, hi = constants.VELOCITY_BAND
    if not velocity > 0 or (check_band and not lo <= velocity <= hi):
        raise ConfigError(f"velocity {velocity} km/s outside validated band [{lo}, {hi}]")
    lam = constants.H_OVER_M_HE / (species.size * velocity)
    return BeamState(species, float(velocity), lam, 2 * math.pi / lam)


def beam_from_wavelength(species, wavelength_nm, *, check_band=True):
    """Beam state for a given de Broglie wavelength (nm)."""
    species = Species.parse(species)
    if not wavelength_nm > 0:
        raise ConfigError("wavelength must be positive")
    v = constants.H_OVER_M_HE / (species.size * wavelength_nm)
    return de_broglie(species, v, check_band=check_band)


PATH_MODELS = ("incidence", "diagonal")


@dataclass(frozen=True)
class TransmissionModel:
    """Parameters of the transmission function across the diagonal slit.

    Attributes
    ----------
    c3 : float
        van der Waals coefficient (meV nm^3).
    path_length : float
        Interaction path ``L_eff`` through the channel (nm).
    bond_length : float
        Mean pair distance ``<r>`` of the cluster (nm); 0 for atoms.
    zeta : float
        Projection factor ``cos(theta0 + alpha)``.
    wall_cutoff : float
        Distance from either wall inside which ``tau = 0`` (nm).  Only
        applied when ``c3 > 0``; it regularises the diverging phase.
    slit_length : float
        Width ``S0`` of the diagonal slit (nm).
    """

    c3: float
    path_length: float
    bond_length: float
    zeta: float
    wall_cutoff: float
    slit_length: float

    def __post_init__(self):
        problems = []
        if self.c3 < 0:
            problems.append("c3 must be >= 0")
        if not self.path_length > 0:
            problems.append("path length must be > 0")
        if self.bond_length < 0:
            problems.append("bond length must be >= 0")
        if not 0 < self.zeta <= 1:
            problems.append("zeta must lie in (0, 1]")
        if self.wall_cutoff < 0 or self.wall_cutoff >= self.slit_length / 2:
            problems.append("wall cutoff must lie in [0, S0/2)")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def for_geometry(cls, geom, *, c3=constants.C3_DEFAULT, bond_length=0.0,
                     wall_cutoff=constants.WALL_CUTOFF_DEFAULT, path_model="diagonal"):
        """Model for ``geom`` with ``L_eff = t / cos(theta0)`` or ``t / cos(theta0 + alpha)``."""
        if path_model == "incidence":
            path = geom.thickness / math.cos(geom.incidence)
        elif path_model == "diagonal":
            path = geom.thickness / geom.zeta
        else:
            raise ConfigError(f"path_model must be one of {PATH_MODELS}")
        # a thin plate still has an atomic-scale interaction path
        path = max(path, 1e-9)
        return cls(float(c3), path, float(bond_length), geom.zeta, float(wall_cutoff), geom.S0)

    def with_bond_length(self, r):
        return TransmissionModel(self.c3, self.path_length, float(r), self.zeta,
                                 self.wall_cutoff, self.slit_length)

    def with_c3(self, c3):
        return TransmissionModel(float(c3), self.path_length, self.bond_length, self.zeta,
                                 self.wall_cutoff, self.slit_length)

    @property
    def half_width(self):
        return 0.5 * self.slit_length

    @property
    def cutoff(self):
        """Cutoff actually in force (zero for a free slit)."""
        return self.wall_cutoff if self.c3 > 0 else 0.0


def phase_strength(model, beam):
    """Eikonal strength ``A = C3 L_eff / (hbar v)`` in nm^3."""
    return model.c3 * model.path_length / (
        constants.HBAR_MEV_S * beam.velocity * constants.NM_PER_S_PER_KMS)


def atom_phase(model, beam, eta):
    """Two-wall eikonal phase at ``eta`` (inside the open slit only)."""
    h = model.half_width
    eta = np.asarray(eta, dtype=float)
    A = phase_strength(model, beam)
    with np.errstate(divide="ignore", invalid="ignore"):
        return A * ((h - eta) ** -3 + (h + eta) ** -3)


def atom_transmission(model, beam, eta):
    """Single-atom transmission ``tau_at(eta)``; zero on the bars and in the cutoff strips."""
    eta = np.asarray(eta, dtype=float)
    edge = model.half_width - model.cutoff
    inside = np.abs(eta) < edge
    if model.c3 == 0:
        return inside.astype(complex)
    phase = np.where(inside, atom_phase(model, beam, np.where(inside, eta, 0.0)), 0.0)
    return np.where(inside, np.exp(1j * phase), 0.0)


def _scaled_offsets(model, beam):
    ratio = model.bond_length / model.zeta
    return tuple(f * ratio for f in beam.species.atom_offsets)


def cluster_transmission(model, beam, eta, half):
    """Product of atom factors for the cluster, half-slit by half-slit.

    In the ``plus`` half the trailing atoms sit at ``eta - o``, in the
    ``minus`` half at ``eta + o``, with ``o`` the scaled atom offsets.
    The result is zero where any factor is blocked.
    """
    if half not in ("plus", "minus"):
        raise ValueError("half must be 'plus' or 'minus'")
    sign = -1.0 if half == "plus" else 1.0
    eta = np.asarray(eta, dtype=float)
    out = np.ones(eta.shape, dtype=complex)
    for o in _scaled_offsets(model, beam):
        out = out * atom_transmission(model, beam, eta + sign * o)
    return out


def blocking_shift(model, beam):
    """Displacement (nm, along eta) from cluster centre to its leading atom.

    Half of the species' slit-width deficit on each side, so that a
    hard-wall cluster loses ``width_fraction * <r> / zeta`` of slit length.
    """
    return 0.5 * beam.species.width_fraction * model.bond_length / model.zeta


def atom_shifts(model, beam):
    """Positions of all atoms relative to the cluster centre on the plus side."""
    b = blocking_shift(model, beam)
    return tuple(b - o for o in _scaled_offsets(model, beam))


def check_cluster_fits(model, beam):
    """Raise if the cluster is too large for the slit to transmit it."""
    h = model.half_width
    shifts = atom_shifts(model, beam)
    if max(shifts) >= h - model.cutoff or min(shifts) <= -(h - model.cutoff):
        raise NumericalError(
            f"cluster with <r>={model.bond_length} nm does not fit the slit (S0={model.slit_length:.4g} nm)"
        )


def slit_transmission(model, beam, eta):
    """Transmission of the cluster centre-of-mass coordinate across the whole slit.

    For ``eta >= 0`` the leading atom sits at ``eta + b`` (``b`` from
    :func:`blocking_shift`) and the others trail it towards the centre, as
    in :func:`cluster_transmission`; the minus half is the mirror image.
    For atoms this is :func:`atom_transmission`.
    """
    eta = np.abs(np.asarray(eta, dtype=float))
    out = np.ones(eta.shape, dtype=complex)
    for s in atom_shifts(model, beam):
        out = out * atom_transmission(model, beam, eta + s)
    return out
