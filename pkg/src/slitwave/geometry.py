"""Inclined transmission grating and its equivalent diagonal thin slit.

A bar of thickness ``t`` with inner faces wedged by ``beta`` and exit
opening ``s0`` is replaced, for incidence ``theta0 > beta``, by a thin
slit of width ``S0`` tilted by ``alpha`` against the grating plane.  That
slit throws the same geometric shadow as the thick channel; its projection
onto the plane normal to the beam is ``s_perp``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .errors import GeometryError


@dataclass(frozen=True)
class GratingGeometry:
    """Grating fabrication and mounting parameters.

    Lengths are in nm and angles in radians; use :meth:`from_degrees` for
    the degree-valued interface.

    Attributes
    ----------
    period : float
        Grating period ``d`` along y.
    thickness : float
        Bar depth ``t``.  ``t = 0`` is the thin-grating limit.
    wedge_angle : float
        Wedge angle ``beta`` of the inner bar faces.
    slit_width : float
        Opening ``s0`` at the bar exit face.
    incidence : float
        Angle of incidence ``theta0`` relative to the plate normal.
    """

    period: float
    thickness: float
    wedge_angle: float
    slit_width: float
    incidence: float

    def __post_init__(self):
        problems = []
        if not self.slit_width > 0:
            problems.append(f"slit width s0 must be > 0 (got {self.slit_width})")
        if not self.period > self.slit_width:
            problems.append(f"period d={self.period} must exceed s0={self.slit_width}")
        if not self.thickness >= 0:
            problems.append(f"bar thickness t must be >= 0 (got {self.thickness})")
        if not -math.pi / 2 < self.incidence < math.pi / 2:
            problems.append("incidence angle must lie in (-90, 90) deg")
        if not 0 <= self.wedge_angle < math.pi / 2:
            problems.append("wedge angle must lie in [0, 90) deg")
        # the shadowing condition only means something for a thick plate
        if self.thickness > 0 and not self.incidence > self.wedge_angle:
            problems.append(
                f"incidence {math.degrees(self.incidence):.4g} deg must exceed "
                f"wedge angle {math.degrees(self.wedge_angle):.4g} deg (shadowing regime)"
            )
        if problems:
            raise GeometryError(problems)

    @classmethod
    def from_degrees(cls, d_nm, t_nm, beta_deg, s0_nm, theta0_deg):
        return cls(
            period=float(d_nm),
            thickness=float(t_nm),
            wedge_angle=math.radians(beta_deg),
            slit_width=float(s0_nm),
            incidence=math.radians(theta0_deg),
        )

    def with_incidence(self, theta0_deg):
        """Same grating mounted at another angle of incidence."""
        return GratingGeometry(
            self.period, self.thickness, self.wedge_angle, self.slit_width,
            math.radians(theta0_deg),
        )

    @property
    def opening(self):
        """Horizontal extent ``s0 + t tan(beta)`` of the diagonal slit."""
        return self.slit_width + self.thickness * math.tan(self.wedge_angle)

    @property
    def S0(self):
        return diagonal_slit(self)[0]

    @property
    def alpha(self):
        return diagonal_slit(self)[1]

    @property
    def zeta(self):
        """Projection factor ``cos(theta0 + alpha)``."""
        return math.cos(self.incidence + self.alpha)

    @property
    def s_perp(self):
        return projected_slit_width(self)

    def digest(self):
        """Short stable hash identifying this geometry."""
        text = repr((self.period, self.thickness, self.wedge_angle,
                     self.slit_width, self.incidence))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def as_dict(self):
        S0, alpha = diagonal_slit(self)
        return {
            "d_nm": self.period,
            "t_nm": self.thickness,
            "beta_deg": math.degrees(self.wedge_angle),
            "s0_nm": self.slit_width,
            "theta0_deg": math.degrees(self.incidence),
            "S0_nm": S0,
            "alpha_deg": math.degrees(alpha),
            "s_perp_nm": projected_slit_width(self),
            "zeta": self.zeta,
        }


def diagonal_slit(geom):
    """Width ``S0`` and tilt ``alpha`` (rad) of the equivalent thin slit."""
    if geom.slit_width <= 0 or geom.thickness < 0:
        raise GeometryError("diagonal slit needs s0 > 0 and t >= 0")
    S0 = math.hypot(geom.opening, geom.thickness)
    alpha = math.asin(geom.thickness / S0)
    return S0, alpha


def projected_slit_width(geom):
    """Projected width ``S0 cos(theta0 + alpha)`` seen by the beam (nm).

    Raises
    ------
    GeometryError
        If the channel is fully shadowed (no projected opening).
    """
    S0, alpha = diagonal_slit(geom)
    s_perp = S0 * math.cos(geom.incidence + alpha)
    if s_perp <= 0:
        raise GeometryError(
            f"slit fully shadowed at theta0={math.degrees(geom.incidence):.4g} deg "
            f"(s_perp={s_perp:.4g} nm)"
        )
    return s_perp


def projected_slit_width_direct(geom):
    """Same projection written without the diagonal slit.

    ``(s0 + t tan(beta)) cos(theta0) - t sin(theta0)``
    """
    return geom.opening * math.cos(geom.incidence) - geom.thickness * math.sin(geom.incidence)


def solve_slit_width(s_perp, d_nm, t_nm, beta_deg, theta0_deg):
    """Exit opening ``s0`` that reproduces a measured projected width."""
    beta, theta0 = math.radians(beta_deg), math.radians(theta0_deg)
    return (s_perp + t_nm * math.sin(theta0)) / math.cos(theta0) - t_nm * math.tan(beta)
