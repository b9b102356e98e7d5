"""Matter-wave diffraction of He clusters from thick, wedged transmission gratings."""

__version__ = "0.1.0"

from .engine import (  # noqa: E402
    contrast,
    cumulants,
    intensities_cumulant,
    intensities_exact,
)
from .geometry import GratingGeometry, projected_slit_width  # noqa: E402
from .transmission import Species, TransmissionModel, de_broglie  # noqa: E402

__all__ = [
    "GratingGeometry",
    "Species",
    "TransmissionModel",
    "contrast",
    "cumulants",
    "de_broglie",
    "intensities_cumulant",
    "intensities_exact",
    "projected_slit_width",
]
