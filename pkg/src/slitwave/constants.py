"""Physical constants in the internal unit system.

Lengths in nm, energies in meV, speeds in km/s, masses in amu.
"""

from scipy import constants as _c

#: 4He atomic mass (amu)
M_HE_AMU = 4.002602

#: h / m_He in nm * km/s, so that lambda[nm] = H_OVER_M_HE / (N * v[km/s])
H_OVER_M_HE = _c.h / (M_HE_AMU * _c.atomic_mass) * 1e9 / 1e3

#: reduced Planck constant (meV s)
HBAR_MEV_S = _c.hbar / _c.e * 1e3

#: nm per second in one km/s
NM_PER_S_PER_KMS = 1e12

#: Boltzmann constant (meV / K)
KB_MEV_PER_K = _c.k / _c.e * 1e3

#: van der Waals coefficient of He on SiNx (meV nm^3)
C3_DEFAULT = 0.113

#: wall regularisation distance (nm)
WALL_CUTOFF_DEFAULT = 0.1

#: accepted beam speeds (km/s)
VELOCITY_BAND = (0.1, 2.0)
