"""Exception hierarchy.

Each family maps onto one CLI exit code (see :mod:`slitwave.cli`).
"""


class SlitwaveError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SlitwaveError, ValueError):
    """Invalid configuration, carrying every problem found."""

    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GeometryError(ConfigError):
    """Grating geometry outside the modelled (shadowed, transmitting) regime."""


class NumericalError(SlitwaveError, ArithmeticError):
    """Quadrature non-convergence, fit failure or model breakdown."""

    exit_code = 3


class EvanescentOrderError(NumericalError):
    """Requested diffraction order does not propagate."""


class DataError(SlitwaveError, ValueError):
    """Input data that cannot support the requested analysis."""

    exit_code = 4
