"""Solitary waves of u_t + u u_x + L u_x = 0 with L = (1 - d^2/dx^2)^{-1}."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BarrierBreachError,
    BlowUpError,
    ConfigurationError,
    DataError,
    DomainError,
    FWError,
)
from .spectral_core import Field, PeriodicGrid, SobolevIndex, make_grid  # noqa: E402
from .traveling_wave import WaveProfile, fit_decay, petviashvili_solve  # noqa: E402
from .variational_solver import MinimizeConfig, PenaltySpec, minimize_periodic  # noqa: E402
