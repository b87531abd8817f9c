"""Pseudo-spectral simulation and decay diagnostics for pressureless Euler
coupled to incompressible Navier-Stokes through drag, on a periodic box."""

from .spectral import Grid, make_grid
from .dynamics import SchemeConfig, State, Stepper, run
from .initial import DataSpec, make_initial_state
from .diagnostics import TimeSeries, fit_decay

__version__ = "0.1.0"

__all__ = [
    "Grid", "make_grid", "SchemeConfig", "State", "Stepper", "run",
    "DataSpec", "make_initial_state", "TimeSeries", "fit_decay", "__version__",
]
