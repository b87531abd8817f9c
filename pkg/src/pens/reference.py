"""Exact heat flow on the torus, algebraic decay envelopes and the comparison field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import Grid, spectral_power


@dataclass
class HeatReference:
    """Heat flow w_t = Lap w started from ``v0`` at time ``t0``."""

    grid: Grid
    v0: np.ndarray
    t0: float = 0.0

    def evolve(self, t: float) -> np.ndarray:
        return heat_evolve(self, t)

    def l2(self, t: float) -> float:
        """||w(t)||_{L^2} from the power spectrum, without forming w."""
        tau = self._elapsed(t)
        p = spectral_power(self.grid, self.v0)
        return float(np.sqrt(np.sum(p * np.exp(-2.0 * self.grid.k2 * tau))))

    def _elapsed(self, t):
        tau = t - self.t0
        if tau < 0:
            raise ValueError(f"heat flow cannot be evaluated before its start (t={t}, t0={self.t0})")
        return tau


def heat_evolve(ref: HeatReference, t: float) -> np.ndarray:
    """Per-mode exact solution exp(-|k|^2 (t - t0)) * v0_hat."""
    tau = ref._elapsed(t)
    if tau == 0:
        return ref.v0.copy()
    return ref.v0 * np.exp(-ref.grid.k2 * tau)


def difference_field(v: np.ndarray, ref: HeatReference, t: float, grid: Grid | None = None) -> np.ndarray:
    """q = v - w(t)."""
    if grid is not None and grid != ref.grid:
        raise ValueError(f"grid mismatch: {grid} vs reference {ref.grid}")
    if v.shape != ref.v0.shape:
        raise ValueError(f"field shape {v.shape} does not match reference {ref.v0.shape}")
    return v - heat_evolve(ref, t)


def heat_l2_lower(delta0: float, n: int, t: float, c_n: float = 1.0) -> float:
    """Lower envelope c_n * delta0^(3/2) * (1+t)^(-n/4)."""
    if not 0 < delta0 < 1:
        raise ValueError(f"delta0 must lie in (0, 1), got {delta0}")
    if n not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {n}")
    if not c_n > 0:
        raise ValueError(f"c_n must be positive, got {c_n}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return c_n * delta0**1.5 * (1.0 + t) ** (-n / 4.0)


def calibrate_heat_constant(grid: Grid, v0: np.ndarray, delta0: float, rule: str = "t0",
                            radius: float = 1.0) -> float:
    """Calibration constant for :func:`heat_l2_lower`.

    ``"t0"`` (default) matches the envelope to the low-frequency part of
    ||w(0)|| at t = 0: c_n^2 = sum_{0<|k|<=r} |v0_hat|^2 / delta0^3.  For
    data from ``make_divfree_lowfreq`` that is all of ||v0||.  The heat norm
    then decays faster than (1+t)^(-n/4) from the start and falls below this
    envelope for every t > 0.

    ``"chain"`` is the lattice version of the whole-space argument.  There,
    |v0_hat| >= delta0^(3/2) on the unit ball and the substitution
    xi = eta / sqrt(1+t) give

        ||w(t)||^2 >= delta0^3 (1+t)^(-n/2) * integral_{|eta|<=1} exp(-2|eta|^2) d eta,

    and the integral is replaced by its lattice sum:
    c_n^2 = sum_{0<|k|<=r} |v0_hat|^2 exp(-2|k|^2) / delta0^3.  On the torus
    the domination is not a theorem; it is checked on the samples.
    """
    if rule not in ("t0", "chain"):
        raise ValueError(f"unknown calibration rule {rule!r}")
    ball = (grid.k2 > 0) & (grid.kmag <= radius)
    p = spectral_power(grid, v0)[ball]
    if rule == "chain":
        p = p * np.exp(-2.0 * grid.k2[ball])
    total = float(np.sum(p))
    if total <= 0:
        raise ValueError("initial velocity has no energy in the low-frequency ball")
    return math.sqrt(total / delta0**3)


@dataclass(frozen=True)
class Envelope:
    """A * (1+t)^(-alpha)."""

    A: float
    alpha: float

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"envelope amplitude must be positive, got {self.A}")
        if not self.alpha >= 0:
            raise ValueError(f"envelope exponent must be non-negative, got {self.alpha}")

    def __call__(self, t):
        return envelope_eval(self, t)


def envelope_eval(e: Envelope, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("envelopes are defined for t >= 0")
    out = e.A * (1.0 + t) ** (-e.alpha)
    return float(out) if out.ndim == 0 else out


def lower_sandwich_envelope(delta0: float, n: int) -> Envelope:
    """The large-time lower bound 0.5 * delta0^(3/2) * (1+t)^(-n/4)."""
    return Envelope(0.5 * delta0**1.5, n / 4.0)


def fit_upper_envelope(t, values, alpha: float, t_max: float | None = None) -> Envelope:
    """Smallest A with A (1+t)^(-alpha) >= values on the samples with t <= t_max."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = np.ones_like(t, dtype=bool) if t_max is None else t <= t_max
    if not sel.any():
        raise ValueError("no samples available to calibrate the envelope")
    A = float(np.max(values[sel] * (1.0 + t[sel]) ** alpha))
    return Envelope(A, alpha)
