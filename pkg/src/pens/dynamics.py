"""Coupled pressureless Euler / incompressible Navier-Stokes dynamics.

The evolved system is

    rho_t + div(rho u) = 0
    u_t + (u.grad)u + u - v = 0                      (damped transport form, rho > 0)
    v_t + P[(v.grad)v - rho (u - v)] = Laplacian v,  div v = 0

with P the Leray projector.  Time stepping is a two-stage integrating-factor
Runge-Kutta scheme (Heun in the integrating-factor variables): the diagonal
linear parts, heat decay exp(-|k|^2 dt) on v and damping exp(-dt) on u, are
applied exactly and everything else is explicit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import Grid

log = logging.getLogger(__name__)

HOOKS = frozenset({"no-nonlinear", "no-drag"})


class SimulationAbort(RuntimeError):
    """A run stopped before reaching its end time."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        self.cause = message
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"{message}{where}")


class VacuumError(SimulationAbort):
    pass


class NonFiniteError(SimulationAbort):
    pass


class StabilityError(SimulationAbort):
    pass


@dataclass
class State:
    """Spectral density, Euler-phase velocity and fluid velocity at time ``t``."""

    t: float
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.rho.copy(), self.u.copy(), self.v.copy())


@dataclass
class Tendency:
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    dealias: bool = True
    hooks: frozenset = field(default_factory=frozenset)
    scheme: str = "ifrk2"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"time step must be positive and finite, got dt={self.dt}")
        hooks = frozenset(self.hooks)
        unknown = hooks - HOOKS
        if unknown:
            raise ValueError(f"unknown hooks {sorted(unknown)}; known: {sorted(HOOKS)}")
        object.__setattr__(self, "hooks", hooks)
        if self.scheme != "ifrk2":
            raise ValueError(f"unknown scheme {self.scheme!r}")


def _cross_into(a, w, out):
    """out = a x w for physical vectors; ``w`` has one component in 2-D."""
    if a.shape[0] == 2:
        np.multiply(a[1], w[0], out=out[0])
        np.multiply(a[0], w[0], out=out[1])
        np.negative(out[1], out=out[1])
        return out
    for i, (b, c) in enumerate(((1, 2), (2, 0), (0, 1))):
        np.multiply(a[b], w[c], out=out[i])
        out[i] -= a[c] * w[b]
    return out


class Stepper:
    """Right-hand side assembly and time stepping on one grid."""

    def __init__(self, grid: Grid, cfg: SchemeConfig):
        self.grid = grid
        self.cfg = cfg
        self.nonlinear = "no-nonlinear" not in cfg.hooks
        self.drag = "no-drag" not in cfg.hooks
        # degenerate rho is tolerated only when it cannot feed back into the flow
        self.check_positivity = self.nonlinear
        self.damping = 1.0 if self.drag else 0.0
        self.exp_u = math.exp(-self.damping * cfg.dt)
        self.exp_v = np.exp(-grid.k2 * cfg.dt)
        if cfg.dealias:
            self.mask = grid.dealias_mask
        else:
            self.mask = ~grid.nyquist
        self._ik = [1j * ki for ki in grid.k]
        n = grid.n
        nc = 1 if n == 2 else 3
        self._spec_buf = grid.zeros(1 + 2 * n + 2 * nc)
        nprod = (4 if self.drag else 3) * n + 1
        self._prod_buf = np.empty((nprod,) + grid.shape)

    # -- right-hand side ------------------------------------------------------
    def _nonlinear(self, rho, u, v, keep_mean=False):
        """Explicit part of the tendencies plus (min rho, max speed) of the input."""
        g = self.grid
        n = g.n
        if not self.nonlinear:
            Nrho = np.zeros_like(rho)
            Nu = v * self.mask if self.drag else np.zeros_like(u)
            Nv = np.zeros_like(v)
            return (Nrho, Nu, Nv), None

        nc = 1 if n == 2 else 3
        spec = self._spec_buf
        spec[0] = rho
        spec[1 : 1 + n] = u
        spec[1 + n : 1 + 2 * n] = v
        self._curl_into(u, spec[1 + 2 * n : 1 + 2 * n + nc])
        self._curl_into(v, spec[1 + 2 * n + nc :])
        phys = g._inverse(spec)
        R = phys[0]
        U = phys[1 : 1 + n]
        V = phys[1 + n : 1 + 2 * n]
        WU = phys[1 + 2 * n : 1 + 2 * n + nc]
        WV = phys[1 + 2 * n + nc :]

        # product layout: rho U | rho V (drag only) | |U|^2/2 | U x curl u | V x curl v
        prod = self._prod_buf
        np.multiply(R, U, out=prod[:n])
        i = n
        if self.drag:
            np.multiply(R, V, out=prod[i : i + n])
            i += n
        ke = prod[i]
        np.einsum("i...,i...->...", U, U, out=ke)
        vv = np.einsum("i...,i...->...", V, V)
        min_rho = float(R.min())
        speed2 = max(float(ke.max()), float(vv.max()))
        ke *= 0.5
        _cross_into(U, WU, prod[i + 1 : i + 1 + n])
        _cross_into(V, WV, prod[i + 1 + n :])
        F = g._forward(prod)

        rhoU = F[:n]
        if self.drag:
            rhoV = F[n : 2 * n]
        keh = F[i]
        Nu = F[i + 1 : i + 1 + n]
        forcing = F[i + 1 + n :]

        ik = self._ik
        Nrho = ik[0] * rhoU[0]
        for a in range(1, n):
            Nrho += ik[a] * rhoU[a]
        np.negative(Nrho, out=Nrho)
        for a in range(n):
            Nu[a] -= ik[a] * keh
        if self.drag:
            Nu += v
            forcing += rhoU
            forcing -= rhoV
        self._leray_inplace(forcing)
        if not keep_mean:
            forcing[(slice(None),) + (0,) * n] = 0.0
        m = self.mask
        Nrho *= m
        Nu *= m
        forcing *= m
        return (Nrho, Nu, forcing), (min_rho, math.sqrt(speed2))

    def _curl_into(self, vh, out):
        ik = self._ik
        if self.grid.n == 2:
            np.multiply(ik[0], vh[1], out=out[0])
            out[0] -= ik[1] * vh[0]
            return
        for a, (b, c) in enumerate(((1, 2), (2, 0), (0, 1))):
            np.multiply(ik[b], vh[c], out=out[a])
            out[a] -= ik[c] * vh[b]

    def _leray_inplace(self, vh):
        k = self.grid.k
        kdotv = k[0] * vh[0]
        for a in range(1, self.grid.n):
            kdotv += k[a] * vh[a]
        kdotv *= self.grid.inv_k2
        for a in range(self.grid.n):
            vh[a] -= k[a] * kdotv

    def rhs(self, state: State) -> Tendency:
        """Full tendencies of the evolved system at ``state``.

        The fluid tendency keeps its zero mode (the mean drag forcing); the
        stepper discards it so that the mean of v stays at zero.
        """
        _check_finite(state)
        (Nr, Nu, Nv), info = self._nonlinear(state.rho, state.u, state.v, keep_mean=True)
        if info is not None and self.check_positivity and info[0] <= 0:
            raise VacuumError(f"vacuum: min rho = {info[0]:.3e}", state.t)
        out = Tendency(Nr, Nu - self.damping * state.u, Nv - self.grid.k2 * state.v)
        if not (np.isfinite(out.rho).all() and np.isfinite(out.u).all() and np.isfinite(out.v).all()):
            raise NonFiniteError("non-finite tendency", state.t)
        return out

    def stability_bound(self, state: State) -> float:
        """Advective CFL limit 0.5 dx / max(|u|_inf, |v|_inf, 1)."""
        g = self.grid
        U = g._inverse(state.u)
        V = g._inverse(state.v)
        speed = math.sqrt(max(np.max(np.sum(U * U, 0)), np.max(np.sum(V * V, 0))))
        return 0.5 * g.dx / max(speed, 1.0)

    # -- stepping -------------------------------------------------------------
    def _project(self, v):
        self._leray_inplace(v)
        v[(slice(None),) + (0,) * self.grid.n] = 0.0
        return v

    def step(self, state: State) -> State:
        g, dt = self.grid, self.cfg.dt
        (Nr0, Nu0, Nv0), info = self._nonlinear(state.rho, state.u, state.v)
        if info is not None:
            min_rho, speed = info
            if self.check_positivity and min_rho <= 0:
                raise VacuumError(f"vacuum: min rho = {min_rho:.3e}", state.t)
            bound = 0.5 * g.dx / max(speed, 1.0)
            if dt > bound * (1 + 1e-12):
                raise StabilityError(f"dt={dt} exceeds advective bound {bound:.4g}", state.t)

        rho_a = state.rho + dt * Nr0
        u_a = self.exp_u * (state.u + dt * Nu0)
        v_a = self._project(self.exp_v * (state.v + dt * Nv0))
        (Nr1, Nu1, Nv1), _ = self._nonlinear(rho_a, u_a, v_a)

        h = 0.5 * dt
        rho = state.rho + h * (Nr0 + Nr1)
        u = self.exp_u * (state.u + h * Nu0) + h * Nu1
        v = self._project(self.exp_v * (state.v + h * Nv0) + h * Nv1)
        new = State(state.t + dt, rho, u, v)

        if self.nonlinear:
            R = g._inverse(rho)
            if not np.isfinite(R).all():
                raise NonFiniteError("non-finite density", new.t)
            if self.check_positivity and R.min() <= 0:
                raise VacuumError(f"vacuum: min rho = {R.min():.3e}", new.t)
        _check_finite(new)
        return new


def _check_finite(state: State):
    for name in ("rho", "u", "v"):
        # a single reduction propagates any nan/inf
        if not np.isfinite(np.sum(getattr(state, name))):
            raise NonFiniteError(f"non-finite {name}", state.t)


def rhs(grid: Grid, state: State, cfg: SchemeConfig | None = None) -> Tendency:
    return Stepper(grid, cfg or SchemeConfig(dt=1.0)).rhs(state)


def step(grid: Grid, state: State, cfg: SchemeConfig) -> State:
    return Stepper(grid, cfg).step(state)


def recover_pressure(grid: Grid, state: State) -> np.ndarray:
    """Zero-mean pressure with -Lap P = div[(v.grad)v - rho (u - v)].

    Its gradient is exactly the part of the fluid forcing removed by the
    Leray projection.
    """
    g = grid
    n = g.n
    mask = g.dealias_mask
    grads = np.stack([g.derivative(state.v[b], a) for a in range(n) for b in range(n)])
    phys = g._inverse(np.concatenate([state.rho[None], state.u, state.v, grads]))
    R, U, V = phys[0], phys[1 : 1 + n], phys[1 + n : 1 + 2 * n]
    dV = phys[1 + 2 * n :].reshape((n, n) + g.shape)  # dV[a, b] = d_a v_b
    adv = np.stack([sum(V[a] * dV[a, b] for a in range(n)) for b in range(n)])
    F = g._forward(adv - R * (U - V)) * mask
    P = g.divergence(F) * g.inv_k2
    P[(0,) * n] = 0.0
    return P


def validate_state(grid: Grid, state: State, positivity: bool = True, tol: float = 1e-12):
    """Raise ValueError if ``state`` violates the State invariants."""
    for name in ("rho", "u", "v"):
        arr = getattr(state, name)
        expect = grid.spectral_shape if name == "rho" else (grid.n,) + grid.spectral_shape
        if arr.shape != expect:
            raise ValueError(f"{name} has shape {arr.shape}, expected {expect}")
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} has non-finite coefficients")
    div = np.abs(grid.divergence(state.v))
    scale = grid.kmag * np.sqrt(np.sum(np.abs(state.v) ** 2, axis=0))
    # mode-wise relative test plus a roundoff floor for modes far below the field scale
    floor = 1e-14 * float(scale.max()) + 1e-300
    if np.any(div > tol * scale + floor):
        raise ValueError("v is not divergence-free")
    if positivity:
        m = float(grid.inverse(state.rho).min())
        if m <= 0:
            raise ValueError(f"density not positive: min rho = {m:.3e}")


def run(grid: Grid, initial: State, cfg: SchemeConfig, t_end: float, sample_interval: float,
        sinks=(), sobolev_order: int = 3, heat_ref=None):
    """Integrate to ``t_end`` recording diagnostics every ``sample_interval``.

    ``sample_interval`` must be a whole number of steps and ``t_end - t0`` a
    whole number of sample intervals.  Each sink is called as
    ``sink(state, record)`` after every sample, including the initial one.
    """
    from .diagnostics import TimeSeries, compute_record
    from .reference import HeatReference

    if not t_end > initial.t:
        raise ValueError(f"t_end={t_end} must exceed the initial time {initial.t}")
    if not sample_interval > 0:
        raise ValueError(f"sample_interval must be positive, got {sample_interval}")
    steps_per_sample = _whole(sample_interval / cfg.dt, "sample_interval / dt")
    n_samples = _whole((t_end - initial.t) / sample_interval, "(t_end - t0) / sample_interval")

    stepper = Stepper(grid, cfg)
    validate_state(grid, initial, positivity=stepper.check_positivity)
    if heat_ref is None:
        heat_ref = HeatReference(grid, initial.v.copy(), t0=initial.t)
    series = TimeSeries(grid.n, sobolev_order)

    def emit(state):
        rec = compute_record(grid, state, heat_ref, sobolev_order)
        series.append(rec)
        for sink in sinks:
            sink(state, rec)

    state = initial
    emit(state)
    t0 = initial.t
    for i in range(n_samples):
        for j in range(steps_per_sample):
            state = stepper.step(state)
            state.t = t0 + (i * steps_per_sample + j + 1) * cfg.dt
        if not series.records[-1].min_rho > 0 and stepper.check_positivity:
            raise VacuumError("vacuum", state.t)
        emit(state)
        log.debug("t=%.4g E=%.6e", state.t, series.records[-1].E)
    return series


def _whole(x: float, what: str) -> int:
    k = int(round(x))
    if k < 1 or abs(x - k) > 1e-9 * max(1.0, abs(x)):
        raise ValueError(f"{what} = {x!r} is not a positive whole number")
    return k


def with_time(state: State, t: float) -> State:
    return replace(state, t=t)
