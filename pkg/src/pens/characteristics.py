"""Density along backward characteristics.

For the continuity equation rho_t + div(rho u) = 0 the density at (t, x) is

    rho(t, x) = rho0(X(0)) * exp(-integral_0^t div u(s, X(s)) ds),

where X solves dX/ds = u(s, X) with X(t) = x.  The path and the integral
are obtained together by integrating backward in time with an adaptive
Runge-Kutta 4(5) method.  Velocity snapshots are interpolated with periodic
quintic splines in space and cubic Lagrange polynomials in time.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.ndimage import map_coordinates, spline_filter

from .spectral import Grid

SPLINE_ORDER = 5


class VelocityHistory:
    """Space-time interpolant of u and div u from spectral snapshots."""

    def __init__(self, grid: Grid, times, u_hats, interp_tol: float | None = 1e-3):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size != len(u_hats):
            raise ValueError("need one snapshot per time")
        if times.size < 4:
            raise ValueError("cubic time interpolation needs at least 4 snapshots")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must increase")
        self.grid = grid
        self.times = times
        fields = []
        for uh in u_hats:
            uh = np.asarray(uh)
            phys = grid.inverse(np.concatenate([uh, grid.divergence(uh)[None]]))
            fields.append(phys)
        self._phys = np.array(fields)  # (snapshots, n + 1, N, ...)
        if interp_tol is not None:
            err = self.time_interpolation_error()
            if err > interp_tol:
                raise ValueError(
                    f"snapshot cadence too coarse: leave-one-out interpolation error {err:.2e} "
                    f"exceeds {interp_tol:.1e}"
                )
        self._coef = np.array([
            [spline_filter(f, order=SPLINE_ORDER, mode="grid-wrap") for f in snap]
            for snap in self._phys
        ])

    def time_interpolation_error(self) -> float:
        """Relative max error predicting each interior snapshot from its four neighbours."""
        P = self._phys
        if P.shape[0] < 5:
            return 0.0
        scale = max(float(np.max(np.abs(P))), 1e-300)
        worst = 0.0
        for j in range(2, P.shape[0] - 2):
            nodes = self.times[[j - 2, j - 1, j + 1, j + 2]]
            w = _lagrange_weights(nodes, self.times[j])
            pred = sum(wi * P[idx] for wi, idx in zip(w, (j - 2, j - 1, j + 1, j + 2)))
            worst = max(worst, float(np.max(np.abs(pred - P[j]))) / scale)
        return worst

    def _stencil(self, t):
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        j = min(max(j - 1, 0), self.times.size - 4)
        idx = np.arange(j, j + 4)
        return idx, _lagrange_weights(self.times[idx], t)

    def evaluate(self, t: float, X: np.ndarray) -> np.ndarray:
        """(n + 1, M) array: velocity components then div u at points X (M, n)."""
        g = self.grid
        coords = (X / g.dx).T
        idx, w = self._stencil(t)
        out = np.zeros((g.n + 1, X.shape[0]))
        for wi, j in zip(w, idx):
            for c in range(g.n + 1):
                out[c] += wi * map_coordinates(self._coef[j, c], coords, order=SPLINE_ORDER,
                                               mode="grid-wrap", prefilter=False)
        return out


def _lagrange_weights(nodes, t):
    nodes = np.asarray(nodes, dtype=float)
    w = np.ones(nodes.size)
    for i in range(nodes.size):
        for j in range(nodes.size):
            if i != j:
                w[i] *= (t - nodes[j]) / (nodes[i] - nodes[j])
    return w


def sample_periodic(grid: Grid, fh, X) -> np.ndarray:
    """Values of a spectral scalar field at arbitrary points (quintic spline)."""
    coef = spline_filter(grid.inverse(fh), order=SPLINE_ORDER, mode="grid-wrap")
    return map_coordinates(coef, (np.asarray(X) / grid.dx).T, order=SPLINE_ORDER,
                           mode="grid-wrap", prefilter=False)


def characteristics_density(grid: Grid, times, u_hats, rho0_hat, probes, t: float | None = None,
                            rtol: float = 1e-10, atol: float = 1e-12,
                            interp_tol: float | None = 1e-3) -> np.ndarray:
    """Density at ``probes`` (M, n) and time ``t`` (default: last snapshot)."""
    history = u_hats if isinstance(u_hats, VelocityHistory) else VelocityHistory(
        grid, times, u_hats, interp_tol)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != grid.n:
        raise ValueError(f"probe points must have {grid.n} coordinates")
    if np.any(probes < 0) or np.any(probes > grid.L):
        raise ValueError("probe points must lie inside the box")
    t0 = float(history.times[0])
    t = float(history.times[-1]) if t is None else float(t)
    if not t0 <= t <= history.times[-1]:
        raise ValueError(f"t={t} outside the snapshot range [{t0}, {history.times[-1]}]")
    M, n = probes.shape
    if t == t0:
        return sample_periodic(grid, rho0_hat, probes)

    def f(s, y):
        X = y[: M * n].reshape(M, n)
        vals = history.evaluate(s, X)
        return np.concatenate([vals[:n].T.ravel(), vals[n]])

    y0 = np.concatenate([probes.ravel(), np.zeros(M)])
    sol = solve_ivp(f, (t, t0), y0, method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"characteristic integration failed: {sol.message}")
    yend = sol.y[:, -1]
    X0 = np.mod(yend[: M * n].reshape(M, n), grid.L)
    # the accumulated integral runs from t down to t0, so it equals -integral of div u
    return sample_periodic(grid, rho0_hat, X0) * np.exp(yend[M * n :])


def probe_grid(grid: Grid, per_axis: int) -> tuple[np.ndarray, tuple]:
    """Uniform sub-grid of sample points (every N/per_axis-th grid point).

    Returns the (M, n) coordinates and the index slices that pick the same
    points out of a physical field.
    """
    if grid.N % per_axis:
        raise ValueError(f"{per_axis} probes per axis do not divide N={grid.N}")
    stride = grid.N // per_axis
    x = np.arange(0, grid.N, stride) * grid.dx
    mesh = np.meshgrid(*([x] * grid.n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, (slice(None, None, stride),) * grid.n
