"""Initial data: positive density, small velocities, low-frequency spectral floor."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .spectral import Grid, lp_norm, sobolev_norm
from .dynamics import State

PATTERNS = ("ball", "gaussian")


@dataclass(frozen=True)
class DataSpec:
    """Parameters of the initial triple.

    ``pattern="ball"`` fills every lattice mode with 0 < |k| <= radius at the
    floor amplitude delta0^(3/2).  ``pattern="gaussian"`` is a fixed physical
    profile (a divergence-free Gaussian eddy of the given ``width``) whose
    shape does not depend on the box, used when comparing boxes of different
    size.  ``u_norm`` is the H^(s+2) norm of u0; None means delta0/3.
    """

    delta0: float = 0.05
    rho_base: float = 0.01
    rho_amplitude: float = 0.005
    radius: float = 1.0
    seed: int = 0
    s: int = 3
    pattern: str = "ball"
    width: float = 3.0
    u_norm: float | None = None

    def __post_init__(self):
        if not 0 < self.delta0 < 1:
            raise ValueError(f"data.delta0 must lie in (0, 1), got {self.delta0}")
        if not self.rho_base > 0:
            raise ValueError(f"data.rho_base must be positive, got {self.rho_base}")
        if not 0 <= self.rho_amplitude < self.rho_base:
            raise ValueError(
                f"data.rho_amplitude must lie in [0, rho_base), got {self.rho_amplitude}"
            )
        if not self.radius > 0:
            raise ValueError(f"data.radius must be positive, got {self.radius}")
        if self.s < 0 or int(self.s) != self.s:
            raise ValueError(f"data.s must be a non-negative integer, got {self.s}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"data.pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if not self.width > 0:
            raise ValueError(f"data.width must be positive, got {self.width}")
        if self.u_norm is not None and self.u_norm < 0:
            raise ValueError(f"data.u_norm must be non-negative, got {self.u_norm}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"data.seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self):
        return asdict(self)


def _rng(spec: DataSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(spec.seed), stream])


def ball_modes(grid: Grid, radius: float) -> np.ndarray:
    """Mask of stored modes with 0 < |k| <= radius."""
    return (grid.k2 > 0) & (grid.kmag <= radius * (1 + 1e-14))


def count_ball_modes(grid: Grid, radius: float) -> int:
    """Number of lattice modes (full spectrum) with 0 < |k| <= radius."""
    return int(np.sum(ball_modes(grid, radius) * grid.weight))


def _unit_perp(k: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rows of ``ref`` projected onto the plane orthogonal to the matching row of k, normalized."""
    khat = k / np.linalg.norm(k, axis=1, keepdims=True)
    e = ref - np.sum(ref * khat, axis=1, keepdims=True) * khat
    norm = np.linalg.norm(e, axis=1)
    bad = norm < 1e-8
    if bad.any():
        # reference direction (nearly) parallel to k: fall back to coordinate axes in order
        n = k.shape[1]
        for i in np.flatnonzero(bad):
            for axis in range(n):
                trial = np.zeros(n)
                trial[axis] = 1.0
                cand = trial - np.dot(trial, khat[i]) * khat[i]
                if np.linalg.norm(cand) > 0.5:
                    e[i] = cand
                    break
        norm = np.linalg.norm(e, axis=1)
    return e / norm[:, None]


def _pair_index(grid: Grid, idx: tuple) -> tuple:
    """Storage index of -m for a mode on the self-paired planes (last index 0 or N/2)."""
    out = [(-i) % grid.N for i in idx[:-1]]
    return tuple(out) + (idx[-1],)


def make_divfree_lowfreq(grid: Grid, spec: DataSpec) -> np.ndarray:
    """Divergence-free v0 with |v0_hat| = delta0^(3/2) on every mode 0 < |k| <= radius.

    Each coefficient is delta0^(3/2) * e(k) * exp(i phi(k)) with e(k) a
    seeded real unit vector orthogonal to k and a seeded phase.  Conjugate
    pairs inside the half spectrum are set consistently so the field is real.
    """
    if spec.pattern == "gaussian":
        return make_divfree_gaussian(grid, spec)
    mask = ball_modes(grid, spec.radius)
    if not mask.any():
        raise ValueError(
            f"no lattice mode with 0 < |k| <= {spec.radius} (smallest |k| is {grid.k_min:.4g})"
        )
    if np.any(mask & ~grid.dealias_mask):
        raise ValueError("low-frequency ball reaches beyond the dealiased band; increase N")
    amp = spec.delta0**1.5
    idx = np.argwhere(mask)
    kvec = np.stack([grid.k[a].reshape(-1)[idx[:, a]] for a in range(grid.n)], axis=1)
    rng = _rng(spec, 1)
    ref = rng.standard_normal((len(idx), grid.n))
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, len(idx)))
    e = _unit_perp(kvec, ref)

    v = grid.zeros(grid.n)
    done = set()
    last = grid.spectral_shape[-1] - 1
    for row, ix in enumerate(map(tuple, idx)):
        if ix in done:
            continue
        coef = amp * e[row] * phase[row]
        if ix[-1] in (0, last):
            partner = _pair_index(grid, ix)
            if partner == ix:
                coef = amp * e[row]  # self-conjugate mode must be real
            else:
                v[(slice(None),) + partner] = np.conj(coef)
                done.add(partner)
        v[(slice(None),) + ix] = coef
        done.add(ix)
    return v


def make_divfree_gaussian(grid: Grid, spec: DataSpec) -> np.ndarray:
    """Leray projection of a Gaussian jet a * e_0 * exp(-|x - c|^2 / (2 width^2)).

    a = delta0^(3/2) / width^n, so the whole-space transform of the unprojected
    jet has magnitude delta0^(3/2) at the origin.  The physical profile does
    not depend on the box once the box is much wider than ``width``.
    """
    xs = grid.coordinates()
    r2 = sum((x - 0.5 * grid.L) ** 2 for x in xs)
    g = np.exp(-r2 / (2.0 * spec.width**2))
    field = np.zeros((grid.n,) + grid.shape)
    field[0] = g
    v = grid.leray(grid.forward(field)) * grid.dealias_mask
    v[(slice(None),) + (0,) * grid.n] = 0.0
    return v * (spec.delta0**1.5 / spec.width**grid.n)


def make_density(grid: Grid, spec: DataSpec) -> np.ndarray:
    """rho0 = rho_base + rho_amplitude * b(x) with a mean-free bump |b| <= 1."""
    if spec.rho_amplitude == 0:
        rho = grid.zeros()
        rho[(0,) * grid.n] = spec.rho_base * grid.L ** (grid.n / 2)
        return rho
    if spec.pattern == "gaussian":
        xs = grid.coordinates()
        r2 = sum((x - 0.5 * grid.L) ** 2 for x in xs)
        b = np.exp(-r2 / (2.0 * spec.width**2))
        b = b - b.mean()
    else:
        rng = _rng(spec, 2)
        bh = grid.zeros()
        sel = (grid.k2 > 0) & (grid.k2 <= 2.0 * grid.k_min**2 * (1 + 1e-12))
        bh[sel] = rng.standard_normal(int(sel.sum())) + 1j * rng.standard_normal(int(sel.sum()))
        bh = grid.enforce_hermitian(bh)
        b = grid.inverse(bh)
    peak = np.max(np.abs(b))
    if peak == 0:
        raise ValueError("density bump vanished identically")
    b = b / peak
    rho = grid.forward(spec.rho_base + spec.rho_amplitude * b) * grid.dealias_mask
    # pin the mean exactly
    rho[(0,) * grid.n] = spec.rho_base * grid.L ** (grid.n / 2)
    low = grid.inverse(rho).min()
    if low <= 0:
        raise ValueError(f"density minimum {low:.3e} is not positive")
    return rho


def make_u0(grid: Grid, spec: DataSpec) -> np.ndarray:
    """Smooth low-frequency u0 (not divergence-free) with ||u0||_{H^(s+2)} = u_norm."""
    target = spec.delta0 / 3.0 if spec.u_norm is None else spec.u_norm
    u = grid.zeros(grid.n)
    if target == 0:
        return u
    if spec.pattern == "gaussian":
        xs = grid.coordinates()
        c = 0.5 * grid.L
        r2 = sum((x - c) ** 2 for x in xs)
        g = np.exp(-r2 / (2.0 * spec.width**2))
        phys = np.stack([g * (xs[(a + 1) % grid.n] - c) / spec.width for a in range(grid.n)])
        u = grid.forward(phys) * grid.dealias_mask
    else:
        rng = _rng(spec, 3)
        sel = (grid.k2 > 0) & (grid.kmag <= max(spec.radius, grid.k_min * 1.5))
        sel &= grid.dealias_mask
        for a in range(grid.n):
            u[a][sel] = rng.standard_normal(int(sel.sum())) + 1j * rng.standard_normal(int(sel.sum()))
        u = grid.enforce_hermitian(u)
    norm = sobolev_norm(grid, u, spec.s + 2)
    return u * (target / norm)


def make_initial_state(grid: Grid, spec: DataSpec) -> State:
    return State(0.0, make_density(grid, spec), make_u0(grid, spec), make_divfree_lowfreq(grid, spec))


def smallness_report(grid: Grid, rho0, u0, v0, s: int, delta0: float) -> dict:
    """Norms entering the smallness conditions of the small-data decay regime.

    ``rho_l1`` on a torus is rho_base * L^n; it only mimics the whole-space
    quantity of the same name.
    """
    h_rho = sobolev_norm(grid, rho0, s)
    h_u = sobolev_norm(grid, u0, s + 2)
    h_v = sobolev_norm(grid, v0, s + 1)
    l1_rho = lp_norm(grid, grid.inverse(rho0), 1)
    l1_v = lp_norm(grid, grid.inverse(v0), 1)
    sum1 = h_rho + h_u + h_v
    sum2 = sum1 + l1_v
    return {
        "s": s,
        "delta0": delta0,
        "h_s_rho": h_rho,
        "h_sp2_u": h_u,
        "h_sp1_v": h_v,
        "l1_rho": l1_rho,
        "l1_rho_note": "torus value (mean density times volume)",
        "l1_v": l1_v,
        "sum_decay_upper": sum1,
        "sum_decay_lower": sum2,
        "I0": delta0 + l1_rho + l1_v,
        "pass_decay_upper": bool(sum1 <= delta0),
        "pass_decay_lower": bool(sum2 <= delta0),
        "budget_rho": bool(h_rho <= delta0 / 3),
        "budget_u": bool(h_u <= delta0 / 3 * (1 + 1e-12)),
        "budget_v": bool(h_v <= delta0 / 3),
    }
