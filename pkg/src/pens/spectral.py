"""Periodic-box spectral calculus.

Fields live on the torus [0, L)^n sampled on N^n points.  Spectral
coefficients use the real-to-complex layout (last axis holds only
m >= 0) and the quadrature-consistent normalization

    f_hat(m) = L^(-n/2) * integral f(x) exp(-i k.x) dx
             ~ (L^(n/2) / N^n) * DFT(f)(m),

under which the discrete Plancherel identity is exact:

    (L/N)^n * sum_x |f(x)|^2 == sum_m |f_hat(m)|^2.

Vector fields carry their components on a leading axis of length n.
"""

from __future__ import annotations

import os
from functools import cached_property

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import pyfftw
    import pyfftw.interfaces.numpy_fft as _fft

    pyfftw.interfaces.cache.enable()
    pyfftw.interfaces.cache.set_keepalive_time(60.0)
    # ESTIMATE plans are chosen without timing, so results are bitwise reproducible.
    _FFT_KW = {
        "planner_effort": "FFTW_ESTIMATE",
        "threads": int(os.environ.get("PENS_FFT_THREADS", "1")),
    }
    FFT_BACKEND = "pyfftw"
except ImportError:  # pragma: no cover
    import scipy.fft as _fft

    _FFT_KW = {"workers": int(os.environ.get("PENS_FFT_THREADS", "1"))}
    FFT_BACKEND = "scipy"


class Grid:
    """Geometry of an n-dimensional periodic box with N modes per axis.

    Parameters
    ----------
    n : int
        Spatial dimension, 2 or 3.
    N : int
        Samples (and modes) per axis; even, at least 8.
    L : float
        Box side length.
    """

    def __init__(self, n: int, N: int, L: float):
        if n not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got n={n}")
        if int(N) != N or N % 2 != 0:
            raise ValueError(f"modes per axis must be an even integer, got N={N}")
        if N < 8:
            raise ValueError(f"modes per axis must be at least 8, got N={N}")
        if not L > 0 or not np.isfinite(L):
            raise ValueError(f"box length must be positive, got L={L}")
        self.n = int(n)
        self.N = int(N)
        self.L = float(L)

        full = np.fft.fftfreq(self.N, 1.0 / self.N)
        half = np.fft.rfftfreq(self.N, 1.0 / self.N)
        self.m = []
        for axis in range(self.n):
            ints = half if axis == self.n - 1 else full
            shape = [1] * self.n
            shape[axis] = ints.size
            self.m.append(ints.reshape(shape))
        scale = 2.0 * np.pi / self.L
        self.k = [scale * mi for mi in self.m]

    # -- shapes -------------------------------------------------------------
    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def spectral_shape(self):
        return (self.N,) * (self.n - 1) + (self.N // 2 + 1,)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        """Quadrature weight (L/N)^n."""
        return self.dx**self.n

    @property
    def volume(self) -> float:
        return self.L**self.n

    @property
    def k_min(self) -> float:
        """Smallest nonzero wavenumber magnitude."""
        return 2.0 * np.pi / self.L

    @property
    def observation_window(self) -> float:
        """Latest time at which whole-space algebraic decay is still visible."""
        return 0.3 * (self.L / (2.0 * np.pi)) ** 2

    def __repr__(self):
        return f"Grid(n={self.n}, N={self.N}, L={self.L!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and (self.n, self.N, self.L) == (other.n, other.N, other.L)
        )

    def __hash__(self):
        return hash((self.n, self.N, self.L))

    # -- cached mode arrays -------------------------------------------------
    @cached_property
    def k2(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        for ki in self.k:
            out = out + ki**2
        return out

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def inv_k2(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    @cached_property
    def weight(self) -> np.ndarray:
        """Multiplicity of each stored mode in the full Hermitian spectrum."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w.reshape((1,) * (self.n - 1) + (-1,))

    @cached_property
    def nyquist(self) -> np.ndarray:
        mask = np.zeros(self.spectral_shape, dtype=bool)
        for mi in self.m:
            mask = mask | (np.abs(mi) == self.N // 2)
        return mask

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.spectral_shape, dtype=bool)
        for mi in self.m:
            keep = keep & (3 * np.abs(mi) <= self.N)
        return keep

    @cached_property
    def dealias_limit(self) -> float:
        """Largest wavenumber component retained by the 2/3 rule."""
        return (self.N // 3) * self.k_min

    def coordinates(self):
        """Physical sample coordinates, one broadcastable array per axis."""
        x = np.arange(self.N) * self.dx
        out = []
        for axis in range(self.n):
            shape = [1] * self.n
            shape[axis] = self.N
            out.append(x.reshape(shape))
        return out

    def zeros(self, components: int | None = None) -> np.ndarray:
        shape = self.spectral_shape if components is None else (components,) + self.spectral_shape
        return np.zeros(shape, dtype=complex)

    # -- transforms ---------------------------------------------------------
    @property
    def _axes(self):
        return tuple(range(-self.n, 0))

    def forward(self, f) -> np.ndarray:
        """Physical samples -> spectral coefficients (scalar or stacked)."""
        f = np.asarray(f)
        if f.shape[-self.n:] != self.shape or f.ndim not in (self.n, self.n + 1):
            raise ValueError(f"sample array shape {f.shape} does not match grid {self.shape}")
        if np.iscomplexobj(f):
            raise ValueError("forward transform expects real samples")
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite samples")
        return self._forward(f)

    def inverse(self, fh) -> np.ndarray:
        """Spectral coefficients -> real physical samples."""
        fh = np.asarray(fh)
        if fh.shape[-self.n:] != self.spectral_shape or fh.ndim not in (self.n, self.n + 1):
            raise ValueError(
                f"coefficient array shape {fh.shape} does not match grid {self.spectral_shape}"
            )
        return self._inverse(fh)

    def _forward(self, f):
        out = _fft.rfftn(np.ascontiguousarray(f, dtype=float), axes=self._axes, **_FFT_KW)
        out *= self.L ** (self.n / 2) / self.N**self.n
        return out

    def _inverse(self, fh):
        out = _fft.irfftn(np.ascontiguousarray(fh, dtype=complex), s=self.shape,
                          axes=self._axes, **_FFT_KW)
        out *= self.N**self.n / self.L ** (self.n / 2)
        return out

    # -- calculus -----------------------------------------------------------
    def derivative(self, fh, axis: int) -> np.ndarray:
        """Spectral partial derivative along ``axis``."""
        if not 0 <= axis < self.n:
            raise ValueError(f"axis {axis} out of range for dimension {self.n}")
        return 1j * self.k[axis] * fh

    def gradient(self, fh) -> np.ndarray:
        return np.stack([self.derivative(fh, a) for a in range(self.n)])

    def divergence(self, vh) -> np.ndarray:
        out = 1j * self.k[0] * vh[0]
        for a in range(1, self.n):
            out = out + 1j * self.k[a] * vh[a]
        return out

    def curl(self, vh) -> np.ndarray:
        """Curl; a scalar field (leading axis of length 1) when n == 2."""
        ik = [1j * ki for ki in self.k]
        if self.n == 2:
            return (ik[0] * vh[1] - ik[1] * vh[0])[None]
        return np.stack([
            ik[1] * vh[2] - ik[2] * vh[1],
            ik[2] * vh[0] - ik[0] * vh[2],
            ik[0] * vh[1] - ik[1] * vh[0],
        ])

    def leray(self, vh) -> np.ndarray:
        """Mode-wise projection I - k k^T / |k|^2; the zero mode passes through."""
        kdotv = self.k[0] * vh[0]
        for a in range(1, self.n):
            kdotv = kdotv + self.k[a] * vh[a]
        kdotv *= self.inv_k2
        return np.stack([vh[a] - self.k[a] * kdotv for a in range(self.n)])

    def dealias(self, fh) -> np.ndarray:
        return fh * self.dealias_mask

    # -- symmetry -----------------------------------------------------------
    def negate_modes(self, fh) -> np.ndarray:
        """Array whose entry at m holds the input coefficient at -m (last axis m=0 plane only)."""
        axes = tuple(range(fh.ndim - self.n, fh.ndim - 1))
        if not axes:
            return fh.copy()
        return np.roll(np.flip(fh, axis=axes), 1, axis=axes)

    def hermitian_defect(self, fh) -> float:
        """Largest |f(m) - conj f(-m)| over the self-paired planes of the half spectrum."""
        fh = np.asarray(fh)
        defect = 0.0
        for idx in (0, self.N // 2):
            plane = fh[..., idx : idx + 1]
            mirrored = self.negate_modes(plane)
            defect = max(defect, float(np.max(np.abs(plane - np.conj(mirrored)), initial=0.0)))
        return defect

    def full_spectrum(self, fh) -> np.ndarray:
        """Expand half-spectrum coefficients to every lattice mode (fftn layout)."""
        fh = np.asarray(fh)
        lead = fh.shape[: fh.ndim - self.n]
        out = np.zeros(lead + self.shape, dtype=complex)
        h = self.N // 2 + 1
        out[..., :h] = fh
        # entry m_last = N - j on the negative side mirrors m_last = j
        mirrored = np.conj(self.negate_modes(fh[..., 1 : self.N // 2]))
        out[..., h:] = mirrored[..., ::-1]
        return out

    def enforce_hermitian(self, fh) -> np.ndarray:
        """Symmetrize the self-paired planes so the physical field is real."""
        out = fh.copy()
        for idx in (0, self.N // 2):
            plane = out[..., idx : idx + 1]
            out[..., idx : idx + 1] = 0.5 * (plane + np.conj(self.negate_modes(plane)))
        return out


def make_grid(n: int, N: int, L: float) -> Grid:
    return Grid(n, N, L)


# -- norms ------------------------------------------------------------------

def spectral_power(grid: Grid, fh) -> np.ndarray:
    """Per-mode |f_hat|^2 times multiplicity, summed over vector components."""
    fh = np.asarray(fh)
    p = fh.real**2 + fh.imag**2
    if fh.ndim == grid.n + 1:
        p = p.sum(axis=0)
    return p * grid.weight


def gradient_seminorm(grid: Grid, fh, j: int) -> float:
    """||nabla^j f||_{L^2} computed as sqrt(sum |k|^{2j} |f_hat|^2)."""
    if j < 0:
        raise ValueError(f"derivative order must be non-negative, got {j}")
    p = spectral_power(grid, fh)
    if j == 0:
        return float(np.sqrt(p.sum()))
    return float(np.sqrt(np.sum(p * grid.k2**j)))


def seminorm_table(grid: Grid, fh, jmax: int) -> np.ndarray:
    """Gradient seminorms of orders 0..jmax from a single power spectrum."""
    p = spectral_power(grid, fh)
    out = np.empty(jmax + 1)
    out[0] = p.sum()
    acc = p
    for j in range(1, jmax + 1):
        acc = acc * grid.k2
        out[j] = acc.sum()
    return np.sqrt(out)


def sobolev_norm(grid: Grid, fh, s: int) -> float:
    if s < 0:
        raise ValueError(f"Sobolev order must be non-negative, got {s}")
    return float(np.sqrt(np.sum(seminorm_table(grid, fh, s) ** 2)))


def lp_norm(grid: Grid, f, p) -> float:
    """L^p norm of physical samples for p in {1, 2, inf}.

    Vector fields (leading component axis) use the pointwise Euclidean length.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == grid.n + 1:
        mag = np.sqrt(np.sum(f**2, axis=0))
    elif f.ndim == grid.n:
        mag = np.abs(f)
    else:
        raise ValueError(f"sample array shape {f.shape} does not match grid {grid.shape}")
    if p == 1:
        return float(mag.sum() * grid.cell_volume)
    if p == 2:
        return float(np.sqrt(np.sum(mag**2) * grid.cell_volume))
    if p in (np.inf, "inf"):
        return float(mag.max())
    raise ValueError(f"unsupported p={p}; use 1, 2 or inf")
