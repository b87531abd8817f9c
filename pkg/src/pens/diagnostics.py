"""Per-sample functionals, time series, decay fits and integral checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .spectral import Grid, lp_norm, seminorm_table, sobolev_norm, spectral_power

COLUMNS = (
    "t", "E", "D", "l2_u", "l2_v", "l2_umv", "h_s_rho", "h_sp2_u", "h_sp1_v",
    "grad_u_hs", "grad_v_hs", "l1_rho", "min_rho", "ball_X1", "ball_X3",
    "l2_w", "l2_q", "linf_w", "M_running", "N_running",
)


@dataclass
class DiagnosticsRecord:
    t: float
    E: float
    D: float
    l2_u: float
    l2_v: float
    l2_umv: float
    h_s_rho: float
    h_sp2_u: float
    h_sp1_v: float
    grad_u_hs: float
    grad_v_hs: float
    l1_rho: float
    min_rho: float
    ball_X1: float
    ball_X3: float
    l2_w: float
    l2_q: float
    linf_w: float
    M_running: float = math.nan
    N_running: float = math.nan
    # not part of the CSV
    seminorms_u: np.ndarray = field(default=None, repr=False)
    seminorms_v: np.ndarray = field(default=None, repr=False)
    linf_div_u: float = math.nan

    def row(self):
        return [getattr(self, c) for c in COLUMNS]


def x1_radius(t: float, n: int) -> float:
    return math.sqrt(n / (t + n))


def x3_radius(t: float, n: int) -> float:
    return math.sqrt(2.0 * n / (t + 4.0 * n))


def ball_energy(grid: Grid, fh, radius: float) -> float:
    """Sum of |f_hat(k)|^2 over lattice modes with |k| <= radius."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    p = spectral_power(grid, fh)
    return float(np.sum(p[grid.kmag <= radius]))


def energy_E(grid: Grid, state) -> float:
    """integral rho |u|^2 + ||v||^2."""
    R = grid.inverse(state.rho)
    U = grid.inverse(state.u)
    kinetic = float(np.sum(R * np.sum(U * U, axis=0)) * grid.cell_volume)
    return kinetic + float(spectral_power(grid, state.v).sum())


def dissipation_D(grid: Grid, state) -> float:
    """integral rho |u - v|^2 + ||grad v||^2."""
    R = grid.inverse(state.rho)
    W = grid.inverse(state.u - state.v)
    drag = float(np.sum(R * np.sum(W * W, axis=0)) * grid.cell_volume)
    return drag + float(np.sum(spectral_power(grid, state.v) * grid.k2))


def compute_record(grid: Grid, state, heat_ref, s: int = 3) -> DiagnosticsRecord:
    """Every tracked functional of ``state`` in one pass of inverse transforms."""
    n = grid.n
    t = float(state.t)
    w = heat_ref.evolve(t)
    q = state.v - w
    divu = grid.divergence(state.u)
    phys = grid._inverse(np.concatenate([state.rho[None], state.u, state.v, w, divu[None]]))
    R = phys[0]
    U = phys[1 : 1 + n]
    V = phys[1 + n : 1 + 2 * n]
    W = phys[1 + 2 * n : 1 + 3 * n]
    DU = phys[-1]
    dV = grid.cell_volume

    su = seminorm_table(grid, state.u, s + 2)
    sv = seminorm_table(grid, state.v, s + 1)
    umv = state.u - state.v
    l2_umv = math.sqrt(float(spectral_power(grid, umv).sum()))
    rel = U - V
    E = float(np.sum(R * np.sum(U * U, axis=0)) * dV) + float(sv[0] ** 2)
    D = float(np.sum(R * np.sum(rel * rel, axis=0)) * dV) + float(sv[1] ** 2)
    return DiagnosticsRecord(
        t=t,
        E=E,
        D=D,
        l2_u=float(su[0]),
        l2_v=float(sv[0]),
        l2_umv=l2_umv,
        h_s_rho=sobolev_norm(grid, state.rho, s),
        h_sp2_u=float(np.sqrt(np.sum(su**2))),
        h_sp1_v=float(np.sqrt(np.sum(sv**2))),
        grad_u_hs=float(np.sqrt(np.sum(su[1 : s + 2] ** 2))),
        grad_v_hs=float(np.sqrt(np.sum(sv[1 : s + 2] ** 2))),
        l1_rho=float(np.sum(np.abs(R)) * dV),
        min_rho=float(R.min()),
        ball_X1=ball_energy(grid, state.v, x1_radius(t, n)),
        ball_X3=ball_energy(grid, q, x3_radius(t, n)),
        l2_w=math.sqrt(float(spectral_power(grid, w).sum())),
        l2_q=math.sqrt(float(spectral_power(grid, q).sum())),
        linf_w=lp_norm(grid, W, np.inf),
        seminorms_u=su,
        seminorms_v=sv,
        linf_div_u=float(np.max(np.abs(DU))),
    )


class TimeSeries:
    """Ordered diagnostics records with running suprema of M and N."""

    def __init__(self, n: int, s: int = 3, records=None):
        self.n = n
        self.s = s
        self.records: list[DiagnosticsRecord] = []
        for r in records or ():
            self.append(r)

    def append(self, rec: DiagnosticsRecord):
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError(f"sample times must increase ({rec.t} after {self.records[-1].t})")
        m = (1.0 + rec.t) ** (self.n / 2) * rec.E
        nn = (1.0 + rec.t) ** (self.n / 4) * (rec.grad_u_hs + rec.grad_v_hs)
        if self.records:
            m = max(m, self.records[-1].M_running)
            nn = max(nn, self.records[-1].N_running)
        rec.M_running = m
        rec.N_running = nn
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(f"unknown column {name!r}; available: {', '.join(COLUMNS)}")
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def seminorms(self, which: str) -> np.ndarray:
        """(samples, orders) array of gradient seminorms of ``u`` or ``v``."""
        attr = {"u": "seminorms_u", "v": "seminorms_v"}[which]
        rows = [getattr(r, attr) for r in self.records]
        if any(r is None for r in rows):
            raise ValueError("seminorm tables are not available (series loaded from CSV?)")
        return np.array(rows)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.records:
            writer.writerow(["%.17g" % x for x in r.row()])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, n: int = 3, s: int = 3) -> "TimeSeries":
        text = Path(path).read_text()
        return cls.from_csv_text(text, n, s)

    @classmethod
    def from_csv_text(cls, text: str, n: int = 3, s: int = 3) -> "TimeSeries":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV: header row missing") from None
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        out = cls(n, s)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(COLUMNS):
                raise ValueError(f"line {lineno}: expected {len(COLUMNS)} fields, found {len(row)}")
            vals = dict(zip(COLUMNS, map(float, row)))
            rec = DiagnosticsRecord(**vals)
            out.records.append(rec)  # keep the stored running values verbatim
        return out


def record_fields():
    return [f.name for f in fields(DiagnosticsRecord)]


# -- functionals over a series ---------------------------------------------

def functional_M(series: TimeSeries, n: int | None = None) -> float:
    """sup over samples of (1+t)^(n/2) E(t)."""
    if not len(series):
        raise ValueError("empty series")
    n = series.n if n is None else n
    t, E = series.column("t"), series.column("E")
    return float(np.max((1.0 + t) ** (n / 2) * E))


def functional_N(series: TimeSeries, n: int | None = None, s: int | None = None) -> float:
    """sup over samples of (1+t)^(n/4) (||grad u||_{H^s} + ||grad v||_{H^s})."""
    if not len(series):
        raise ValueError("empty series")
    n = series.n if n is None else n
    t = series.column("t")
    if s is None or s == series.s:
        g = series.column("grad_u_hs") + series.column("grad_v_hs")
    else:
        su, sv = series.seminorms("u"), series.seminorms("v")
        if su.shape[1] < s + 2:
            raise ValueError(f"order s={s} exceeds the recorded seminorms")
        g = np.sqrt(np.sum(su[:, 1 : s + 2] ** 2, 1)) + np.sqrt(np.sum(sv[:, 1 : s + 2] ** 2, 1))
    return float(np.max((1.0 + t) ** (n / 4) * g))


def weighted_integral(t, values, beta: float, cumulative: bool = False):
    """Trapezoidal integral of (1+t)^beta * values; cumulative from the first sample if asked."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if t.size < 2:
        raise ValueError("weighted integral needs at least 2 samples")
    f = (1.0 + t) ** beta * values
    pieces = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
    if cumulative:
        return np.concatenate([[0.0], np.cumsum(pieces)])
    return float(pieces.sum())


def series_weighted_integral(series: TimeSeries, beta: float, quantity, cumulative: bool = False):
    """``quantity`` is a column name or a callable mapping the series to sample values."""
    vals = series.column(quantity) if isinstance(quantity, str) else np.asarray(quantity(series))
    return weighted_integral(series.column("t"), vals, beta, cumulative)


@dataclass
class DecayFit:
    alpha: float
    log_amplitude: float
    window: tuple
    r2: float
    samples: int

    @property
    def amplitude(self) -> float:
        return math.exp(self.log_amplitude)

    def as_dict(self):
        return {"alpha": self.alpha, "log_amplitude": self.log_amplitude,
                "window": list(self.window), "r2": self.r2, "samples": self.samples}


MIN_FIT_SAMPLES = 10


def fit_decay(t, values, window) -> DecayFit:
    """Least-squares fit of log(value) = c - alpha * log(1+t) on ``window``.

    alpha is minus the slope, so growing series give a negative alpha.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    a, b = map(float, window)
    if not a < b:
        raise ValueError(f"fit window must satisfy a < b, got [{a}, {b}]")
    tol = 1e-9 * max(1.0, abs(b))
    sel = (t >= a - tol) & (t <= b + tol)
    count = int(sel.sum())
    if count < MIN_FIT_SAMPLES:
        raise ValueError(f"fit window [{a}, {b}] holds {count} samples; need {MIN_FIT_SAMPLES}")
    y = values[sel]
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("decay fits need positive finite values")
    x = np.log1p(t[sel])
    ly = np.log(y)
    xm, ym = x.mean(), ly.mean()
    dx = x - xm
    slope = float(np.dot(dx, ly - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * x)
    ss_tot = float(np.sum((ly - ym) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-30 * max(1.0, float(np.sum(ly**2))):
        r2 = 1.0
    else:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(-slope, intercept, (a, b), r2, count)


def energy_identity_residual(t, E, D) -> float:
    """max over interior samples of |E'/2 + D| (centered differences) / max D."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    D = np.asarray(D, dtype=float)
    if t.size < 3:
        raise ValueError("energy identity residual needs at least 3 samples")
    dE = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    res = np.abs(0.5 * dE + D[1:-1])
    scale = float(np.max(np.abs(D)))
    worst = float(res.max())
    if scale == 0:
        return 0.0 if worst == 0 else math.inf
    return worst / scale
