"""Experiment presets: each binds a run to the checks it must pass.

A preset run produces a :class:`Report` holding one :class:`Criterion` per
check, the decay fits and envelopes it used, the smallness report of the
initial data and provenance (config hash, code version, FFT backend).
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import DECAY_PRESETS, ConfigError, RunConfig, build_config
from .diagnostics import (
    TimeSeries, energy_identity_residual, fit_decay, series_weighted_integral,
)
from .dynamics import SchemeConfig, SimulationAbort, run
from .initial import make_initial_state, smallness_report
from .reference import (
    calibrate_heat_constant, fit_upper_envelope, heat_l2_lower,
    lower_sandwich_envelope,
)
from .snapshot import write_snapshot
from .spectral import FFT_BACKEND, spectral_power

log = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3

NOTES = [
    "low-frequency floor checked on lattice modes 0 < |k| <= r0 only, not on the continuous ball",
    "rho L1 norm is the torus value (mean density times box volume)",
]

# thresholds shared by presets and the acceptance suite
MASS_DRIFT_TOL = 1e-10
DECAY_RANGE = (0.60, 0.90)
DECAY_R2_MIN = 0.98
GRAD_DECAY_MIN = 0.60
HEAT_MATCH_TOL = 1e-12
Q_OVER_W_MAX = 0.2
WEIGHTED_INCREMENT_MAX = 0.05
PLATEAU_FACTOR = 1.25
ORDER_RANGE = (1.8, 2.2)
RESIDUAL_MAX = 1e-3
RESIDUAL_RATIO = (3.0, 5.0)
WEIGHT_EXPONENT = 9.0 / 8.0


@dataclass
class Criterion:
    name: str
    passed: bool
    measured: object
    threshold: str
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}\t{status}\t{_fmt(self.measured)}\t{self.threshold}"


def _fmt(x):
    if isinstance(x, float):
        return "%.6g" % x
    if isinstance(x, dict):
        return ";".join(f"{k}={_fmt(v)}" for k, v in x.items())
    if isinstance(x, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in x) + "]"
    return str(x)


def _plain(x):
    """Recursively convert numpy scalars/arrays for JSON."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


@dataclass
class Report:
    preset: str
    criteria: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    envelopes: dict = field(default_factory=dict)
    smallness: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    abort: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.abort is None and all(c.passed for c in self.criteria)

    @property
    def exit_code(self) -> int:
        if self.abort is not None:
            return EXIT_ABORT
        return EXIT_PASS if self.passed else EXIT_FAIL

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def add(self, crit: Criterion):
        if any(c.name == crit.name for c in self.criteria):
            raise ValueError(f"duplicate criterion {crit.name}")
        self.criteria.append(crit)

    def lines(self):
        return [c.line() for c in self.criteria]

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        d["exit_code"] = self.exit_code
        return _plain(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        crits = [Criterion(**c) for c in d.get("criteria", [])]
        return cls(d["preset"], crits, d.get("fits", {}), d.get("envelopes", {}),
                   d.get("smallness", {}), d.get("provenance", {}), d.get("notes", []),
                   d.get("abort"), d.get("extra", {}))

    @classmethod
    def load(cls, path) -> "Report":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- shared checks ----------------------------------------------------------

def check_mass(series: TimeSeries) -> Criterion:
    m = series.column("l1_rho")
    drift = float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0 else math.inf
    return Criterion("mass-conservation", drift <= MASS_DRIFT_TOL, drift,
                     f"relative drift of ||rho||_L1 <= {MASS_DRIFT_TOL:g}")


def check_positivity(series: TimeSeries) -> Criterion:
    low = float(series.column("min_rho").min())
    return Criterion("positivity", low > 0, low, "min rho > 0 at every sample")


def check_energy_monotone(series: TimeSeries) -> Criterion:
    E = series.column("E")
    rise = float(np.max(np.diff(E) / E[:-1])) if E.size > 1 and E[0] > 0 else 0.0
    return Criterion("energy-non-increasing", rise <= 1e-12, rise,
                     "relative increase of E between samples <= 1e-12")


def check_density_bounds(series: TimeSeries, rho0_min: float, rho0_max: float) -> Criterion:
    """min rho stays in [min rho0 e^-G, max rho0 e^G] with G = integral ||div u||_inf."""
    t = series.column("t")
    div = np.array([r.linf_div_u for r in series.records])
    gamma = np.concatenate([[0.0], np.cumsum(0.5 * (div[1:] + div[:-1]) * np.diff(t))])
    low = series.column("min_rho")
    ok = bool(np.all(low >= rho0_min * np.exp(-gamma) * (1 - 1e-12))
              and np.all(low <= rho0_max * np.exp(gamma) * (1 + 1e-12)))
    return Criterion("density-bounds", ok, {"Gamma": float(gamma[-1]), "min_rho": float(low.min())},
                     "min rho0 exp(-Gamma) <= min rho <= max rho0 exp(Gamma)")


def _decay_fit(series: TimeSeries, column: str, window) -> dict:
    f = fit_decay(series.column("t"), series.column(column), window)
    return f.as_dict()


def evaluate_decay(cfg: RunConfig, series: TimeSeries, report: Report):
    """Upper-decay checks: exponents of ||v||, ||u|| and of the gradient seminorms."""
    window = cfg.fit_window
    lo, hi = DECAY_RANGE
    for col, name in (("l2_v", "decay-l2-v"), ("l2_u", "decay-l2-u")):
        fit = _decay_fit(series, col, window)
        report.fits[col] = fit
        ok = lo <= fit["alpha"] <= hi and fit["r2"] >= DECAY_R2_MIN
        report.add(Criterion(name, ok, {"alpha": fit["alpha"], "r2": fit["r2"]},
                             f"alpha in [{lo}, {hi}], R^2 >= {DECAY_R2_MIN}"))
    report.add(grad_decay_criterion(cfg, series, report))


def grad_decay_criterion(cfg: RunConfig, series: TimeSeries, report: Report) -> Criterion:
    window = cfg.fit_window
    floor = cfg.values["fit"]["floor"]
    s = cfg.data.s
    t = series.column("t")
    start = int(np.argmin(np.abs(t - window[0])))
    measured, below = {}, []
    try:
        sv = series.seminorms("v")
    except ValueError:
        sv = None
    if sv is not None:
        for j in range(1, s + 2):
            if sv[start, j] <= floor:
                below.append(j)
                continue
            fit = fit_decay(t, sv[:, j], window).as_dict()
            report.fits[f"grad_v_order_{j}"] = fit
            measured[f"order_{j}"] = fit["alpha"]
    fit = _decay_fit(series, "grad_v_hs", window)
    report.fits["grad_v_hs"] = fit
    measured["H^s"] = fit["alpha"]
    ok = all(a >= GRAD_DECAY_MIN for a in measured.values())
    detail = f"below noise floor {floor:g}: orders {below}" if below else ""
    return Criterion("decay-grad-v", ok, measured,
                     f"alpha >= {GRAD_DECAY_MIN} for every seminorm above {floor:g}", detail)


def evaluate_weighted(cfg: RunConfig, series: TimeSeries, report: Report):
    t = series.column("t")
    cum = series_weighted_integral(series, WEIGHT_EXPONENT, lambda s: s.column("grad_u_hs") ** 2,
                                   cumulative=True)
    t_q = t[0] + 0.75 * (t[-1] - t[0])
    i_q = int(np.argmin(np.abs(t - t_q)))
    inc = float((cum[-1] - cum[i_q]) / cum[i_q]) if cum[i_q] > 0 else 0.0
    report.extra["weighted_integral"] = {"beta": WEIGHT_EXPONENT, "final": float(cum[-1]),
                                         "at_three_quarters": float(cum[i_q])}
    report.add(Criterion("weighted-integral", inc <= WEIGHTED_INCREMENT_MAX, inc,
                         f"relative increase over the final quarter <= {WEIGHTED_INCREMENT_MAX}"))


def evaluate_functionals(cfg: RunConfig, series: TimeSeries, report: Report):
    t = series.column("t")
    mid = 0.5 * (cfg.fit_window[0] + cfg.fit_window[1])
    i_mid = int(np.argmin(np.abs(t - mid)))
    for col, name in (("M_running", "functional-M-plateau"), ("N_running", "functional-N-plateau")):
        vals = series.column(col)
        ratio = float(vals[-1] / vals[i_mid]) if vals[i_mid] > 0 else math.inf
        report.add(Criterion(name, ratio <= PLATEAU_FACTOR, ratio,
                             f"final / value at window midpoint <= {PLATEAU_FACTOR}"))


def evaluate_heat_lower(cfg: RunConfig, series: TimeSeries, v0, report: Report,
                        name: str = "heat-lower-bound"):
    grid, d = cfg.grid, cfg.data
    rule = cfg.values["heat"]["calibration"]
    c_n = calibrate_heat_constant(grid, v0, d.delta0, rule=rule, radius=d.radius)
    t = series.column("t")
    w = series.column("l2_w")
    lower = np.array([heat_l2_lower(d.delta0, grid.n, x, c_n) for x in t])
    ratio = float(np.min(w / lower))
    report.envelopes["heat_lower"] = {"A": c_n * d.delta0**1.5, "alpha": grid.n / 4,
                                      "c_n": c_n, "calibration": rule}
    report.add(Criterion(name, ratio >= 1.0, ratio,
                         "min over samples of ||w|| / (c_n delta0^1.5 (1+t)^(-n/4)) >= 1"))


def evaluate_sandwich(cfg: RunConfig, series: TimeSeries, report: Report):
    grid, d = cfg.grid, cfg.data
    t = series.column("t")
    v = series.column("l2_v")
    a, b = cfg.fit_window
    sel = (t >= a - 1e-9) & (t <= b + 1e-9)
    lower = lower_sandwich_envelope(d.delta0, grid.n)
    lo_ratio = float(np.min(v[sel] / lower(t[sel])))
    report.envelopes["lower"] = {"A": lower.A, "alpha": lower.alpha}
    report.add(Criterion("sandwich-lower", lo_ratio >= 1.0, lo_ratio,
                         "||v|| >= 0.5 delta0^1.5 (1+t)^(-n/4) on the fit window"))
    # upper envelope A (1+t)^(-n/4), A calibrated on the samples before the window
    upper = fit_upper_envelope(t, v, grid.n / 4, t_max=a)
    up_ratio = float(np.max(v[sel] / upper(t[sel])))
    report.envelopes["upper"] = {"A": upper.A, "alpha": upper.alpha, "calibrated_on": [0.0, a]}
    report.add(Criterion("sandwich-upper", up_ratio <= 1.0, up_ratio,
                         "||v|| <= A (1+t)^(-n/4) on the fit window, A from t <= window start"))
    w = series.column("l2_w")
    q = series.column("l2_q")
    ratio = float(np.max(q / w))
    report.add(Criterion("q-over-w", ratio <= Q_OVER_W_MAX, ratio,
                         f"max ||q|| / ||w|| <= {Q_OVER_W_MAX}"))


# -- running ----------------------------------------------------------------

def provenance(cfg: RunConfig) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "fft_backend": FFT_BACKEND,
        "numpy": np.__version__,
        "config": cfg.values,
    }


def new_report(cfg: RunConfig) -> Report:
    notes = list(NOTES)
    if cfg.grid.n == 2:
        notes.append("n = 2 lies outside the hypotheses of the decay estimates (n >= 3)")
    if cfg.scheme.hooks:
        notes.append(f"test hooks active: {sorted(cfg.scheme.hooks)}")
    return Report(cfg.preset, provenance=provenance(cfg), notes=notes)


def simulate(cfg: RunConfig, sinks=()):
    """Build the initial state from ``cfg`` and run it; returns (initial state, series)."""
    grid = cfg.grid
    state = make_initial_state(grid, cfg.data)
    series = run(grid, state, cfg.scheme, cfg.t_end, cfg.sample_interval, sinks=sinks,
                 sobolev_order=cfg.data.s)
    return state, series


def _base_checks(cfg, series, state, report):
    report.add(check_mass(series))
    if "no-nonlinear" not in cfg.scheme.hooks:
        report.add(check_positivity(series))
        R0 = cfg.grid.inverse(state.rho)
        report.add(check_density_bounds(series, float(R0.min()), float(R0.max())))
    report.add(check_energy_monotone(series))


def evaluate_preset(cfg: RunConfig, state, series: TimeSeries, report: Report | None = None) -> Report:
    """Checks of the series-only presets (thm1-decay, thm2-sandwich, weighted, heat-oracle)."""
    report = report or new_report(cfg)
    p = cfg.preset
    if p == "thm1-decay":
        evaluate_decay(cfg, series, report)
        evaluate_weighted(cfg, series, report)
        evaluate_functionals(cfg, series, report)
    elif p == "thm2-sandwich":
        evaluate_sandwich(cfg, series, report)
        evaluate_heat_lower(cfg, series, state.v, report)
    elif p == "weighted":
        evaluate_weighted(cfg, series, report)
        evaluate_functionals(cfg, series, report)
    elif p == "heat-oracle":
        evaluate_heat_oracle(cfg, series, state, report)
    else:
        raise ValueError(f"preset {p!r} needs its own driver")
    _base_checks(cfg, series, state, report)
    return report


def evaluate_heat_oracle(cfg: RunConfig, series: TimeSeries, state, report: Report):
    v = series.column("l2_v")
    w = series.column("l2_w")
    q = series.column("l2_q")
    err = float(np.max(np.abs(v - w) / w))
    report.add(Criterion("heat-oracle-match", err <= HEAT_MATCH_TOL, err,
                         f"max relative | ||v|| - ||w_exact|| | <= {HEAT_MATCH_TOL:g}"))
    qrel = float(np.max(q / w))
    report.add(Criterion("heat-difference-zero", qrel <= HEAT_MATCH_TOL, qrel,
                         f"max ||v - w_exact|| / ||w_exact|| <= {HEAT_MATCH_TOL:g}"))
    evaluate_heat_lower(cfg, series, state.v, report)
    fit = _decay_fit(series, "l2_v", cfg.fit_window)
    report.fits["l2_v"] = fit
    lo, hi = DECAY_RANGE
    report.add(Criterion("heat-decay-exponent", lo <= fit["alpha"] <= hi, fit["alpha"],
                         f"alpha in [{lo}, {hi}]"))
    # (1+t)^(n/2) ||w||_inf must not keep growing: late maximum <= early maximum
    t = series.column("t")
    scaled = (1 + t) ** (cfg.grid.n / 2) * series.column("linf_w")
    half = t <= 0.5 * t[-1]
    late, early = float(scaled[~half].max()), float(scaled[half].max())
    report.extra["linf_w_scaled_max"] = max(late, early)
    report.add(Criterion("heat-linf-bounded", late <= early, late / early,
                         "max of (1+t)^(n/2) ||w||_inf over the second half <= over the first half"))


def _energy_identity(cfg: RunConfig, report: Report):
    dt = cfg.scheme.dt
    results = []
    series_out = None
    for h in (dt, dt / 2):
        scheme = SchemeConfig(dt=h, dealias=cfg.scheme.dealias, hooks=cfg.scheme.hooks)
        grid = cfg.grid
        state = make_initial_state(grid, cfg.data)
        series = run(grid, state, scheme, cfg.t_end, h, sobolev_order=cfg.data.s)
        r = energy_identity_residual(series.column("t"), series.column("E"), series.column("D"))
        results.append(r)
        if series_out is None:
            series_out, state_out = series, state
    ratio = results[0] / results[1] if results[1] > 0 else math.inf
    report.extra["residuals"] = {"dt": dt, "residual_dt": results[0], "residual_dt_half": results[1]}
    report.add(Criterion("energy-identity-residual", results[0] <= RESIDUAL_MAX, results[0],
                         f"max |E'/2 + D| / max D <= {RESIDUAL_MAX:g} at dt = {dt:g}"))
    lo, hi = RESIDUAL_RATIO
    report.add(Criterion("energy-identity-order", lo <= ratio <= hi, ratio,
                         f"residual(dt) / residual(dt/2) in [{lo}, {hi}]"))
    _base_checks(cfg, series_out, state_out, report)
    return state_out, series_out


def _char_check(cfg: RunConfig, report: Report):
    from .characteristics import VelocityHistory, characteristics_density, probe_grid

    grid = cfg.grid
    c = cfg.section("characteristics")
    times, u_hats, rho_at = [], [], {}

    def sink(state, rec):
        times.append(state.t)
        u_hats.append(state.u.copy())
        rho_at[state.t] = state.rho.copy()

    state, series = simulate(cfg, sinks=[sink])
    history = VelocityHistory(grid, times, u_hats, interp_tol=c["tolerance"])
    probes, sl = probe_grid(grid, c["probes_per_axis"])
    errs, positive = {}, True
    t_all = np.array(times)
    for frac in (0.5, 1.0):
        target = t_all[int(np.argmin(np.abs(t_all - frac * t_all[-1])))]
        vals = characteristics_density(grid, times, history, state.rho, probes, t=target,
                                       rtol=c["rtol"])
        ref = grid.inverse(rho_at[target])[sl].reshape(-1)
        errs[f"t={target:g}"] = float(np.max(np.abs(vals - ref)) / np.max(np.abs(ref)))
        positive &= bool(np.all(vals > 0))
    worst = max(errs.values())
    report.extra["characteristics"] = {"probes": int(probes.shape[0]), "errors": errs}
    report.add(Criterion("characteristics-density", worst <= c["tolerance"], errs,
                         f"relative L_inf error vs spectral rho <= {c['tolerance']:g}"))
    report.add(Criterion("characteristics-positive", positive, positive,
                         "reconstructed density > 0 at every probe"))
    _base_checks(cfg, series, state, report)
    return state, series


def convergence_study(cfg: RunConfig, report: Report | None = None):
    """Self-convergence order from runs at dt, dt/2, dt/4, ... to t_end."""
    report = report or new_report(cfg)
    grid = cfg.grid
    finals = []
    series_out = state0 = None
    for i in range(cfg.values["convergence"]["refinements"]):
        h = cfg.scheme.dt / 2**i
        state0 = make_initial_state(grid, cfg.data)
        scheme = SchemeConfig(dt=h, dealias=cfg.scheme.dealias, hooks=cfg.scheme.hooks)
        last = {}

        def sink(state, rec, last=last):
            last["state"] = state

        series = run(grid, state0, scheme, cfg.t_end, cfg.sample_interval, sinks=[sink],
                     sobolev_order=cfg.data.s)
        finals.append(last["state"])
        series_out = series

    def dist(a, b):
        return math.sqrt(sum(float(spectral_power(grid, getattr(a, f) - getattr(b, f)).sum())
                             for f in ("rho", "u", "v")))

    diffs = [dist(finals[i], finals[i + 1]) for i in range(len(finals) - 1)]
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(len(diffs) - 1)]
    report.extra["convergence"] = {"dt": [cfg.scheme.dt / 2**i for i in range(len(finals))],
                                   "differences": diffs, "orders": orders}
    lo, hi = ORDER_RANGE
    report.add(Criterion("convergence-order", lo <= orders[-1] <= hi, orders[-1],
                         f"self-convergence order in [{lo}, {hi}]",
                         detail="all orders: " + ", ".join("%.4f" % o for o in orders)))
    _base_checks(cfg, series_out, state0, report)
    return state0, series_out, report


def run_preset(cfg: RunConfig, out_dir=None, write: bool = True) -> Report:
    """Run ``cfg``'s preset, evaluate its criteria and (optionally) write outputs."""
    report = new_report(cfg)
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    state = series = None
    try:
        if cfg.preset == "energy-identity":
            state, series = _energy_identity(cfg, report)
        elif cfg.preset == "char-check":
            state, series = _char_check(cfg, report)
        elif cfg.preset == "convergence":
            state, series, _ = convergence_study(cfg, report)
        else:
            snaps = []
            sinks = []
            if cfg.values["output"]["snapshots"]:
                sinks.append(lambda st, rec: snaps.append(st) if st.t in (0.0, cfg.t_end) else None)
            state, series = simulate(cfg, sinks=sinks)
            evaluate_preset(cfg, state, series, report)
            if snaps and write:
                _write_snapshots(cfg, out, snaps)
    except SimulationAbort as exc:
        report.abort = {"time": exc.time, "cause": exc.cause}
        report.add(Criterion("simulation-completed", False, exc.time, "run reaches t_end",
                             detail=exc.cause))
    if state is not None:
        report.smallness = smallness_report(cfg.grid, state.rho, state.u, state.v, cfg.data.s,
                                            cfg.data.delta0)
    if write:
        write_outputs(cfg, report, series, out)
    return report


def _write_snapshots(cfg, out: Path, states):
    grid = cfg.grid
    d = out / "snapshots"
    d.mkdir(parents=True, exist_ok=True)
    for st in states:
        tag = f"t{st.t:012.6f}"
        write_snapshot(d / f"rho_{tag}.pens", grid, grid.inverse(st.rho))
        write_snapshot(d / f"u_{tag}.pens", grid, grid.inverse(st.u))
        write_snapshot(d / f"v_{tag}.pens", grid, grid.inverse(st.v))


def write_outputs(cfg: RunConfig, report: Report, series: TimeSeries | None, out: Path):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfg.to_toml())
    if series is not None and len(series):
        series.to_csv(out / "diagnostics.csv")
    (out / "report.json").write_text(report.to_json())
    if cfg.values["output"]["figures"] and series is not None and len(series):
        from .plotting import render_run_figures

        report.extra["figures"] = [p.name for p in render_run_figures(out, series, report)]
        (out / "report.json").write_text(report.to_json())


# -- sweeps -----------------------------------------------------------------

@dataclass
class SweepCell:
    overrides: dict
    status: str
    exit_code: int
    alpha_v: float | None = None
    r2_v: float | None = None
    failed: list = field(default_factory=list)
    cause: str = ""
    out_dir: str = ""


@dataclass
class SweepReport:
    cells: list
    criteria: list
    params: list
    provenance: dict

    @property
    def exit_code(self) -> int:
        if any(c.status == "config-error" for c in self.cells):
            return EXIT_CONFIG
        if any(c.status == "aborted" for c in self.cells):
            return EXIT_ABORT
        return EXIT_PASS if all(c.passed for c in self.criteria) else EXIT_FAIL

    def to_dict(self):
        return _plain({"cells": [asdict(c) for c in self.cells],
                       "criteria": [asdict(c) for c in self.criteria],
                       "params": self.params, "provenance": self.provenance,
                       "exit_code": self.exit_code})

    def table(self) -> str:
        keys = self.params
        head = "\t".join(keys + ["status", "exit_code", "alpha_v", "r2_v"])
        rows = [head]
        for c in self.cells:
            vals = [_fmt(c.overrides[k]) for k in keys]
            vals += [c.status, str(c.exit_code), _fmt(c.alpha_v), _fmt(c.r2_v)]
            rows.append("\t".join(vals))
        return "\n".join(rows) + "\n"


def expand_grid(params: list, zip_params: bool = False) -> list:
    """[(key, [values]), ...] -> list of override dicts (Cartesian or zipped)."""
    if not params:
        return []
    keys = [k for k, _ in params]
    lists = [v for _, v in params]
    if zip_params:
        lengths = {len(v) for v in lists}
        if len(lengths) != 1:
            raise ConfigError("zipped parameters need equal-length value lists", "--param")
        combos = zip(*lists)
    else:
        combos = itertools.product(*lists)
    return [dict(zip(keys, c)) for c in combos]


def _run_cell(args):
    cfg, overrides, out = args
    try:
        cell_cfg = cfg.with_overrides(overrides)
    except ConfigError as exc:
        return SweepCell(overrides, "config-error", EXIT_CONFIG, cause=str(exc))
    rep = run_preset(cell_cfg, out_dir=out, write=True)
    fit = rep.fits.get("l2_v")
    if fit is None and rep.abort is None:
        try:
            fit = _decay_fit(_load_series(out), "l2_v", cell_cfg.fit_window)
        except (ValueError, FileNotFoundError):
            fit = None
    status = "aborted" if rep.abort else ("passed" if rep.passed else "failed")
    return SweepCell(overrides, status, rep.exit_code,
                     alpha_v=None if fit is None else fit["alpha"],
                     r2_v=None if fit is None else fit["r2"],
                     failed=[c.name for c in rep.criteria if not c.passed],
                     cause=(rep.abort or {}).get("cause", ""), out_dir=str(out))


def _load_series(out) -> TimeSeries:
    return TimeSeries.from_csv(Path(out) / "diagnostics.csv")


def sweep(cfg: RunConfig, params: list, out_dir=None, zip_params: bool = False,
          jobs: int = 1) -> SweepReport:
    """Run every combination of ``params`` as an independent preset run.

    Cell failures (criterion failures, aborts, invalid combinations) are
    recorded and the sweep continues.  For a single numeric swept parameter
    on a decay preset the fitted ||v|| exponent must be non-decreasing in
    that parameter and its last value must not fall below the first.
    """
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    combos = expand_grid(params, zip_params)
    tasks = [(cfg, o, out / f"cell_{i:03d}") for i, o in enumerate(combos)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]

    keys = [k for k, _ in params]
    criteria = []
    if cells:
        done = all(c.status in ("passed", "failed") for c in cells)
        criteria.append(Criterion("cells-completed", done,
                                  sum(c.status in ("passed", "failed") for c in cells),
                                  f"all {len(cells)} cells run to t_end"))
    if cells and cfg.preset in DECAY_PRESETS and len(cells) > 1:
        criteria.append(trend_criterion(cells, keys))
    rep = SweepReport(cells, criteria, keys, provenance(cfg))
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.tsv").write_text(rep.table())
    (out / "sweep.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    if cells and cfg.values["output"]["figures"]:
        from .plotting import render_sweep_figure

        render_sweep_figure(out, rep)
    return rep


def trend_criterion(cells: list, keys: list) -> Criterion:
    key = keys[0]
    pts = [(c.overrides[key], c.alpha_v) for c in cells]
    if any(a is None for _, a in pts):
        return Criterion("alpha-trend", False, [a for _, a in pts],
                         "fitted exponent available in every cell")
    pts.sort(key=lambda p: p[0])
    alphas = [a for _, a in pts]
    monotone = all(b >= a for a, b in zip(alphas, alphas[1:]))
    ok = monotone and alphas[-1] >= alphas[0]
    return Criterion("alpha-trend", ok, alphas,
                     f"alpha_v non-decreasing in {key} and last >= first")


def run_config_file(path, out_dir=None) -> Report:
    from .config import parse_config

    cfg = parse_config(path)
    return run_preset(cfg, out_dir=out_dir)


def default_config(preset: str) -> RunConfig:
    return build_config({"experiment": {"preset": preset}})
