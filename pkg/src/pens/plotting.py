"""Report figures (PNG, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "legend.fontsize": 8,
    "font.size": 9,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def decay_figure(series, report, path: Path) -> Path:
    t = series.column("t")
    x = 1.0 + t
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for col, label in (("l2_v", "||v||"), ("l2_u", "||u||"), ("l2_w", "||w|| (heat)"),
                           ("grad_v_hs", "||grad v||_Hs")):
            y = series.column(col)
            if np.all(y > 0):
                ax.loglog(x, y, label=label)
        for col, fit in report.fits.items():
            if col in ("l2_v", "l2_u") and isinstance(fit, dict):
                a, b = fit["window"]
                xs = 1.0 + np.linspace(a, b, 50)
                ax.loglog(xs, np.exp(fit["log_amplitude"]) * xs ** (-fit["alpha"]), "k--", lw=0.8,
                          label=f"fit {col}: alpha={fit['alpha']:.3f}")
        for name, env in report.envelopes.items():
            if name in ("lower", "upper", "heat_lower"):
                ax.loglog(x, env["A"] * x ** (-env["alpha"]), ":", lw=1.0, label=f"{name} envelope")
        ax.set_xlabel("1 + t")
        ax.set_ylabel("norm")
        ax.set_title(f"{report.preset}: decay")
        ax.legend()
        return _save(fig, path)


def energy_figure(series, report, path: Path) -> Path:
    t = series.column("t")
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        for col in ("E", "D"):
            y = series.column(col)
            if np.all(y > 0):
                a1.semilogy(t, y, label=col)
            else:
                a1.plot(t, y, label=col)
        a1.set_xlabel("t")
        a1.legend()
        a1.set_title("energy and dissipation")
        for col in ("M_running", "N_running"):
            y = series.column(col)
            if y[0] > 0:
                a2.plot(t, y / y[0], label=f"{col} / initial")
        a2.set_xlabel("t")
        a2.legend()
        a2.set_title("running functionals")
        return _save(fig, path)


def heat_figure(series, report, path: Path) -> Path:
    t = series.column("t")
    w = series.column("l2_w")
    q = series.column("l2_q")
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        a1.loglog(1 + t, w, label="||w||")
        env = report.envelopes.get("heat_lower")
        if env:
            a1.loglog(1 + t, env["A"] * (1 + t) ** (-env["alpha"]), "--", label="lower bound")
        a1.set_xlabel("1 + t")
        a1.legend()
        a1.set_title("heat flow")
        ratio = np.divide(q, w, out=np.zeros_like(q), where=w > 0)
        a2.plot(t, ratio, label="||q|| / ||w||")
        a2.set_xlabel("t")
        a2.legend()
        a2.set_title("comparison field")
        return _save(fig, path)


def render_run_figures(out: Path, series, report) -> list:
    out = Path(out)
    paths = [decay_figure(series, report, out / "decay.png"),
             energy_figure(series, report, out / "energy.png"),
             heat_figure(series, report, out / "heat.png")]
    conv = report.extra.get("convergence")
    if conv:
        with plt.rc_context(STYLE):
            fig, ax = plt.subplots()
            dts = np.array(conv["dt"][:-1])
            ax.loglog(dts, conv["differences"], "o-", label="||y_dt - y_dt/2||")
            ax.loglog(dts, conv["differences"][0] * (dts / dts[0]) ** 2, "k--", lw=0.8,
                      label="slope 2")
            ax.set_xlabel("dt")
            ax.legend()
            paths.append(_save(fig, out / "convergence.png"))
    return paths


def render_sweep_figure(out: Path, sweep_report) -> Path:
    key = sweep_report.params[0] if sweep_report.params else "cell"
    xs, ys = [], []
    for i, c in enumerate(sweep_report.cells):
        if c.alpha_v is None:
            continue
        x = c.overrides.get(key, i)
        xs.append(float(x) if isinstance(x, (int, float)) else i)
        ys.append(c.alpha_v)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if xs:
            order = np.argsort(xs)
            ax.plot(np.array(xs)[order], np.array(ys)[order], "o-", label="fitted alpha of ||v||")
        ax.set_xlabel(key)
        ax.set_ylabel("alpha")
        ax.legend()
        return _save(fig, Path(out) / "sweep.png")
