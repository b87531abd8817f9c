import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pens.diagnostics import (
    COLUMNS, DiagnosticsRecord, TimeSeries, ball_energy, compute_record, dissipation_D,
    energy_E, energy_identity_residual, fit_decay, functional_M, functional_N,
    weighted_integral, x1_radius, x3_radius,
)
from pens.dynamics import State
from pens.initial import DataSpec, make_initial_state
from pens.reference import HeatReference
from pens.spectral import Grid


def record(t, E=1.0, grad=1.0, **kw):
    base = {c: 0.0 for c in COLUMNS if c not in ("M_running", "N_running")}
    base.update(t=t, E=E, grad_u_hs=grad / 2, grad_v_hs=grad / 2, **kw)
    return DiagnosticsRecord(**base)


class TestEnergyFunctionals:
    def test_quadrature_oracle(self):
        # rho = 2 + cos x, u = (sin y, 0, 0), v = (0, 0, cos x) on the 2 pi torus
        g = Grid(3, 16, 2 * np.pi)
        x, y, z = np.broadcast_arrays(*g.coordinates())
        rho = g.forward(2 + np.cos(x))
        u = g.forward(np.stack([np.sin(y), 0 * x, 0 * x]))
        v = g.forward(np.stack([0 * x, 0 * x, np.cos(x)]))
        st_ = State(0.0, rho, u, v)
        vol = (2 * np.pi) ** 3
        # int (2 + cos x) sin^2 y = vol; ||v||^2 = vol / 2
        assert energy_E(g, st_) == pytest.approx(vol + vol / 2, rel=1e-13)
        # int (2 + cos x)(sin^2 y + cos^2 x) = vol (1 + 1); ||grad v||^2 = vol / 2
        assert dissipation_D(g, st_) == pytest.approx(2 * vol + vol / 2, rel=1e-13)

    def test_record_matches_standalone(self):
        g = Grid(3, 16, 2 * np.pi)
        st_ = make_initial_state(g, DataSpec(delta0=0.2, radius=2.0, seed=4, rho_base=1.0, rho_amplitude=0.5))
        rec = compute_record(g, st_, HeatReference(g, st_.v), 3)
        assert rec.E == pytest.approx(energy_E(g, st_), rel=1e-13)
        assert rec.D == pytest.approx(dissipation_D(g, st_), rel=1e-13)
        assert rec.l2_q == 0 and rec.l2_w == pytest.approx(rec.l2_v, rel=1e-15)
        assert rec.min_rho > 0 and rec.l1_rho == pytest.approx(g.volume, rel=1e-12)
        assert rec.seminorms_u.shape == (6,) and rec.seminorms_v.shape == (5,)
        assert rec.grad_v_hs**2 == pytest.approx(float(np.sum(rec.seminorms_v[1:] ** 2)))


class TestBallEnergy:
    def test_single_mode(self):
        g = Grid(3, 16, 2 * np.pi)
        v = g.zeros(3)
        c = 0.5 * g.L**1.5  # unitary normalization
        v[0, 0, 1, 0] = c
        v[0, 0, -1, 0] = c  # cos y in the x-component
        vol = (2 * np.pi) ** 3
        assert ball_energy(g, v, 1.0) == pytest.approx(vol / 2)
        assert ball_energy(g, v, 0.99) == 0

    def test_radii(self):
        assert x1_radius(0.0, 3) == 1.0
        assert x3_radius(0.0, 3) == pytest.approx(math.sqrt(0.5))
        assert x1_radius(97.0, 3) == pytest.approx(math.sqrt(0.03))

    def test_invalid_radius(self, grid3):
        with pytest.raises(ValueError):
            ball_energy(grid3, grid3.zeros(3), 0.0)


class TestRunningFunctionals:
    def test_examples(self):
        s = TimeSeries(3)
        s.append(record(0.0, E=1.0, grad=1.0))
        s.append(record(3.0, E=0.25, grad=0.5))
        # (1+3)^(3/2) * 0.25 = 2; (1+3)^(3/4) * 0.5 = 2^0.5
        assert functional_M(s) == pytest.approx(2.0)
        assert functional_N(s) == pytest.approx(math.sqrt(2))
        assert s.column("M_running").tolist() == [1.0, 2.0]
        assert s.column("N_running")[-1] == pytest.approx(math.sqrt(2))

    def test_running_is_monotone(self):
        s = TimeSeries(3)
        for t, E in ((0, 1.0), (1, 0.1), (2, 0.01)):
            s.append(record(float(t), E=E))
        assert np.all(np.diff(s.column("M_running")) >= 0)

    def test_time_order(self):
        s = TimeSeries(3)
        s.append(record(1.0))
        with pytest.raises(ValueError):
            s.append(record(1.0))

    def test_empty(self):
        with pytest.raises(ValueError):
            functional_M(TimeSeries(3))


class TestWeightedIntegral:
    def test_log_example(self):
        # int_0^T (1+t)^(-1) dt = ln(1+T)
        t = np.linspace(0, 10, 20001)
        assert weighted_integral(t, np.ones_like(t), -1.0) == pytest.approx(math.log(11), rel=1e-8)

    def test_polynomial_exact(self):
        t = np.linspace(0, 2, 3)
        assert weighted_integral(t, np.ones(3), 0.0) == 2.0

    def test_cumulative(self):
        t = np.linspace(0, 4, 5)
        c = weighted_integral(t, np.ones(5), 0.0, cumulative=True)
        assert c.tolist() == [0, 1, 2, 3, 4]

    def test_too_short(self):
        with pytest.raises(ValueError):
            weighted_integral([0.0], [1.0], 1.0)


class TestFit:
    @given(st.floats(-2, 3), st.floats(-5, 5))
    def test_exact_power_law(self, alpha, logc):
        t = np.linspace(0, 100, 201)
        f = fit_decay(t, np.exp(logc) * (1 + t) ** -alpha, (10, 100))
        assert f.alpha == pytest.approx(alpha, abs=1e-10)
        assert f.log_amplitude == pytest.approx(logc, abs=1e-9)
        assert f.r2 == pytest.approx(1.0) or alpha == pytest.approx(0, abs=1e-6)

    @given(st.floats(1e-6, 1e6))
    def test_amplitude_invariance(self, scale):
        t = np.linspace(0, 50, 101)
        y = (1 + t) ** -0.75 * (1 + 0.1 * np.sin(t))
        assert fit_decay(t, scale * y, (5, 50)).alpha == pytest.approx(fit_decay(t, y, (5, 50)).alpha, abs=1e-9)

    def test_constant(self):
        f = fit_decay(np.arange(20.0), np.full(20, 3.0), (0, 19))
        assert f.alpha == pytest.approx(0, abs=1e-14) and f.r2 == 1.0

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="need 10"):
            fit_decay(np.arange(20.0), np.ones(20), (0, 5))

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            fit_decay(np.arange(20.0), np.zeros(20), (0, 19))

    def test_bad_window(self):
        with pytest.raises(ValueError):
            fit_decay(np.arange(20.0), np.ones(20), (5, 5))


class TestEnergyIdentityResidual:
    def test_exact_exponential(self):
        t = np.linspace(0, 1, 1001)
        E = np.exp(-2 * t)
        D = np.exp(-2 * t)  # E' / 2 + D = 0
        assert energy_identity_residual(t, E, D) < 1e-6

    def test_wrong_dissipation(self):
        t = np.linspace(0, 1, 101)
        assert energy_identity_residual(t, np.exp(-2 * t), 2 * np.exp(-2 * t)) == pytest.approx(math.exp(-0.02) / 2, rel=1e-3)

    def test_zero(self):
        t = np.linspace(0, 1, 5)
        assert energy_identity_residual(t, np.ones(5), np.zeros(5)) == 0.0


class TestCSV:
    def test_header_order(self):
        text = TimeSeries(3).to_csv()
        assert text.strip().split(",") == list(COLUMNS)
        assert COLUMNS[0] == "t" and COLUMNS[-2:] == ("M_running", "N_running")

    def test_round_trip_exact(self):
        s = TimeSeries(3)
        rng = np.random.default_rng(0)
        for t in range(5):
            s.append(record(float(t), E=float(rng.random()), grad=float(rng.random()), l2_v=1 / 3))
        back = TimeSeries.from_csv_text(s.to_csv())
        for c in COLUMNS:
            assert np.array_equal(back.column(c), s.column(c))

    def test_rejects_bad_header(self):
        with pytest.raises(ValueError):
            TimeSeries.from_csv_text("t,E\n0,1\n")

    def test_rejects_short_row(self):
        text = ",".join(COLUMNS) + "\n0,1\n"
        with pytest.raises(ValueError, match="line 2"):
            TimeSeries.from_csv_text(text)

    def test_unknown_column(self):
        with pytest.raises(KeyError):
            TimeSeries(3).column("l3_v")


@given(st.integers(0, 2**32), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_ball_energy_monotone_and_total(seed, r1, r2):
    from conftest import random_divfree
    from pens.spectral import spectral_power

    g = Grid(3, 8, 2 * np.pi)
    v = random_divfree(g, np.random.default_rng(seed))
    lo, hi = sorted((r1, r2))
    assert 0 <= ball_energy(g, v, lo) <= ball_energy(g, v, hi)
    total = float(spectral_power(g, v).sum())
    assert ball_energy(g, v, float(g.kmag.max())) == pytest.approx(total, rel=1e-14)
