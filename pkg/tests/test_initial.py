import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pens.initial import (
    DataSpec, ball_modes, count_ball_modes, make_density, make_divfree_lowfreq,
    make_initial_state, make_u0, smallness_report,
)
from pens.spectral import Grid, lp_norm, sobolev_norm

# lattice count of 0 < |m| <= 128 / (2 pi); cross-checked by brute force below
BALL_MODES_L128 = 35512


def brute_force_ball_count(L, radius):
    R2 = (radius * L / (2 * np.pi)) ** 2
    r = int(np.floor(np.sqrt(R2)))
    return sum(1 for m in itertools.product(range(-r, r + 1), repeat=3)
               if 0 < m[0] ** 2 + m[1] ** 2 + m[2] ** 2 <= R2)


class TestDataSpec:
    @pytest.mark.parametrize("kw", [dict(delta0=0.0), dict(delta0=1.0), dict(rho_base=0.0),
                                    dict(rho_amplitude=1.0), dict(rho_amplitude=-0.1),
                                    dict(radius=0.0), dict(s=-1), dict(pattern="ring"),
                                    dict(width=0.0), dict(u_norm=-1.0), dict(seed=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            DataSpec(**kw)


class TestLowFrequencyVelocity:
    def test_ball_count(self):
        g = Grid(3, 64, 128.0)
        assert count_ball_modes(g, 1.0) == BALL_MODES_L128
        assert brute_force_ball_count(128.0, 1.0) == BALL_MODES_L128

    @given(st.integers(0, 2**63), st.sampled_from([1.0, 1.5]))
    def test_floor_and_structure(self, seed, radius):
        g = Grid(3, 16, 4 * np.pi)
        spec = DataSpec(seed=seed, radius=radius, delta0=0.1)
        v = make_divfree_lowfreq(g, spec)
        mask = ball_modes(g, radius)
        amp = np.sqrt(np.sum(np.abs(v) ** 2, axis=0))
        assert np.allclose(amp[mask], 0.1**1.5, rtol=1e-14)
        assert np.all(amp[~mask] == 0)
        assert np.max(np.abs(g.divergence(v))) < 1e-15
        assert g.hermitian_defect(v) < 1e-16
        # the physical field is real: round trip reproduces the coefficients
        assert np.max(np.abs(g.forward(g.inverse(v)) - v)) < 1e-15

    def test_orthogonality_each_mode(self):
        g = Grid(3, 32, 30.0)
        v = make_divfree_lowfreq(g, DataSpec())
        kdotv = sum(g.k[a] * v[a] for a in range(3))
        assert np.max(np.abs(kdotv)) < 1e-16

    def test_seeded_determinism(self):
        g = Grid(3, 16, 4 * np.pi)
        a = make_divfree_lowfreq(g, DataSpec(seed=7))
        b = make_divfree_lowfreq(g, DataSpec(seed=7))
        c = make_divfree_lowfreq(g, DataSpec(seed=8))
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_empty_ball(self):
        with pytest.raises(ValueError, match="no lattice mode"):
            make_divfree_lowfreq(Grid(3, 16, 2.0), DataSpec())

    def test_ball_beyond_band(self):
        with pytest.raises(ValueError, match="dealiased"):
            make_divfree_lowfreq(Grid(3, 8, 2 * np.pi), DataSpec(radius=3.0))

    def test_two_dimensional(self):
        g = Grid(2, 32, 20.0)
        v = make_divfree_lowfreq(g, DataSpec())
        assert np.max(np.abs(g.divergence(v))) < 1e-15
        assert g.hermitian_defect(v) == 0

    def test_gaussian_pattern_box_independent(self):
        spec = DataSpec(pattern="gaussian", width=2.0)
        vals = []
        for L, N in ((32.0, 16), (64.0, 32)):
            g = Grid(3, N, L)
            v = make_divfree_lowfreq(g, spec)
            assert np.max(np.abs(g.divergence(v))) < 1e-15
            vals.append(lp_norm(g, g.inverse(v), 2))
        assert vals[1] == pytest.approx(vals[0], rel=2e-2)


class TestDensity:
    def test_constant(self):
        g = Grid(3, 16, 5.0)
        rho = g.inverse(make_density(g, DataSpec(rho_base=2.0, rho_amplitude=0.0)))
        assert np.allclose(rho, 2.0, rtol=1e-14)

    def test_positive_minimum(self):
        g = Grid(3, 16, 5.0)
        rho = g.inverse(make_density(g, DataSpec(rho_base=0.01, rho_amplitude=0.005)))
        assert rho.min() >= 0.005 * (1 - 1e-12)

    @given(st.integers(0, 2**63))
    def test_exact_mean(self, seed):
        g = Grid(3, 16, 5.0)
        rho = g.inverse(make_density(g, DataSpec(seed=seed, rho_base=1.5, rho_amplitude=0.7)))
        assert rho.mean() == pytest.approx(1.5, rel=1e-14)
        assert rho.min() > 1.5 - 0.7 - 1e-12


class TestU0:
    def test_budget(self):
        g = Grid(3, 16, 2 * np.pi)
        spec = DataSpec(delta0=0.3)
        assert sobolev_norm(g, make_u0(g, spec), spec.s + 2) == pytest.approx(0.1, rel=1e-12)

    def test_half_budget(self):
        g = Grid(3, 16, 2 * np.pi)
        spec = DataSpec(delta0=0.3, u_norm=0.05)
        assert sobolev_norm(g, make_u0(g, spec), 5) == pytest.approx(0.3 / 6, abs=1e-12)

    def test_zero(self):
        g = Grid(3, 16, 2 * np.pi)
        assert np.max(np.abs(make_u0(g, DataSpec(u_norm=0.0)))) == 0

    def test_real_and_deterministic(self):
        g = Grid(3, 16, 2 * np.pi)
        a = make_u0(g, DataSpec(seed=5))
        assert g.hermitian_defect(a) < 1e-16
        assert np.array_equal(a, make_u0(g, DataSpec(seed=5)))


class TestSmallness:
    def test_zero_data(self):
        g = Grid(3, 16, 2 * np.pi)
        z = g.zeros()
        rep = smallness_report(g, z, g.zeros(3), g.zeros(3), 3, 0.1)
        assert rep["sum_decay_upper"] == 0 and rep["sum_decay_lower"] == 0
        assert rep["pass_decay_upper"] and rep["pass_decay_lower"]
        assert rep["I0"] == pytest.approx(0.1)

    def test_per_field_budgets(self):
        g = Grid(3, 16, 2 * np.pi)
        d = 0.3
        rho = g.zeros()
        rho[1, 0, 0] = rho[-1, 0, 0] = d / 3 / np.sqrt(2) / np.sqrt(1 + 1 + 1 + 1)
        u = make_u0(g, DataSpec(delta0=d))
        v = make_divfree_lowfreq(g, DataSpec(delta0=d, radius=1.0))
        v *= (d / 3) / sobolev_norm(g, v, 4)
        rep = smallness_report(g, rho, u, v, 3, d)
        assert rep["sum_decay_upper"] <= d * (1 + 1e-12)
        assert rep["pass_decay_upper"]
        # independent recomputation
        assert rep["h_sp1_v"] == pytest.approx(sobolev_norm(g, v, 4), rel=1e-12)

    def test_large_l1_small_sobolev(self):
        # a wide, low-amplitude field: tiny H^(s+1) norm, large L1 norm
        g = Grid(3, 16, 200.0)
        v = make_divfree_lowfreq(g, DataSpec(delta0=0.01, radius=0.1))
        v *= 0.02 / sobolev_norm(g, v, 4)
        rep = smallness_report(g, g.zeros(), g.zeros(3), v, 3, 0.05)
        assert rep["pass_decay_upper"]
        assert not rep["pass_decay_lower"]
        assert rep["l1_v"] > 0.05

    def test_state_builder(self):
        g = Grid(3, 16, 2 * np.pi)
        st = make_initial_state(g, DataSpec(delta0=0.2, radius=2.0))
        assert st.t == 0.0 and st.rho.shape == g.spectral_shape and st.v.shape == (3,) + g.spectral_shape
