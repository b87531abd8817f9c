import math

import pytest
from hypothesis import given, strategies as st

from pens.config import (
    PRESETS, ConfigError, build_config, parse_config, parse_config_text, parse_param,
    preset_template,
)


def cfg(text):
    return parse_config_text(text)


class TestDefaults:
    def test_thm1(self):
        c = build_config({"experiment": {"preset": "thm1-decay"}})
        assert (c.grid.n, c.grid.N, c.grid.L) == (3, 64, 128.0)
        assert c.t_end == 120.0 and c.sample_interval == 0.5
        assert c.fit_window == (12.0, 120.0)
        assert c.scheme.dt == 0.02
        assert c.data.u_norm is None  # the delta0 / 3 budget

    @pytest.mark.parametrize("preset", PRESETS)
    def test_template_round_trip(self, preset):
        text = preset_template(preset)
        c = cfg(text)
        assert c.preset == preset
        assert cfg(c.to_toml()).config_hash() == c.config_hash()

    def test_step_sampling(self):
        c = build_config({"experiment": {"preset": "energy-identity"}})
        assert c.sample_interval == c.scheme.dt

    def test_window_token(self):
        c = cfg('[experiment]\npreset="weighted"\n[grid]\nL=64.0\nN=32\n[scheme]\nt_end="window"\ndt=0.5\nsample_interval=1.0\n')
        limit = 0.3 * (64 / (2 * math.pi)) ** 2
        assert c.t_end <= limit and limit - c.t_end < 1.0
        assert c.fit_window == pytest.approx((0.1 * c.t_end, c.t_end))


class TestErrors:
    @pytest.mark.parametrize("text,key", [
        ('[experiment]\npreset="thm1-decay"\n[scheme]\ndt=-1.0\n', "scheme.dt"),
        ('[experiment]\npreset="thm1-decay"\n[scheme]\nt_end=200.0\n', "scheme.t_end"),
        ('[experiment]\npreset="thm1-decay"\n[grid]\nNN=3\n', "grid.NN"),
        ('[experiment]\npreset="thm1-decay"\n[data]\ndelta0=1.5\n', "data.delta0"),
        ('[experiment]\npreset="nope"\n', "experiment.preset"),
        ('[grid]\nN=16\n', "experiment.preset"),
        ('[experiment]\npreset="thm1-decay"\n[bogus]\nx=1\n', "bogus"),
        ('[experiment]\npreset="thm1-decay"\n[scheme]\nsample_interval=0.03\n', "scheme.sample_interval"),
        ('[experiment]\npreset="thm1-decay"\n[scheme]\nhooks=["fast"]\n', "scheme.hooks"),
        ('[experiment]\npreset="thm1-decay"\n[grid]\nN=7\n', "grid.N"),
        ('[experiment]\npreset="convergence"\n[convergence]\nrefinements=2\n', "convergence.refinements"),
        ('[experiment]\npreset="thm1-decay"\n[fit]\nwindow=[50.0, 10.0]\n', "fit.window"),
        ('[experiment]\npreset="thm1-decay"\n[grid]\nN="big"\n', "grid.N"),
    ])
    def test_key_named(self, text, key):
        with pytest.raises(ConfigError) as ei:
            cfg(text)
        assert ei.value.key == key
        assert str(ei.value).startswith(key + ":")

    def test_parse_error_location(self):
        with pytest.raises(ConfigError, match="line 1, column"):
            cfg("[experiment\n")

    def test_dt_message(self):
        with pytest.raises(ConfigError, match="scheme.dt: time step must be positive"):
            cfg('[experiment]\npreset="thm1-decay"\n[scheme]\ndt=0.0\n')

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "absent.toml")


class TestOverrides:
    def test_override_recomputes_window(self):
        base = build_config({"experiment": {"preset": "thm1-decay"}})
        c = base.with_overrides({"grid.L": 64.0, "grid.N": 32, "scheme.t_end": "window",
                                 "scheme.sample_interval": 1.0, "scheme.dt": 0.5})
        assert c.grid.L == 64.0 and c.t_end < 120
        assert c.fit_window[1] == c.t_end

    def test_hash_changes(self):
        a = build_config({"experiment": {"preset": "thm1-decay"}})
        assert a.with_overrides({"data.seed": 1}).config_hash() != a.config_hash()
        assert a.with_overrides({}).config_hash() == a.config_hash()

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            build_config({"experiment": {"preset": "thm1-decay"}}).with_overrides({"grid.M": 3})


class TestParam:
    def test_values(self):
        assert parse_param("grid.L=64,128.0") == ("grid.L", [64, 128.0])
        assert parse_param('data.pattern="ball","gaussian"') == ("data.pattern", ["ball", "gaussian"])

    @pytest.mark.parametrize("bad", ["gridL=1", "grid.L=", "=1,2", "grid.M=1"])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_param(bad)

    @given(st.lists(st.integers(1, 10**6), min_size=1, max_size=5))
    def test_integer_lists(self, xs):
        assert parse_param("data.seed=" + ",".join(map(str, xs))) == ("data.seed", xs)
