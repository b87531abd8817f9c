import json
import math

import numpy as np
import pytest

from pens.config import build_config
from pens.diagnostics import TimeSeries
from pens.presets import (
    EXIT_ABORT, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, Criterion, Report, expand_grid, run_preset,
    sweep,
)


def small(preset, **over):
    raw = {"experiment": {"preset": preset},
           "grid": {"n": 3, "N": 16, "L": 4 * math.pi},
           "data": {"delta0": 0.2, "radius": 1.0},
           "output": {"figures": False}}
    for key, val in over.items():
        sec, name = key.split("__")
        raw.setdefault(sec, {})[name] = val
    return build_config(raw)


@pytest.fixture(scope="module")
def heat_run(tmp_path_factory):
    cfg = small("heat-oracle", scheme__dt=0.1, scheme__t_end=10.0, scheme__sample_interval=0.5,
                output__figures=True)
    out = tmp_path_factory.mktemp("heat")
    return cfg, out, run_preset(cfg, out_dir=out)


class TestReport:
    def test_round_trip(self):
        r = Report("weighted", provenance={"config_hash": "abc"})
        r.add(Criterion("a", True, 1.5, "x"))
        r.add(Criterion("b", False, {"k": np.float64(2.0)}, "y", "why"))
        back = Report.from_dict(json.loads(r.to_json()))
        assert back.to_dict() == r.to_dict()
        assert back.exit_code == EXIT_FAIL

    def test_duplicate(self):
        r = Report("weighted")
        r.add(Criterion("a", True, 1, ""))
        with pytest.raises(ValueError):
            r.add(Criterion("a", True, 1, ""))

    def test_exit_codes(self):
        r = Report("weighted")
        assert r.exit_code == EXIT_PASS
        r.abort = {"time": 1.0, "cause": "x"}
        assert r.exit_code == EXIT_ABORT

    def test_line_is_tab_separated(self):
        assert Criterion("a", True, 0.5, "t").line() == "a\tPASS\t0.5\tt"


class TestHeatOracleRun:
    def test_passes(self, heat_run):
        cfg, out, rep = heat_run
        assert rep.criterion("heat-oracle-match").measured <= 1e-12
        assert rep.criterion("heat-difference-zero").passed
        assert rep.criterion("mass-conservation").passed

    def test_criteria_unique(self, heat_run):
        names = [c.name for c in heat_run[2].criteria]
        assert len(names) == len(set(names))

    def test_outputs(self, heat_run):
        cfg, out, rep = heat_run
        for name in ("config.toml", "diagnostics.csv", "report.json", "decay.png", "energy.png",
                     "heat.png"):
            assert (out / name).exists(), name
        series = TimeSeries.from_csv(out / "diagnostics.csv")
        assert series.column("t")[-1] == 10.0 and len(series) == 21
        assert Report.load(out / "report.json").provenance["config_hash"] == cfg.config_hash()

    def test_reproducible_from_embedded_config(self, heat_run, tmp_path):
        cfg, out, rep = heat_run
        stored = Report.load(out / "report.json")
        again_cfg = build_config(stored.provenance["config"])
        assert again_cfg.config_hash() == cfg.config_hash()
        again = run_preset(again_cfg, out_dir=tmp_path)
        assert [c.line() for c in again.criteria] == [c.line() for c in rep.criteria]
        assert (tmp_path / "diagnostics.csv").read_bytes() == (out / "diagnostics.csv").read_bytes()


def test_energy_identity_small(tmp_path):
    cfg = small("energy-identity", scheme__t_end=0.02)
    rep = run_preset(cfg, out_dir=tmp_path)
    assert rep.criterion("energy-identity-residual").passed
    assert "residual_dt_half" in rep.extra["residuals"]


def test_convergence_small(tmp_path):
    cfg = small("convergence", scheme__dt=0.05, scheme__t_end=0.5, scheme__sample_interval=0.5,
                data__u_norm=0.05)
    rep = run_preset(cfg, out_dir=tmp_path)
    orders = rep.extra["convergence"]["orders"]
    assert len(orders) == 1 and 1.8 <= orders[0] <= 2.2


def test_abort_reported(tmp_path):
    # dt far beyond the advective limit for a fast initial u
    cfg = small("convergence", scheme__dt=1.0, scheme__t_end=20.0, scheme__sample_interval=1.0,
                data__u_norm=50.0)
    rep = run_preset(cfg, out_dir=tmp_path)
    assert rep.exit_code == EXIT_ABORT
    c = rep.criterion("simulation-completed")
    assert not c.passed and c.detail
    assert json.loads((tmp_path / "report.json").read_text())["abort"]["cause"]


def test_two_dimensional_label(tmp_path):
    cfg = small("heat-oracle", grid__n=2, grid__N=16, scheme__dt=0.1, scheme__t_end=2.0,
                scheme__sample_interval=0.2)
    rep = run_preset(cfg, out_dir=tmp_path)
    assert any("n >= 3" in note for note in rep.notes)


class TestSweep:
    def test_expand(self):
        assert expand_grid([]) == []
        assert expand_grid([("a.x", [1, 2]), ("b.y", [3])]) == [{"a.x": 1, "b.y": 3}, {"a.x": 2, "b.y": 3}]
        assert expand_grid([("a.x", [1, 2]), ("b.y", [3, 4])], zip_params=True) == [
            {"a.x": 1, "b.y": 3}, {"a.x": 2, "b.y": 4}]

    def test_zip_length_mismatch(self):
        from pens.config import ConfigError

        with pytest.raises(ConfigError):
            expand_grid([("a.x", [1, 2]), ("b.y", [3])], zip_params=True)

    def test_empty(self, tmp_path):
        rep = sweep(small("weighted", scheme__t_end="window"), [], out_dir=tmp_path)
        assert rep.cells == [] and rep.criteria == [] and rep.exit_code == EXIT_PASS

    def test_singleton_matches_run(self, heat_run, tmp_path):
        cfg, out, rep = heat_run
        srep = sweep(cfg, [("data.seed", [cfg.data.seed])], out_dir=tmp_path)
        (cell,) = srep.cells
        assert cell.exit_code == rep.exit_code
        cell_csv = tmp_path / "cell_000" / "diagnostics.csv"
        assert cell_csv.read_bytes() == (out / "diagnostics.csv").read_bytes()
        assert (tmp_path / "sweep.tsv").exists() and (tmp_path / "sweep.json").exists()

    def test_bad_cell_recorded(self, tmp_path):
        cfg = small("heat-oracle", scheme__dt=0.1, scheme__t_end=2.0, scheme__sample_interval=0.2)
        rep = sweep(cfg, [("scheme.dt", [0.1, -1.0])], out_dir=tmp_path)
        assert [c.status for c in rep.cells][1] == "config-error"
        assert rep.cells[0].status in ("passed", "failed")
        assert rep.exit_code == EXIT_CONFIG
