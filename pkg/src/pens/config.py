"""Run configuration: TOML files with fixed sections, preset defaults and validation."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .diagnostics import MIN_FIT_SAMPLES
from .dynamics import HOOKS, SchemeConfig
from .initial import PATTERNS, DataSpec
from .spectral import Grid


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending dotted key when known."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


DECAY_PRESETS = ("thm1-decay", "thm2-sandwich", "weighted")
# presets whose criteria fit decay exponents
FIT_PRESETS = ("thm1-decay", "thm2-sandwich", "heat-oracle")
PRESETS = ("energy-identity", "heat-oracle", "thm1-decay", "thm2-sandwich", "char-check",
           "weighted", "convergence")

_TAU = 2.0 * math.pi

# section -> key -> default; None marks "no default" (must come from preset or file)
BASE = {
    "experiment": {"preset": None, "description": ""},
    "grid": {"n": 3, "N": 64, "L": 128.0},
    "scheme": {"dt": 0.02, "t_end": 120.0, "sample_interval": 0.5, "dealias": True, "hooks": []},
    # dilute particle phase: small-data decay needs a small density
    "data": {"delta0": 0.05, "rho_base": 0.01, "rho_amplitude": 0.005, "radius": 1.0, "seed": 0,
             "s": 3, "pattern": "ball", "width": 3.0, "u_norm": "budget"},
    "fit": {"window": "auto", "floor": 1e-10},
    "heat": {"calibration": "t0"},
    "output": {"dir": "out", "snapshots": False, "figures": True},
    "convergence": {"refinements": 3},
    "characteristics": {"probes_per_axis": 16, "rtol": 1e-10, "tolerance": 1e-3},
}

PRESET_DEFAULTS = {
    "energy-identity": {
        "grid": {"n": 3, "N": 32, "L": _TAU},
        "scheme": {"dt": 1e-3, "t_end": 0.2, "sample_interval": "step"},
        "data": {"delta0": 0.2, "radius": 2.0, "rho_base": 1.0, "rho_amplitude": 0.5},
    },
    "heat-oracle": {
        "grid": {"n": 3, "N": 64, "L": 128.0},
        "scheme": {"dt": 0.1, "t_end": 120.0, "sample_interval": 1.0,
                   "hooks": ["no-nonlinear", "no-drag"]},
    },
    # decay presets use the automatic window [0.1 T, T], i.e. [12, 120] at the defaults
    "thm1-decay": {},
    "thm2-sandwich": {},
    "weighted": {},
    "char-check": {
        "grid": {"n": 3, "N": 32, "L": _TAU},
        "scheme": {"dt": 0.01, "t_end": 5.0, "sample_interval": 0.05},
        "data": {"delta0": 0.2, "radius": 2.0, "seed": 3, "u_norm": 20.0, "rho_base": 1.0,
                 "rho_amplitude": 0.5},
    },
    "convergence": {
        "grid": {"n": 3, "N": 32, "L": _TAU},
        "scheme": {"dt": 0.02, "t_end": 1.0, "sample_interval": 1.0},
        "data": {"delta0": 0.2, "radius": 2.0, "seed": 1, "u_norm": 0.2, "rho_base": 1.0,
                 "rho_amplitude": 0.5},
    },
}

_TYPES = {
    ("experiment", "preset"): str,
    ("experiment", "description"): str,
    ("grid", "n"): int,
    ("grid", "N"): int,
    ("grid", "L"): float,
    ("scheme", "dt"): float,
    ("scheme", "t_end"): (float, "window"),
    ("scheme", "sample_interval"): (float, "step"),
    ("scheme", "dealias"): bool,
    ("scheme", "hooks"): list,
    ("data", "delta0"): float,
    ("data", "rho_base"): float,
    ("data", "rho_amplitude"): float,
    ("data", "radius"): float,
    ("data", "seed"): int,
    ("data", "s"): int,
    ("data", "pattern"): str,
    ("data", "width"): float,
    ("data", "u_norm"): (float, "budget"),
    ("fit", "window"): (list, "auto"),
    ("fit", "floor"): float,
    ("heat", "calibration"): str,
    ("output", "dir"): str,
    ("output", "snapshots"): bool,
    ("output", "figures"): bool,
    ("convergence", "refinements"): int,
    ("characteristics", "probes_per_axis"): int,
    ("characteristics", "rtol"): float,
    ("characteristics", "tolerance"): float,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for sec, vals in over.items():
        out.setdefault(sec, {}).update(copy.deepcopy(vals))
    return out


def _coerce(key: str, value, kind):
    if isinstance(kind, tuple):
        typ, token = kind
        if value == token:
            return value
        try:
            return _coerce(key, value, typ)
        except ConfigError:
            raise ConfigError(f"expected {typ.__name__} or {token!r}, got {value!r}", key) from None
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        if not math.isfinite(value):
            raise ConfigError(f"expected a finite number, got {value!r}", key)
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key)
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", key)
        return list(value)
    raise AssertionError(kind)


@dataclass
class RunConfig:
    """Resolved, validated configuration.  ``values`` holds every section in full."""

    values: dict
    raw: dict
    source: str | None = None

    # -- typed views ---------------------------------------------------------
    @property
    def preset(self) -> str:
        return self.values["experiment"]["preset"]

    @property
    def grid(self) -> Grid:
        g = self.values["grid"]
        return Grid(g["n"], g["N"], g["L"])

    @property
    def scheme(self) -> SchemeConfig:
        s = self.values["scheme"]
        return SchemeConfig(dt=s["dt"], dealias=s["dealias"], hooks=frozenset(s["hooks"]))

    @property
    def t_end(self) -> float:
        return self.values["scheme"]["t_end"]

    @property
    def sample_interval(self) -> float:
        return self.values["scheme"]["sample_interval"]

    @property
    def data(self) -> DataSpec:
        d = dict(self.values["data"])
        d["u_norm"] = None if d["u_norm"] == "budget" else d["u_norm"]
        return DataSpec(**d)

    @property
    def seed(self) -> int:
        return self.values["data"]["seed"]

    @property
    def fit_window(self) -> tuple:
        w = self.values["fit"]["window"]
        return tuple(w)

    @property
    def out_dir(self) -> Path:
        return Path(self.values["output"]["dir"])

    def section(self, name: str) -> dict:
        return self.values[name]

    def config_hash(self) -> str:
        canon = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def to_toml(self) -> str:
        return tomli_w.dumps(self.values)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """New config with dotted-key overrides applied to the file values and re-validated."""
        raw = copy.deepcopy(self.raw)
        for dotted, value in overrides.items():
            sec, _, key = dotted.partition(".")
            if not key:
                raise ConfigError("override keys must look like section.key", dotted)
            raw.setdefault(sec, {})[key] = value
        return build_config(raw, self.source)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def parse_config_text(text: str, source: str | None = None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"parse error: {exc}") from None
    return build_config(raw, source)


def build_config(raw: dict, source: str | None = None) -> RunConfig:
    """Validate ``raw`` (already-parsed sections) against the schema and preset defaults."""
    for sec, vals in raw.items():
        if sec not in BASE:
            raise ConfigError(f"unknown section (known: {', '.join(BASE)})", sec)
        if not isinstance(vals, dict):
            raise ConfigError("expected a section table", sec)
        for key in vals:
            if key not in BASE[sec]:
                raise ConfigError(f"unknown key (known: {', '.join(BASE[sec])})", f"{sec}.{key}")

    preset = raw.get("experiment", {}).get("preset")
    if preset is None:
        raise ConfigError("missing experiment preset", "experiment.preset")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (known: {', '.join(PRESETS)})",
                          "experiment.preset")
    values = _merge(_merge(BASE, PRESET_DEFAULTS[preset]), raw)
    for sec, vals in values.items():
        for key, val in vals.items():
            values[sec][key] = _coerce(f"{sec}.{key}", val, _TYPES[(sec, key)])
    _validate(values)
    return RunConfig(values, copy.deepcopy(raw), source)


def _validate(v: dict):
    g, s, d = v["grid"], v["scheme"], v["data"]
    try:
        grid = Grid(g["n"], g["N"], g["L"])
    except ValueError as exc:
        key = "grid.n" if "dimension" in str(exc) else "grid.N" if "modes" in str(exc) else "grid.L"
        raise ConfigError(str(exc), key) from None

    if not s["dt"] > 0:
        raise ConfigError(f"time step must be positive, got {s['dt']}", "scheme.dt")
    for h in s["hooks"]:
        if h not in HOOKS:
            raise ConfigError(f"unknown hook {h!r} (known: {', '.join(sorted(HOOKS))})",
                              "scheme.hooks")
    if s["sample_interval"] == "step":
        s["sample_interval"] = s["dt"]
    if not s["sample_interval"] > 0:
        raise ConfigError("sample interval must be positive", "scheme.sample_interval")
    steps = s["sample_interval"] / s["dt"]
    if abs(steps - round(steps)) > 1e-9 * steps or round(steps) < 1:
        raise ConfigError("sample interval must be a whole number of time steps",
                          "scheme.sample_interval")

    window = grid.observation_window
    preset = v["experiment"]["preset"]
    if s["t_end"] == "window":
        count = math.floor(window / s["sample_interval"] + 1e-9)
        if count < 1:
            raise ConfigError("observation window shorter than one sample interval", "scheme.t_end")
        s["t_end"] = count * s["sample_interval"]
    if not s["t_end"] > 0:
        raise ConfigError("end time must be positive", "scheme.t_end")
    samples = s["t_end"] / s["sample_interval"]
    if abs(samples - round(samples)) > 1e-9 * samples:
        raise ConfigError("end time must be a whole number of sample intervals", "scheme.t_end")
    if preset in DECAY_PRESETS and s["t_end"] > window * (1 + 1e-12):
        raise ConfigError(
            f"t_end = {s['t_end']} exceeds the observation window 0.3 (L / 2 pi)^2 = {window:.4g} "
            f"for decay preset {preset!r}", "scheme.t_end")

    try:
        DataSpec(**{**d, "u_norm": None if d["u_norm"] == "budget" else d["u_norm"]})
    except ValueError as exc:
        msg = str(exc)
        key = msg.split(" ", 1)[0] if msg.startswith("data.") else "data"
        raise ConfigError(msg.split(" ", 1)[1] if key != "data" else msg, key) from None
    if d["pattern"] not in PATTERNS:  # pragma: no cover - caught by DataSpec
        raise ConfigError("unknown pattern", "data.pattern")

    f = v["fit"]
    if f["window"] == "auto":
        f["window"] = [0.1 * s["t_end"], s["t_end"]]
    w = f["window"]
    if len(w) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in w):
        raise ConfigError("expected [start, end]", "fit.window")
    w[:] = [float(w[0]), float(w[1])]
    if not 0 <= w[0] < w[1] <= s["t_end"] * (1 + 1e-12):
        raise ConfigError(f"window {w} must satisfy 0 <= start < end <= t_end", "fit.window")
    if preset in FIT_PRESETS:
        inside = math.floor(w[1] / s["sample_interval"] + 1e-9) - math.ceil(w[0] / s["sample_interval"] - 1e-9) + 1
        if inside < MIN_FIT_SAMPLES:
            raise ConfigError(f"window {w} holds {inside} samples; decay fits need {MIN_FIT_SAMPLES}",
                              "fit.window")
    if not f["floor"] > 0:
        raise ConfigError("noise floor must be positive", "fit.floor")

    if v["heat"]["calibration"] not in ("chain", "t0"):
        raise ConfigError("expected 'chain' or 't0'", "heat.calibration")
    if v["convergence"]["refinements"] < 3:
        raise ConfigError("need at least 3 step sizes to estimate an order",
                          "convergence.refinements")
    c = v["characteristics"]
    if c["probes_per_axis"] < 1 or g["N"] % c["probes_per_axis"]:
        raise ConfigError(f"must divide grid.N = {g['N']}", "characteristics.probes_per_axis")
    for key in ("rtol", "tolerance"):
        if not c[key] > 0:
            raise ConfigError("must be positive", f"characteristics.{key}")


def parse_param(spec: str) -> tuple[str, list]:
    """``section.key=v1,v2,...`` -> (dotted key, [values]) with TOML value syntax."""
    key, sep, rest = spec.partition("=")
    key = key.strip()
    if not sep or "." not in key:
        raise ConfigError(f"expected section.key=v1,v2,... got {spec!r}", "--param")
    sec, _, name = key.partition(".")
    if sec not in BASE or name not in BASE[sec]:
        raise ConfigError("unknown key", key)
    values = []
    for item in filter(None, (x.strip() for x in rest.split(","))):
        try:
            values.append(tomllib.loads(f"x = {item}")["x"])
        except tomllib.TOMLDecodeError:
            values.append(item)
    if not values:
        raise ConfigError("no values given", key)
    return key, values


def preset_template(preset: str) -> str:
    """TOML text of a preset's resolved defaults."""
    return build_config({"experiment": {"preset": preset}}).to_toml()
