"""Line-oriented ``key = value`` configuration with ``[section]`` headers."""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, fields

from ..model import DomainError, ModelParams
from ..noise import DetectionChain


class ConfigError(ValueError):
    def __init__(self, msg, key=None, line=None):
        where = ""
        if key is not None:
            where = f"{key}"
            if line is not None:
                where += f" (line {line})"
            where += ": "
        super().__init__(where + msg)
        self.key = key
        self.line = line


_MODEL_DEFAULTS = {f.name: f.default for f in fields(ModelParams)}

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "model": {
        **{k: (type(v) if not isinstance(v, bool) else bool, v) for k, v in _MODEL_DEFAULTS.items()},
        "gamma_cav": (float, None),
    },
    "drive": {
        "I_in": (str, "1.5x-threshold"),
        "theta": (float, -33.8),
        "p_frozen": (float, 0.0),
    },
    "scan": {
        "theta_min": (float, -38.0),
        "theta_max": (float, -30.0),
        "theta_points": (int, 401),
        "scan_time": (float, 20e-3),
        "dt_out": (float, 5e-8),
        "tol": (float, 1e-8),
        "window": (float, 50e-6),
        "trace_every": (int, 20),
    },
    "noise": {
        "omega_mhz": (float, 5.0),
        "theta_grid": (int, 360),
        "branch": (str, "lower"),
        "eta_pd": (float, 0.94),
        "eta_hom": (float, 0.875),
        "cmrr_db": (float, 20.0),
    },
    "trace": {
        "C0": (float, 300.0),
        "delta_a": (float, 20.0),
        "pumping_on": (bool, False),
        "T_decay": (float, 10e-3),
        "theta": (float, -15.0),
        "I_in": (float, 3.0),
        "duration": (float, 30e-3),
        "dt": (float, 20e-6),
        "lo_freq": (float, 1e3),
        "lo_amplitude": (float, math.pi / 2),
        "lo_offset": (float, math.pi / 2),
        "off_resonance": (float, 10.0),
        "omega_mhz": (float, 5.0),
    },
    "dsp": {
        "depth": (float, 0.5),
        "f_mod": (float, 1e3),
        "f_c_video": (float, 300.0),
        "f_c_numeric": (float, 1e3),
        "gain_cap": (float, 100.0),
        "duration": (float, 50e-3),
        "dt": (float, 1e-6),
    },
    "sweep": {
        "kernel": (str, "steady"),
        "axes": (str, "C=0:400:9; I_in_rel=0.5:3:11"),
        "max_points": (int, 10000),
        "theta_step": (float, 0.1),
        "t_span": (float, 1e-3),
        "omega_mhz": (float, 5.0),
    },
    "run": {
        "output_dir": (str, "out"),
        "seed": (int, 0),
        "workers": (int, 0),
    },
}

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _convert(typ, raw: str, key, line):
    raw = raw.strip()
    try:
        if typ is bool:
            return _BOOL[raw.lower()]
        if typ is int:
            return int(raw)
        if typ is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"cannot parse {raw!r} as {typ.__name__}", key, line) from None


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    values: dict  # section -> key -> value, fully resolved

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    @property
    def model(self) -> ModelParams:
        m = {k: v for k, v in self.values["model"].items() if k != "gamma_cav"}
        return ModelParams(**m)

    @property
    def chain(self) -> DetectionChain:
        n = self.values["noise"]
        return DetectionChain(n["eta_pd"], n["eta_hom"], n["cmrr_db"])

    def echo(self) -> str:
        """Config text that reproduces this run; every default materialized."""
        lines = []
        for sec, keys in self.values.items():
            lines.append(f"[{sec}]")
            for k, v in keys.items():
                lines.append(f"{k} = {_format(v)}")
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        text = self.echo()
        return parse_config(text, overrides)


def _line_numbers(text: str) -> dict:
    out = {}
    sec = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            sec = m.group(1).strip()
            continue
        m = re.match(r"^([^=#;]+?)\s*=", s)
        if m and sec is not None:
            out[(sec, m.group(1).strip())] = n
    return out


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a config.

    ``overrides`` maps ``"section.key"`` to raw string values (CLI flags) and
    wins over the file.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        raise ConfigError(str(e).splitlines()[0], None, line) from None
    lines = _line_numbers(text)
    raw: dict[tuple, tuple] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError("unknown section", f"[{sec}]", None)
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError("unknown key", f"{sec}.{key}", lines.get((sec, key)))
            raw[(sec, key)] = (val, lines.get((sec, key)))
    for dotted, val in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError("unknown key", dotted, None)
        raw[(sec, key)] = (str(val), None)

    values: dict[str, dict] = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, (typ, default) in keys.items():
            if (sec, key) in raw:
                v, line = raw[(sec, key)]
                values[sec][key] = _convert(typ, v, f"{sec}.{key}", line)
            else:
                values[sec][key] = default

    _resolve_model(values, raw)
    cfg = RunConfig(values)
    _validate(cfg, raw)
    return cfg


def _resolve_model(values, raw):
    m = values["model"]
    g = m["gamma_cav"]
    t_given = ("model", "t_mirror") in raw
    if g is not None:
        line = raw.get(("model", "gamma_cav"), (None, None))[1]
        if g <= 0 or g >= 0.5:
            raise ConfigError("gamma_cav must lie in (0, 0.5)", "model.gamma_cav", line)
        if t_given:
            t2 = m["t_mirror"] ** 2 / 2
            if abs(t2 - g) > 1e-6 * g:
                raise ConfigError(f"gamma_cav = {g} contradicts t_mirror**2/2 = {t2:.6g}", "model.gamma_cav", line)
        else:
            m["t_mirror"] = math.sqrt(2 * g)
    m["gamma_cav"] = m["t_mirror"] ** 2 / 2


def _validate(cfg: RunConfig, raw):
    def line(sec, key):
        return raw.get((sec, key), (None, None))[1]

    try:
        cfg.model
    except DomainError as e:
        key = next((k for k in SCHEMA["model"] if str(e).startswith(k)), None)
        raise ConfigError(str(e), f"model.{key}" if key else "model", line("model", key)) from None
    try:
        cfg.chain
    except DomainError as e:
        key = str(e).split()[0]
        raise ConfigError(str(e), f"noise.{key}", line("noise", key)) from None
    v = cfg.values
    try:
        parse_intensity(v["drive"]["I_in"])
    except ValueError as e:
        raise ConfigError(str(e), "drive.I_in", line("drive", "I_in")) from None
    positive = [("scan", "scan_time"), ("scan", "dt_out"), ("scan", "window"), ("noise", "omega_mhz"),
                ("trace", "T_decay"), ("trace", "duration"), ("trace", "dt"), ("trace", "lo_freq"),
                ("trace", "omega_mhz"), ("dsp", "f_mod"), ("dsp", "f_c_video"), ("dsp", "f_c_numeric"),
                ("dsp", "duration"), ("dsp", "dt"), ("sweep", "theta_step"), ("sweep", "t_span")]
    for sec, key in positive:
        if not v[sec][key] > 0:
            raise ConfigError("must be > 0", f"{sec}.{key}", line(sec, key))
    if not 1e-12 <= v["scan"]["tol"] <= 1e-3:
        raise ConfigError("must lie in [1e-12, 1e-3]", "scan.tol", line("scan", "tol"))
    if v["scan"]["trace_every"] < 1:
        raise ConfigError("must be >= 1", "scan.trace_every", line("scan", "trace_every"))
    if v["scan"]["theta_points"] < 2:
        raise ConfigError("need at least 2 points", "scan.theta_points", line("scan", "theta_points"))
    if not 0 < v["dsp"]["depth"] <= 1:
        raise ConfigError("must lie in (0, 1]", "dsp.depth", line("dsp", "depth"))
    if v["dsp"]["gain_cap"] <= 1:
        raise ConfigError("must be > 1", "dsp.gain_cap", line("dsp", "gain_cap"))
    if v["noise"]["branch"] not in ("lower", "upper"):
        raise ConfigError("must be 'lower' or 'upper'", "noise.branch", line("noise", "branch"))
    if v["sweep"]["kernel"] not in ("steady", "oscillation", "smin"):
        raise ConfigError("must be steady, oscillation or smin", "sweep.kernel", line("sweep", "kernel"))
    if v["run"]["workers"] < 0:
        raise ConfigError("must be >= 0", "run.workers", line("run", "workers"))
    if v["trace"]["I_in"] < 0:
        raise ConfigError("must be >= 0", "trace.I_in", line("trace", "I_in"))


_REL = re.compile(r"^\s*([0-9.eE+-]+)\s*x-threshold\s*$")


def parse_intensity(spec: str):
    """``"2.5"`` -> ``("abs", 2.5)``; ``"1.5x-threshold"`` -> ``("rel", 1.5)``."""
    m = _REL.match(spec)
    try:
        if m:
            v = float(m.group(1))
            kind = "rel"
        else:
            v = float(spec)
            kind = "abs"
    except ValueError:
        raise ValueError(f"cannot parse input intensity {spec!r}") from None
    if not (math.isfinite(v) and v >= 0):
        raise ValueError("input intensity must be finite and >= 0")
    return kind, v
