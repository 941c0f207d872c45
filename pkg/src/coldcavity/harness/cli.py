"""Command-line entry point: ``coldcavity <command> [options]``."""
from __future__ import annotations

import argparse
import datetime
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .. import dsp, dynamics, noise, steady
from ..model import DomainError
from .config import ConfigError, RunConfig, parse_config, parse_intensity
from .sweep import parse_axes, parse_range, sweep
from .table import CODE_VERSION, ResultTable, write_table

COMMANDS = ("steady", "scan", "dynamics", "noise", "trace", "dsp-demo", "sweep")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coldcavity", description="Cold-atom cavity bistability and noise runner.")
    sub = ap.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="config file ([section] key = value)")
        p.add_argument("--out", help="output directory (overrides run.output_dir)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override any config key; repeatable")
        return p

    p = add("steady", "all steady states with stability over a detuning grid")
    p.add_argument("--I-in", dest="I_in", help='input intensity, absolute or e.g. "1.5x-threshold"')
    p.add_argument("--theta-range", help="start:stop:n in cavity linewidths")

    p = add("scan", "static up/down hysteresis scan")
    p.add_argument("--I-in", dest="I_in")
    p.add_argument("--theta-range")

    p = add("dynamics", "time-domain cavity scan with oscillation windows")
    p.add_argument("--I-in", dest="I_in")
    p.add_argument("--theta-range", help="start:stop:n, n analysis windows")
    p.add_argument("--scan-time", type=float)

    p = add("noise", "quadrature noise spectrum versus LO phase")
    p.add_argument("--I-in", dest="I_in")
    p.add_argument("--theta", type=float)
    p.add_argument("--omega-mhz", type=float)
    p.add_argument("--theta-grid", type=int)

    p = add("trace", "synthesized homodyne trace during the atom decay")
    p.add_argument("--C0", type=float)
    p.add_argument("--T-decay", dest="T_decay", type=float)

    p = add("dsp-demo", "videofilter artifact demonstration")
    p.add_argument("--depth", type=float)

    p = add("sweep", "parameter sweep / phase diagram")
    p.add_argument("--grid", action="append", default=[], metavar="NAME=start:stop:n",
                   help="sweep axis; repeat for up to three axes")
    p.add_argument("--kernel", choices=("steady", "oscillation", "smin"))
    p.add_argument("--workers", type=int)
    return ap


def _overrides(args) -> dict:
    o = {}
    for item in args.set:
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError("expected SECTION.KEY=VALUE", item)
        o[k.strip()] = v.strip()
    flag_map = {
        "I_in": "drive.I_in", "theta": "drive.theta", "omega_mhz": "noise.omega_mhz",
        "theta_grid": "noise.theta_grid", "C0": "trace.C0", "T_decay": "trace.T_decay",
        "depth": "dsp.depth", "kernel": "sweep.kernel", "workers": "run.workers",
        "scan_time": "scan.scan_time", "out": "run.output_dir",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            o[key] = repr(v) if isinstance(v, float) else str(v)
    rng = getattr(args, "theta_range", None)
    if rng is not None:
        parts = rng.split(":")
        if len(parts) != 3:
            raise ConfigError("expected start:stop:n", "--theta-range")
        o["scan.theta_min"], o["scan.theta_max"], o["scan.theta_points"] = parts
    if getattr(args, "grid", None):
        o["sweep.axes"] = "; ".join(args.grid)
    return o


def resolve_I_in(cfg: RunConfig) -> float:
    kind, v = parse_intensity(cfg.values["drive"]["I_in"])
    if kind == "abs":
        return v
    return v * steady.bistability_threshold(cfg.model)


def _theta_grid(cfg):
    s = cfg.values["scan"]
    return np.linspace(s["theta_min"], s["theta_max"], s["theta_points"])


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    m = {"command": command, "code_version": CODE_VERSION}
    m.update({k: repr(v) if isinstance(v, float) else v for k, v in extra.items()})
    m["config"] = cfg.echo()
    return m


def cmd_steady(cfg):
    p = cfg.model
    I_in = resolve_I_in(cfg)
    t = ResultTable(["theta", "root", "I", "p", "phi_cav", "transmitted", "stability", "re_lambda_max", "im_lambda_max"],
                    metadata=_meta(cfg, "steady", I_in=I_in))
    for th in _theta_grid(cfg):
        for k, s in enumerate(steady.solve_steady(I_in, th * p.gamma_cav, p, cfg.values["drive"]["p_frozen"])):
            lam = s.eigenvalues[0] if len(s.eigenvalues) else complex("nan")
            t.add(float(th), k, s.I, s.p, s.phi_cav, s.transmitted, s.stability, lam.real, lam.imag)
    return {"steady.csv": t}


def cmd_scan(cfg):
    p = cfg.model
    I_in = resolve_I_in(cfg)
    h = steady.scan_detuning(I_in, _theta_grid(cfg), p, cfg.values["drive"]["p_frozen"])
    t = ResultTable(["theta", "up_I", "down_I", "up_unstable", "down_unstable"],
                    metadata=_meta(cfg, "scan", I_in=I_in,
                                   up_switches=" ".join(map(repr, h.up_switches)),
                                   down_switches=" ".join(map(repr, h.down_switches))))
    for row in zip(h.theta, h.up_I, h.down_I, h.up_unstable, h.down_unstable):
        t.add(*map(lambda x: x.item() if hasattr(x, "item") else x, row))
    return {"scan.csv": t}


def cmd_dynamics(cfg):
    p = cfg.model
    s = cfg.values["scan"]
    I_in = resolve_I_in(cfg)
    res = dynamics.scan_cavity_dynamic(I_in, s["theta_min"], s["theta_max"], p, s["scan_time"], s["dt_out"], s["tol"])
    step = res.trace.duration / s["theta_points"]
    window = min(s["window"], step)
    centres, reps = dynamics.oscillation_map(res, window, step)
    meta = _meta(cfg, "dynamics", I_in=I_in)
    tr = ResultTable(["time", "theta", "I", "p"], metadata=meta)
    e = s["trace_every"]
    for ti, th, I, pp in zip(res.trace.time[::e], res.theta[::e], res.trace.samples[::e], res.p[::e]):
        tr.add(float(ti), float(th), float(I), float(pp))
    osc = ResultTable(["theta", "window_start", "oscillating", "amplitude", "frequency"], metadata=meta)
    for th, r in zip(centres, reps):
        osc.add(float(th), float(r.window[0]), r.oscillating, r.amplitude, r.frequency)
    return {"dynamics_trace.csv": tr, "dynamics_oscillations.csv": osc}


def cmd_noise(cfg):
    p = cfg.model
    n = cfg.values["noise"]
    I_in = resolve_I_in(cfg)
    theta = cfg.values["drive"]["theta"]
    sts = [s for s in steady.solve_steady(I_in, theta * p.gamma_cav, p, cfg.values["drive"]["p_frozen"])
           if s.stability == steady.STABLE]
    if not sts:
        raise noise.UnstableStateError(f"no stable steady state at theta={theta}")
    ss = sts[0] if n["branch"] == "lower" else sts[-1]
    Omega = 2 * math.pi * n["omega_mhz"] * 1e6
    spec = noise.noise_spectrum(noise.linearize(ss, p), Omega, n["theta_grid"])
    chain = cfg.chain
    t = ResultTable(["kind", "lo_phase", "S", "S_measured"],
                    metadata=_meta(cfg, "noise", I_in=I_in, I=ss.I, frozen_p_warning=spec.frozen_p_warning))
    for th, S in zip(spec.theta, spec.S):
        t.add("spectrum", float(th), float(S), noise.apply_detection(max(float(S), 0.0), chain))
    t.add("min", spec.theta_min, spec.S_min, noise.apply_detection(spec.S_min, chain))
    t.add("max", spec.theta_min + math.pi / 2, spec.S_max, noise.apply_detection(spec.S_max, chain))
    return {"noise.csv": t}


def cmd_trace(cfg):
    tr = cfg.values["trace"]
    p = cfg.model.with_(delta_a=tr["delta_a"], pumping_on=tr["pumping_on"])
    lo = noise.LOScan(tr["lo_freq"], tr["lo_amplitude"], tr["lo_offset"])
    h = noise.synthesize_homodyne_trace(tr["I_in"], tr["C0"], tr["T_decay"], tr["theta"],
                                        2 * math.pi * tr["omega_mhz"] * 1e6, p, lo, cfg.chain,
                                        tr["duration"], tr["dt"], tr["off_resonance"])
    t = ResultTable(["time", "C", "I", "S", "S_min", "S_max", "resonant", "lower_branch", "flagged"],
                    metadata=_meta(cfg, "trace", switch_times=" ".join(map(repr, h.switch_times))))
    for row in zip(h.time, h.C, h.I, h.samples, h.s_min, h.s_max, h.resonant, h.lower_branch, h.flagged):
        t.add(*(x.item() for x in row))
    return {"trace.csv": t}


def cmd_dsp_demo(cfg):
    d = cfg.values["dsp"]
    r = dsp.videofilter_artifact_demo(d["depth"], d["f_mod"], d["f_c_video"], d["f_c_numeric"],
                                      d["duration"], d["dt"], d["gain_cap"])
    t = ResultTable(["quantity", "value"], metadata=_meta(cfg, "dsp-demo"))
    t.add("displayed_min_dB_filtered", r.displayed_min_dB_filtered)
    t.add("recovered_min_power", r.recovered_min_power)
    t.add("true_min_power", r.true_min_power)
    t.add("settle_time", r.settle_time)
    return {"dsp_demo.csv": t}


def cmd_sweep(cfg):
    s = cfg.values["sweep"]
    axes = parse_axes(s["axes"])
    kind, v = parse_intensity(cfg.values["drive"]["I_in"])
    I_in = v if kind == "abs" else v * steady.bistability_threshold(cfg.model)
    t = sweep(axes, s["kernel"], cfg.model, I_in=I_in, theta=cfg.values["drive"]["theta"],
              omega_mhz=s["omega_mhz"], theta_step=s["theta_step"], t_span=s["t_span"],
              workers=cfg.values["run"]["workers"] or None, max_points=s["max_points"])
    # worker count must not change the artifact
    t.metadata = _meta(cfg.with_overrides({"run.workers": "0"}), "sweep")
    return {"sweep.csv": t}


HANDLERS = {"steady": cmd_steady, "scan": cmd_scan, "dynamics": cmd_dynamics, "noise": cmd_noise,
            "trace": cmd_trace, "dsp-demo": cmd_dsp_demo, "sweep": cmd_sweep}


_VALUE_FLAGS = ("--theta-range", "--grid", "--theta", "--I-in", "--set")


def _glue_values(argv):
    """Attach values such as ``-10:10:400`` to their flag so argparse does not read them as options."""
    out = []
    it = iter(argv)
    for a in it:
        if a in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def run_command(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = ap.parse_args(_glue_values(argv))  # exits 2 with usage on unknown commands
    start = time.time()
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, _overrides(args))
        tables = HANDLERS[args.command](cfg)
        out = Path(cfg.values["run"]["output_dir"])
        written = [write_table(t, out / name) for name, t in tables.items()]
        echo = out / f"{args.command}.cfg"
        write_table_text(echo, cfg.echo())
        # wall-clock times go to a sidecar so the CSV artifacts stay reproducible
        stamp = datetime.datetime.fromtimestamp(start, datetime.timezone.utc).isoformat()
        write_table_text(out / f"{args.command}.log",
                         f"started {stamp}\nelapsed_s {time.time() - start:.3f}\n" +
                         "".join(f"wrote {w}\n" for w in written))
    except (ConfigError, DomainError, ValueError, OSError, RuntimeError, steady.NoThreshold) as e:
        print(f"coldcavity {args.command}: error: {e}", file=sys.stderr)
        return 1
    for w in written:
        print(w)
    return 0


def write_table_text(path, text: str):
    path = Path(path)
    tmp = path.with_name(f".tmp-{path.name}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
