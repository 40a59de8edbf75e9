"""Command line front end: ``sta-transport <subcommand> [--config FILE] [--out DIR]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 IO error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from . import __version__
from .config import ENV_OUTPUT_DIR, EXPERIMENTS, ConfigError, RunConfig, load_config, parse_config
from .dynamics import NumericalError, propagate_coherent
from .experiments import (
    fit_flatness_exponent,
    flatness_grid,
    forward_ramp,
    run_amplitude_scaling,
    run_echo,
    run_instantaneous_trace,
    run_robustness_sweep,
)
from .output import (OutputError, Stopwatch, csv_text, emit_results, trajectory_table,
                     waveform_table)
from .protocols import DesignError, ProtocolKind, ProtocolSpec, build_waveform

log = logging.getLogger("sta_transport")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "waveform": {"protocol": {"kind": "cd", "s": 0.4}},
    "echo": {"protocol": {"kind": "cd", "s": 0.4},
             "echo": {"s_values": [0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95]}},
    "trace": {"protocol": {"kind": "cd", "s": 0.4}},
    "sweep": {"protocols": ["linear", "cd", "ue", {"kind": "fourier", "order": 3}]},
    "scaling": {},
    "validate": {},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sta-transport",
        description="Shortcut-to-adiabaticity transport of a dragged harmonic oscillator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "waveform": "sample a protocol's force and momentum drives",
        "echo": "quench-echo final phonon numbers",
        "trace": "instantaneous- and lab-frame excitation during a protocol",
        "sweep": "robustness against trap-frequency drift",
        "scaling": "amplitude and flatness exponents",
        "validate": "run the invariant suite",
    }
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--tolerance", type=float, metavar="X", help="integrator rtol")
        p.add_argument("--fock-dim", type=int, metavar="D", help="override the Fock dimension")
        p.add_argument("--faithful-trace", action="store_true",
                       help="also replay the CD return leg for each trace stop")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load(args) -> RunConfig:
    if args.config:
        try:
            cfg = load_config(args.config)
        except OSError as err:
            raise ConfigError("", f"cannot read config {args.config}: {err}") from None
        if cfg.experiment != args.command:
            raise ConfigError("experiment",
                              f"config is for {cfg.experiment!r}, subcommand is {args.command!r}")
    else:
        cfg = parse_config(json.dumps({"experiment": args.command, **DEFAULTS[args.command]}))
    changes = {}
    if os.environ.get(ENV_OUTPUT_DIR):
        changes["output_dir"] = os.environ[ENV_OUTPUT_DIR]
    if args.out:
        changes["output_dir"] = args.out
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError("tolerance.rtol", "must be > 0")
        changes["tolerance"] = {**cfg.tolerance, "rtol": args.tolerance}
    if args.fock_dim is not None:
        if args.fock_dim < 2:
            raise ConfigError("fock_dim", "must be >= 2")
        changes["fock_dim"] = args.fock_dim
    if args.faithful_trace:
        changes["faithful"] = True
    return replace(cfg, **changes) if changes else cfg


def _run(cfg: RunConfig):
    """Run the configured experiment; returns ``(result, summary, extra_tables)``."""
    params, rtol = cfg.params, cfg.tolerance.get("rtol", 1e-10)
    exp = cfg.experiment
    if exp == "waveform":
        w = build_waveform(cfg.protocol, params)
        return None, {"duration": w.duration}, {"waveform.csv": csv_text(*waveform_table(w, cfg.samples))}
    if exp == "echo":
        specs = [replace(cfg.protocol, s=s) for s in cfg.s_values] or [cfg.protocol]
        results = [run_echo(q, params, cfg.noise, fock_dim=cfg.fock_dim, rtol=rtol) for q in specs]
        return results, {"max_final_n": max(r.final_n for r in results)}, {}
    if exp == "trace":
        tr = run_instantaneous_trace(cfg.protocol, params, cfg.stop_times or None, cfg.n_stops,
                                     cfg.faithful, cfg.fock_dim, rtol)
        nominal = params.nominal()
        start = propagate_coherent(forward_ramp(nominal, cfg.protocol.f_max), nominal, 0j).final()
        back = build_waveform(cfg.protocol, params)
        traj = propagate_coherent(back, params, start, tr.times)
        table = csv_text(*trajectory_table(traj, back, params))
        return tr, {"max_n_inst": float(tr.n_inst.max())}, {"trajectory.csv": table}
    if exp == "sweep":
        specs = list(cfg.protocols) or [ProtocolSpec(ProtocolKind.CD, cfg.sweep_s)]
        sw = run_robustness_sweep(specs, cfg.sweep_s, cfg.grid or None, cfg.noise, params,
                                  fock_dim=cfg.fock_dim, workers=min(4, os.cpu_count() or 1),
                                  window=cfg.window)
        summary = {
            "exponents": {k: v.slope for k, v in sw.exponents.items()},
            "errors": {f"{k[0]}@{k[1]:.17g}": v for k, v in sw.errors.items()},
            "monotonicity_findings": sw.monotonicity_findings(),
        }
        return sw, summary, {}
    if exp == "scaling":
        amp = [run_amplitude_scaling(k, cfg.s_grid, params) for k in ("linear", "cd", "ue")]
        rows = []
        for order in (1, 2, 3):
            spec = ProtocolSpec(ProtocolKind.FOURIER, cfg.sweep_s, fourier_order=order)
            sw = run_robustness_sweep([spec], None, flatness_grid(cfg.window), params=params)
            fit = fit_flatness_exponent(sw, spec.name, cfg.window)
            rows.append((spec.name, fit.slope, fit.stderr, fit.n_points))
        flat = csv_text(("protocol", "slope", "stderr", "n_points"), rows)
        summary = {"amplitude_exponents": {r.kind: r.exponent for r in amp},
                   "flatness_exponents": {r[0]: r[1] for r in rows}}
        return amp, summary, {"flatness.csv": flat}
    if exp == "validate":
        from .validation import run_checks
        checks = run_checks(params)
        table = csv_text(("check", "passed", "value", "threshold", "finding"),
                         [(c.name, str(c.passed).lower(), c.value, c.threshold,
                           str(c.finding).lower()) for c in checks])
        failed = [c.name for c in checks if not c.passed and not c.finding]
        summary = {"failed": failed,
                   "findings": [c.name for c in checks if c.finding and not c.passed]}
        return None, summary, {"validate.csv": table}
    raise ConfigError("experiment", f"unknown experiment {exp!r}")


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with Stopwatch() as sw:
            result, summary, tables = _run(cfg)
    except DesignError as err:
        print(f"design error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = emit_results(result, cfg.output_dir, cfg, sw.elapsed, summary, tables)
    except OutputError as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        log.info("wrote %s", p)
    print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    if cfg.experiment == "validate" and summary["failed"]:
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
