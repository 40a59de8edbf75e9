"""Run configuration: JSON schema, validation and canonical dumps.

A config is a JSON object.  Only ``experiment`` is required; everything else
has a default.  Unknown keys are rejected and every error names the offending
path, e.g. ``protocol.s``.  See the README for the full key list.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from .dynamics import NoiseModel
from .model import TWO_PI, OscillatorParams, PhysicalCalibration
from .protocols import Direction, ProtocolKind, ProtocolSpec

EXPERIMENTS = ("waveform", "echo", "trace", "sweep", "scaling", "validate")
ENV_OUTPUT_DIR = "STA_TRANSPORT_OUT"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    params: OscillatorParams = OscillatorParams()
    calibration: Optional[PhysicalCalibration] = None
    protocol: Optional[ProtocolSpec] = None
    protocols: Tuple[ProtocolSpec, ...] = ()
    noise: NoiseModel = NoiseModel()
    s_values: Tuple[float, ...] = ()
    stop_times: Tuple[float, ...] = ()
    n_stops: int = 101
    faithful: bool = False
    sweep_s: float = 1.5
    grid: Tuple[float, ...] = ()
    s_grid: Tuple[float, ...] = (0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0)
    window: Tuple[float, float] = (1e-3, 1e-2)
    samples: int = 401
    output_dir: str = "results"
    tolerance: Dict[str, float] = field(default_factory=lambda: {"rtol": 1e-10})
    fock_dim: Optional[int] = None
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        """Fully resolved config in the same schema :func:`parse_config` reads."""
        p = self.params
        osc: Dict[str, Any] = {"omega": p.omega_nominal, "omega_sim": p.omega_sim,
                               "g_max": p.g_max, "mass": p.mass}
        if self.calibration is not None:
            osc.update(trap_khz=self.calibration.trap_khz, period_us=self.calibration.period_us,
                       motional_mhz=self.calibration.motional_mhz)
        out: Dict[str, Any] = {"experiment": self.experiment, "oscillator": osc}
        if self.protocol is not None:
            out["protocol"] = _protocol_dict(self.protocol)
        if self.protocols:
            out["protocols"] = [_protocol_dict(q) for q in self.protocols]
        nbar = self.noise.thermal_nbar
        out["noise"] = {"heating_rate": self.noise.heating_rate,
                        "thermal_nbar": None if math.isinf(nbar) else nbar,
                        "dephasing_rate": self.noise.dephasing_rate}
        out["echo"] = {"s_values": list(self.s_values)}
        out["trace"] = {"stop_times": list(self.stop_times), "n_stops": self.n_stops,
                        "faithful": self.faithful}
        out["sweep"] = {"s": self.sweep_s, "grid": list(self.grid)}
        out["scaling"] = {"s_grid": list(self.s_grid), "window": list(self.window)}
        out["waveform"] = {"samples": self.samples}
        out["output_dir"] = self.output_dir
        out["tolerance"] = dict(sorted(self.tolerance.items()))
        out["fock_dim"] = self.fock_dim
        out["seed"] = self.seed
        return out

    def digest(self) -> str:
        return hashlib.sha256(dump_config(self).encode()).hexdigest()


def _protocol_dict(q: ProtocolSpec) -> Dict[str, Any]:
    d = {"kind": q.kind.value, "s": q.s, "direction": q.direction.value}
    if q.kind is ProtocolKind.FOURIER:
        d["order"] = int(q.fourier_order)
        d["compensate_handoff"] = q.compensate_handoff
    return d


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# validation helpers


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _number(obj, key, path, default=None, positive=False, nonneg=False, required=False,
            allow_null=False):
    where = f"{path}.{key}" if path else key
    if key not in obj:
        if required:
            raise ConfigError(where, "missing required key")
        return default
    v = obj[key]
    if v is None and allow_null:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(where, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(where, f"must be > 0, got {v!r}")
    if nonneg and not v >= 0:
        raise ConfigError(where, f"must be >= 0, got {v!r}")
    return float(v)


def _number_list(obj, key, path, positive=False):
    where = f"{path}.{key}"
    v = obj.get(key, [])
    if not isinstance(v, list):
        raise ConfigError(where, "expected a list of numbers")
    for i, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ConfigError(f"{where}[{i}]", f"expected a finite number, got {x!r}")
        if positive and not x > 0:
            raise ConfigError(f"{where}[{i}]", f"must be > 0, got {x!r}")
    return tuple(float(x) for x in v)


def _oscillator(obj) -> Tuple[OscillatorParams, Optional[PhysicalCalibration]]:
    path = "oscillator"
    _check_keys(obj, {"omega", "omega_ratio", "omega_sim", "g_max", "mass", "trap_khz",
                      "period_us", "motional_mhz"}, path)
    calibration = None
    if "trap_khz" in obj or "period_us" in obj:
        khz = _number(obj, "trap_khz", path, positive=True)
        us = _number(obj, "period_us", path, positive=True)
        if khz is None:
            khz = 1e3 / us
        if us is None:
            us = 1e3 / khz
        mhz = _number(obj, "motional_mhz", path, positive=True, default=3.1, allow_null=True)
        try:
            calibration = PhysicalCalibration(khz, us, mhz)
        except ValueError as err:
            raise ConfigError(f"{path}.period_us", str(err)) from None
        omega = _number(obj, "omega", path, positive=True, default=TWO_PI)
        if not math.isclose(omega, TWO_PI, rel_tol=1e-12):
            raise ConfigError(f"{path}.omega",
                              "physical units fix the dimensionless frequency to 2*pi")
    else:
        if "motional_mhz" in obj:
            raise ConfigError(f"{path}.motional_mhz", "only valid together with trap_khz")
        omega = _number(obj, "omega", path, positive=True, default=TWO_PI)
    if "omega_ratio" in obj and "omega_sim" in obj:
        raise ConfigError(f"{path}.omega_sim", "give either omega_ratio or omega_sim, not both")
    omega_sim = _number(obj, "omega_sim", path, positive=True)
    if omega_sim is None:
        omega_sim = _number(obj, "omega_ratio", path, positive=True, default=1.0) * omega
    g_max = _number(obj, "g_max", path, positive=True, default=1.0)
    mass = _number(obj, "mass", path, positive=True, default=1.0)
    return OscillatorParams(omega, omega_sim, g_max, mass), calibration


def _protocol(obj, path, default_s: Optional[float] = None) -> ProtocolSpec:
    if isinstance(obj, str):
        obj = {"kind": obj}
    _check_keys(obj, {"kind", "s", "direction", "order", "compensate_handoff"}, path)
    if "kind" not in obj:
        raise ConfigError(f"{path}.kind", "missing required key")
    kinds = [k.value for k in ProtocolKind]
    if obj["kind"] not in kinds:
        raise ConfigError(f"{path}.kind", f"must be one of {kinds}, got {obj['kind']!r}")
    s = _number(obj, "s", path, required=default_s is None, default=default_s)
    if not s > 0:
        raise ConfigError(f"{path}.s", f"shortcut ratio must be > 0, got {obj['s']!r}")
    direction = obj.get("direction", "backward")
    if direction not in ("forward", "backward"):
        raise ConfigError(f"{path}.direction", f"must be 'forward' or 'backward', got {direction!r}")
    order = obj.get("order", 1)
    if isinstance(order, bool) or not isinstance(order, int) or order < 1:
        raise ConfigError(f"{path}.order", f"must be an integer >= 1, got {order!r}")
    comp = obj.get("compensate_handoff", True)
    if not isinstance(comp, bool):
        raise ConfigError(f"{path}.compensate_handoff", "expected true or false")
    return ProtocolSpec(ProtocolKind(obj["kind"]), s, Direction(direction), order,
                        compensate_handoff=comp)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("", f"invalid JSON: {err}") from None
    top = {"experiment", "oscillator", "protocol", "protocols", "s", "noise", "echo", "trace",
           "sweep", "scaling", "waveform", "output_dir", "tolerance", "fock_dim", "seed"}
    _check_keys(raw, top, "")
    if "experiment" not in raw:
        raise ConfigError("experiment", "missing required key")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {list(EXPERIMENTS)}, got {exp!r}")

    kw: Dict[str, Any] = {"experiment": exp}
    kw["params"], kw["calibration"] = _oscillator(raw.get("oscillator", {}))

    proto = raw.get("protocol")
    if "s" in raw:
        # shorthand {"protocol": "cd", "s": 0.4}
        if not isinstance(proto, str):
            raise ConfigError("s", "top-level s is only allowed with a protocol name")
        proto = {"kind": proto, "s": raw["s"]}
    if proto is not None:
        kw["protocol"] = _protocol(proto, "protocol")
    elif exp in ("waveform", "echo", "trace"):
        raise ConfigError("protocol", f"missing required key for experiment {exp!r}")

    noise = raw.get("noise", {})
    _check_keys(noise, {"heating_rate", "thermal_nbar", "dephasing_rate"}, "noise")
    nbar = _number(noise, "thermal_nbar", "noise", nonneg=True, allow_null=True)
    heating = _number(noise, "heating_rate", "noise", nonneg=True, default=0.0)
    if heating > 0 and nbar == 0:
        raise ConfigError("noise.thermal_nbar", "must be > 0 when heating_rate > 0")
    kw["noise"] = NoiseModel(heating, math.inf if nbar is None else nbar,
                             _number(noise, "dephasing_rate", "noise", nonneg=True, default=0.0))

    echo = raw.get("echo", {})
    _check_keys(echo, {"s_values"}, "echo")
    kw["s_values"] = _number_list(echo, "s_values", "echo", positive=True)

    trace = raw.get("trace", {})
    _check_keys(trace, {"stop_times", "n_stops", "faithful"}, "trace")
    stops = _number_list(trace, "stop_times", "trace")
    if any(t < 0 for t in stops):
        raise ConfigError("trace.stop_times", "stop times must be >= 0")
    kw["stop_times"] = stops
    n_stops = trace.get("n_stops", 101)
    if isinstance(n_stops, bool) or not isinstance(n_stops, int) or n_stops < 2:
        raise ConfigError("trace.n_stops", f"must be an integer >= 2, got {n_stops!r}")
    kw["n_stops"] = n_stops
    if not isinstance(trace.get("faithful", False), bool):
        raise ConfigError("trace.faithful", "expected true or false")
    kw["faithful"] = trace.get("faithful", False)

    sweep = raw.get("sweep", {})
    _check_keys(sweep, {"s", "grid"}, "sweep")
    kw["sweep_s"] = _number(sweep, "s", "sweep", positive=True, default=1.5)
    kw["grid"] = _number_list(sweep, "grid", "sweep", positive=True)
    if kw["grid"] and not any(math.isclose(r, 1.0, abs_tol=1e-14) for r in kw["grid"]):
        raise ConfigError("sweep.grid", "must contain 1.0")

    if "protocols" in raw:
        if not isinstance(raw["protocols"], list) or not raw["protocols"]:
            raise ConfigError("protocols", "expected a non-empty list")
        kw["protocols"] = tuple(_protocol(q, f"protocols[{i}]", kw["sweep_s"])
                                for i, q in enumerate(raw["protocols"]))

    scaling = raw.get("scaling", {})
    _check_keys(scaling, {"s_grid", "window"}, "scaling")
    if "s_grid" in scaling:
        kw["s_grid"] = _number_list(scaling, "s_grid", "scaling", positive=True)
        if len(kw["s_grid"]) < 2:
            raise ConfigError("scaling.s_grid", "needs at least two values")
    if "window" in scaling:
        win = _number_list(scaling, "window", "scaling", positive=True)
        if len(win) != 2 or not win[0] < win[1]:
            raise ConfigError("scaling.window", "expected [lo, hi] with 0 < lo < hi")
        kw["window"] = win

    wave = raw.get("waveform", {})
    _check_keys(wave, {"samples"}, "waveform")
    samples = wave.get("samples", 401)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        raise ConfigError("waveform.samples", f"must be an integer >= 2, got {samples!r}")
    kw["samples"] = samples

    out = raw.get("output_dir", "results")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "expected a non-empty string")
    kw["output_dir"] = out

    tol = raw.get("tolerance", {})
    _check_keys(tol, {"rtol"}, "tolerance")
    resolved = {"rtol": 1e-10}
    for key in tol:
        resolved[key] = _number(tol, key, "tolerance", positive=True)
    kw["tolerance"] = resolved

    dim = raw.get("fock_dim")
    if dim is not None and (isinstance(dim, bool) or not isinstance(dim, int) or dim < 2):
        raise ConfigError("fock_dim", f"must be an integer >= 2 or null, got {dim!r}")
    kw["fock_dim"] = dim
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed", "expected an integer")
    kw["seed"] = seed
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
