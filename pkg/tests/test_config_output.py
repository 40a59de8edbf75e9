import json
import math

import pytest

from sta_transport.config import ConfigError, RunConfig, dump_config, load_config, parse_config
from sta_transport.experiments import run_echo, run_instantaneous_trace, run_robustness_sweep
from sta_transport.model import TWO_PI
from sta_transport.output import csv_text, emit_results, fmt, manifest, result_tables
from sta_transport.protocols import ProtocolKind, ProtocolSpec, build_waveform

FULL = {
    "experiment": "sweep",
    "oscillator": {"omega_ratio": 1.1, "g_max": 0.8, "mass": 2.0},
    "protocols": ["cd", {"kind": "fourier", "order": 2, "s": 1.25}],
    "noise": {"heating_rate": 0.01, "thermal_nbar": 3.0, "dephasing_rate": 0.002},
    "sweep": {"s": 1.5, "grid": [0.99, 1.0, 1.01]},
    "scaling": {"window": [0.001, 0.02]},
    "tolerance": {"rtol": 1e-9},
    "fock_dim": 30,
    "output_dir": "out",
}


def test_round_trip_is_exact():
    cfg = parse_config(json.dumps(FULL))
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)
    assert again.digest() == cfg.digest()
    assert cfg.params.omega_sim == pytest.approx(1.1 * TWO_PI)
    assert cfg.protocols[0].s == 1.5 and cfg.protocols[1].fourier_order == 2


def test_infinite_nbar_round_trips_as_null():
    cfg = parse_config('{"experiment": "echo", "protocol": "cd", "s": 0.4, "noise": {"heating_rate": 0.1}}')
    assert math.isinf(cfg.noise.thermal_nbar)
    assert cfg.to_dict()["noise"]["thermal_nbar"] is None
    assert parse_config(dump_config(cfg)) == cfg


def test_physical_units_fix_the_frequency():
    cfg = parse_config(json.dumps({"experiment": "waveform", "protocol": {"kind": "ue", "s": 0.5},
                                   "oscillator": {"trap_khz": 20}}))
    assert cfg.calibration.period_us == pytest.approx(50.0)
    assert cfg.params.omega_nominal == TWO_PI
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("doc,path", [
    ({"experiment": "nope"}, "experiment"),
    ({}, "experiment"),
    ({"experiment": "echo"}, "protocol"),
    ({"experiment": "echo", "protocol": {"kind": "cd", "s": -1}}, "protocol.s"),
    ({"experiment": "echo", "protocol": {"kind": "magic", "s": 1}}, "protocol.kind"),
    ({"experiment": "echo", "protocol": {"kind": "cd"}}, "protocol.s"),
    ({"experiment": "sweep", "bogus": 1}, "bogus"),
    ({"experiment": "sweep", "sweep": {"grid": [0.9, 1.1]}}, "sweep.grid"),
    ({"experiment": "sweep", "sweep": {"grid": [0.9, "x"]}}, "sweep.grid[1]"),
    ({"experiment": "sweep", "noise": {"heating_rate": -1}}, "noise.heating_rate"),
    ({"experiment": "sweep", "oscillator": {"omega_ratio": 1, "omega_sim": 6}}, "oscillator.omega_sim"),
    ({"experiment": "sweep", "oscillator": {"trap_khz": 20, "period_us": 40}}, "oscillator.period_us"),
    ({"experiment": "sweep", "oscillator": {"trap_khz": 20, "omega": 3}}, "oscillator.omega"),
    ({"experiment": "sweep", "fock_dim": 1}, "fock_dim"),
    ({"experiment": "trace", "protocol": "cd", "s": 0.4, "trace": {"n_stops": 1}}, "trace.n_stops"),
    ({"experiment": "scaling", "scaling": {"window": [0.1, 0.01]}}, "scaling.window"),
    ({"experiment": "sweep", "tolerance": {"rtol": 0}}, "tolerance.rtol"),
])
def test_config_errors_name_the_path(doc, path):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    assert info.value.path == path


def test_invalid_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{not json")


def test_load_config_from_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(FULL))
    assert load_config(p) == parse_config(json.dumps(FULL))


def test_fmt_round_trips_doubles():
    for x in (0.1, 1 / 3, 1e-300, 2.0 ** 0.5):
        assert float(fmt(x)) == x
    assert fmt("cd") == "cd"


def test_csv_text_layout():
    assert csv_text(("a", "b"), [(1, 0.5), ("x", 2)]) == "a,b\n1,0.5\nx,2\n"


def test_result_tables_columns():
    p = RunConfig("echo").params
    echo = run_echo(ProtocolSpec(ProtocolKind.CD, 0.4), p, method="oracle")
    assert result_tables([echo])["echo.csv"].splitlines()[0] == "s,final_n"
    tr = run_instantaneous_trace(ProtocolSpec(ProtocolKind.CD, 0.4), p, n_stops=3, faithful=True)
    assert result_tables(tr)["trace.csv"].splitlines()[0] == "t,n_inst,n_lab,n_inst_faithful"
    sw = run_robustness_sweep(["cd"], 1.5, [0.99, 1.0, 1.01], params=p)
    lines = result_tables(sw)["sweep.csv"].splitlines()
    assert lines[0] == "protocol,omega_ratio,final_n" and len(lines) == 4
    w = build_waveform(ProtocolSpec(ProtocolKind.UE, 0.5), p)
    assert result_tables(w)["waveform.csv"].splitlines()[0] == "t,f,f_dot,f_ddot,h"
    with pytest.raises(TypeError):
        result_tables(object())


def test_repeated_runs_give_byte_identical_csv(tmp_path):
    cfg = parse_config(json.dumps(FULL))
    files = []
    for name in ("a", "b"):
        sw = run_robustness_sweep(list(cfg.protocols), cfg.sweep_s, cfg.grid, None, cfg.params)
        emit_results(sw, tmp_path / name, cfg, wall_time=0.0)
        files.append((tmp_path / name / "sweep.csv").read_bytes())
    assert files[0] == files[1]
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a == b
    assert a["run_id"] == cfg.digest()[:12]
    assert parse_config(json.dumps(a["config"])) == cfg


def test_manifest_records_file_hashes():
    doc = manifest(RunConfig("scaling"), {"x.csv": "a\n"}, 1.5, {"k": 1})
    assert doc["files"]["x.csv"] == "87428fc522803d31065e7bce3cf03fe475096631e5e07bbd7a0fde60c4cf25c7"
    assert doc["summary"] == {"k": 1} and doc["wall_time_s"] == 1.5


def test_emit_results_reports_io_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_results(None, blocker / "sub", RunConfig("validate"), tables={"a.csv": "a\n"})
