import json

import pytest

from sta_transport.cli import main


def run(argv, tmp_path, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_waveform_defaults(tmp_path, capsys):
    code, out = run(["waveform", "--out", str(tmp_path)], tmp_path, capsys)
    assert code == 0
    lines = (tmp_path / "waveform.csv").read_text().splitlines()
    assert lines[0] == "t,f,f_dot,f_ddot,h" and len(lines) == 402
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["experiment"] == "waveform" and "waveform.csv" in man["files"]


def test_echo_from_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "echo", "protocol": {"kind": "ue", "s": 0.5},
                               "echo": {"s_values": [0.4, 0.6]}}))
    code, out = run(["echo", "--config", str(cfg), "--out", str(tmp_path / "o")], tmp_path, capsys)
    assert code == 0
    rows = (tmp_path / "o" / "echo.csv").read_text().splitlines()
    assert rows[0] == "s,final_n" and len(rows) == 3
    assert json.loads(out.out)["max_final_n"] < 1e-8


def test_trace_faithful_flag(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "trace", "protocol": "cd", "s": 0.4,
                               "trace": {"n_stops": 3}}))
    code, _ = run(["trace", "--config", str(cfg), "--out", str(tmp_path), "--faithful-trace"],
                  tmp_path, capsys)
    assert code == 0
    assert (tmp_path / "trace.csv").read_text().startswith("t,n_inst,n_lab,n_inst_faithful\n")
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["trace"]["faithful"] is True


def test_env_var_sets_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STA_TRANSPORT_OUT", str(tmp_path / "env"))
    assert main(["waveform"]) == 0
    assert (tmp_path / "env" / "waveform.csv").exists()
    assert main(["waveform", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "waveform.csv").exists()


def test_tolerance_flag_recorded(tmp_path, capsys):
    assert main(["trace", "--out", str(tmp_path), "--tolerance", "1e-9"]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["tolerances"]["rtol"] == 1e-9


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"experiment": "echo", "protocol": {"kind": "cd", "s": "fast"}}')
    code, out = run(["echo", "--config", str(cfg)], tmp_path, capsys)
    assert code == 1 and "protocol.s" in out.err
    assert main(["echo", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["sweep", "--config", str(cfg)]) == 1  # experiment mismatch
    assert main(["echo", "--tolerance", "-1"]) == 1


def test_numerical_failure_exit_code(tmp_path, capsys):
    code, out = run(["echo", "--out", str(tmp_path), "--fock-dim", "4"], tmp_path, capsys)
    assert code == 2 and "Fock level" in out.err


def test_io_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, out = run(["waveform", "--out", str(blocker / "x")], tmp_path, capsys)
    assert code == 3 and "io error" in out.err


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_validate_reports_findings_without_failing(tmp_path, capsys):
    code, out = run(["validate", "--out", str(tmp_path)], tmp_path, capsys)
    assert code == 0
    summary = json.loads(out.out)
    assert summary["failed"] == []
    rows = (tmp_path / "validate.csv").read_text().splitlines()
    assert rows[0] == "check,passed,value,threshold,finding"
    assert any(r.startswith("monotone_degradation,true") for r in rows)


def test_trace_emits_oracle_trajectory(tmp_path, capsys):
    assert main(["trace", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,re_alpha,im_alpha,n_lab,n_inst" and len(rows) == 102
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    # lab-frame phonons agree between the Fock trace and the oracle trajectory
    for a, b in zip(rows[1:], trace[1:]):
        assert abs(float(a.split(",")[3]) - float(b.split(",")[2])) < 1e-8
