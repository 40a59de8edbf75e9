"""Deterministic CSV tables and JSON run manifests.

Floats are written with 17 significant digits (``%.17g``), which round-trips
IEEE doubles exactly, and columns always appear in the documented order, so
identical inputs give byte-identical CSV files.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from . import __version__
from .config import RunConfig
from .dynamics import CoherentTrajectory
from .experiments import EchoResult, ScalingResult, SweepResult, TraceResult
from .model import DriveWaveform, OscillatorParams, equilibrium_alpha

ECHO_COLUMNS = ("s", "final_n")
SWEEP_COLUMNS = ("protocol", "omega_ratio", "final_n")
TRACE_COLUMNS = ("t", "n_inst", "n_lab")
WAVEFORM_COLUMNS = ("t", "f", "f_dot", "f_ddot", "h")
TRAJECTORY_COLUMNS = ("t", "re_alpha", "im_alpha", "n_lab", "n_inst")
SCALING_COLUMNS = ("kind", "s", "peak", "exponent")


class OutputError(OSError):
    pass


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def waveform_table(w: DriveWaveform, samples: int = 401):
    d = w.sample(samples)
    return WAVEFORM_COLUMNS, zip(*(d[c] for c in WAVEFORM_COLUMNS))


def trajectory_table(traj: CoherentTrajectory, w: DriveWaveform, params: OscillatorParams):
    """Coherent trajectory with lab and instantaneous-frame phonon numbers."""
    a = traj.alpha
    n_inst = np.abs(a - equilibrium_alpha(w.f(traj.times), params)) ** 2
    return TRAJECTORY_COLUMNS, zip(traj.times, a.real, a.imag, np.abs(a) ** 2, n_inst)


def result_tables(result) -> Dict[str, str]:
    """Map file name -> CSV text for any experiment result."""
    if isinstance(result, DriveWaveform):
        return {"waveform.csv": csv_text(*waveform_table(result))}
    if isinstance(result, EchoResult):
        result = [result]
    if isinstance(result, list) and result and all(isinstance(r, EchoResult) for r in result):
        return {"echo.csv": csv_text(ECHO_COLUMNS, [(r.s, r.final_n) for r in result])}
    if isinstance(result, SweepResult):
        rows = [(name, r, n) for name, row in zip(result.protocols, result.final_n)
                for r, n in zip(result.ratios, row)]
        return {"sweep.csv": csv_text(SWEEP_COLUMNS, rows)}
    if isinstance(result, TraceResult):
        cols, cells = TRACE_COLUMNS, [result.times, result.n_inst, result.n_lab]
        if result.n_inst_faithful is not None:
            cols, cells = cols + ("n_inst_faithful",), cells + [result.n_inst_faithful]
        return {"trace.csv": csv_text(cols, zip(*cells))}
    if isinstance(result, ScalingResult):
        result = [result]
    if isinstance(result, list) and result and all(isinstance(r, ScalingResult) for r in result):
        rows = [(r.kind, s, p, r.exponent) for r in result for s, p in zip(r.s, r.peak)]
        return {"scaling.csv": csv_text(SCALING_COLUMNS, rows)}
    raise TypeError(f"no CSV layout for {type(result).__name__}")


def manifest(config: Optional[RunConfig], files: Dict[str, str], wall_time: float,
             extra: Optional[dict] = None) -> dict:
    cfg = config.to_dict() if config is not None else None
    digest = config.digest() if config is not None else None
    out = {
        "tool": "sta_transport",
        "version": __version__,
        "experiment": cfg["experiment"] if cfg else None,
        "config": cfg,
        "config_hash": digest,
        "run_id": digest[:12] if digest else None,
        "tolerances": cfg["tolerance"] if cfg else None,
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        "wall_time_s": round(float(wall_time), 6),
    }
    if extra:
        out["summary"] = extra
    return out


def emit_results(result, out_dir: Union[str, Path], config: Optional[RunConfig] = None,
                 wall_time: float = 0.0, extra: Optional[dict] = None,
                 tables: Optional[Dict[str, str]] = None) -> List[Path]:
    """Write the result's CSV table(s), any extra ``tables`` and ``manifest.json``."""
    files = result_tables(result) if result is not None else {}
    files.update(tables or {})
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        path = out / "manifest.json"
        doc = manifest(config, files, wall_time, extra)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    except OSError as err:
        raise OutputError(f"cannot write results to {out}: {err}") from err
    return written


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
