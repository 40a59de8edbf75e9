"""
Echo, trace and robustness experiments
======================================

Every experiment starts with the ion at rest in the undisplaced well, drags
it out with a linear ramp over exactly one period at the nominal frequency
and brings it back with the protocol under test, run at ``omega_sim``.
Phonons are counted at the end, where the force is zero and the lab and
instantaneous frames coincide.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .dynamics import (
    DensityState,
    FockState,
    NoiseModel,
    NumericalError,
    coherent_vector,
    excitation_from_moments,
    fock_dimension,
    phonon_stats,
    propagate_coherent,
    propagate_fock,
    propagate_lindblad,
)
from .model import DriveWaveform, OscillatorParams, equilibrium_alpha
from .protocols import (
    Direction,
    ProtocolKind,
    ProtocolSpec,
    amplitude_audit,
    build_waveform,
    linear_ramp,
)

RETURN_RATIO = 0.15  # CD return leg used to read out the instantaneous frame


@dataclass(frozen=True)
class EchoResult:
    protocol: ProtocolSpec
    s: float
    omega_ratio: float
    final_n: float
    final_distribution: np.ndarray
    oracle_alpha: complex
    method: str
    fock_dim: Optional[int] = None
    oracle_deviation: Optional[float] = None  # max |<a> - alpha| over checkpoints

    @property
    def oracle_n(self) -> float:
        return abs(self.oracle_alpha) ** 2


def _annotate(leg: str, err: NumericalError) -> NumericalError:
    return type(err)(f"{leg} leg: {err}")


def forward_ramp(params: OscillatorParams, f_max: Optional[float] = None) -> DriveWaveform:
    """Adiabatic reference ramp ``0 -> f_max`` over one nominal period."""
    spec = ProtocolSpec(ProtocolKind.LINEAR, 1.0, Direction.FORWARD, f_max=f_max)
    return build_waveform(spec, params)


def _return_waveform(protocol: ProtocolSpec, params: OscillatorParams) -> DriveWaveform:
    if protocol.direction is not Direction.BACKWARD:
        raise ValueError("the echo return leg must be a backward protocol")
    return build_waveform(protocol, params)


def _resolve_method(method: str, noise: Optional[NoiseModel]) -> str:
    if method == "auto":
        return "fock" if noise is None or noise.is_zero else "lindblad"
    if method not in ("oracle", "fock", "lindblad"):
        raise ValueError(f"unknown propagation method {method!r}")
    if method in ("oracle", "fock") and noise is not None and not noise.is_zero:
        raise ValueError(f"method {method!r} cannot include noise; use 'lindblad'")
    return method


def _poisson(alpha: complex, dim: int) -> np.ndarray:
    return np.abs(coherent_vector(alpha, dim)) ** 2


def _dimension_for(alpha_max: float, noise: Optional[NoiseModel], total_time: float) -> int:
    extra = 0
    if noise is not None and noise.heating_rate:
        extra = int(math.ceil(20.0 * noise.heating_rate * total_time)) + 4
    return fock_dimension(alpha_max, extra)


def run_echo(protocol: ProtocolSpec, params: OscillatorParams = OscillatorParams(),
             noise: Optional[NoiseModel] = None, method: str = "auto",
             fock_dim: Optional[int] = None, rtol: float = 1e-10,
             checkpoints: int = 20) -> EchoResult:
    """Quench echo: forward linear ramp at ``omega_nominal``, ``protocol`` back at ``omega_sim``.

    ``method`` is ``'oracle'`` (exact coherent solution), ``'fock'``,
    ``'lindblad'`` or ``'auto'`` (Lindblad only when ``noise`` is non-zero).
    The Fock dimension defaults to the truncation rule applied to the largest
    oracle amplitude seen on either leg.
    """
    method = _resolve_method(method, noise)
    nominal = params.nominal()
    fwd = forward_ramp(nominal, protocol.f_max)
    back = _return_waveform(protocol, params)

    t_fwd = np.linspace(0.0, fwd.duration, checkpoints)
    t_back = np.linspace(0.0, back.duration, checkpoints)
    o_fwd = propagate_coherent(fwd, nominal, 0j, t_fwd)
    o_back = propagate_coherent(back, params, o_fwd.alpha[-1], t_back)
    alpha_end = complex(o_back.alpha[-1])

    if method == "oracle":
        dim = fock_dim or fock_dimension(np.abs(o_back.alpha).max())
        return EchoResult(protocol, protocol.s, params.omega_ratio, abs(alpha_end) ** 2,
                          _poisson(alpha_end, dim), alpha_end, method)

    dense = np.linspace(0.0, back.duration, 257)
    a_max = max(np.abs(propagate_coherent(back, params, o_fwd.alpha[-1], dense).alpha).max(),
                np.abs(o_fwd.alpha).max())
    dim = fock_dim or _dimension_for(a_max, noise, fwd.duration + back.duration)

    if method == "fock":
        try:
            tr1 = propagate_fock(fwd, nominal, FockState.vacuum(dim), t_fwd, rtol=rtol)
        except NumericalError as err:
            raise _annotate("forward", err) from err
        try:
            tr2 = propagate_fock(back, params, tr1.state(), t_back, rtol=rtol)
        except NumericalError as err:
            raise _annotate("backward", err) from err
        final = tr2.state()
    else:
        noise = noise or NoiseModel()
        rho0 = DensityState.from_pure(FockState.vacuum(dim))
        try:
            tr1 = propagate_lindblad(fwd, nominal, rho0, noise, t_fwd)
        except NumericalError as err:
            raise _annotate("forward", err) from err
        try:
            tr2 = propagate_lindblad(back, params, tr1.state(), noise, t_back)
        except NumericalError as err:
            raise _annotate("backward", err) from err
        final = tr2.state()

    dev = max(np.abs(tr1.expect_a - o_fwd.alpha).max(), np.abs(tr2.expect_a - o_back.alpha).max())
    st = phonon_stats(final)
    return EchoResult(protocol, protocol.s, params.omega_ratio, st.mean, st.distribution,
                      alpha_end, method, dim, float(dev))


@dataclass(frozen=True)
class TraceResult:
    protocol: ProtocolSpec
    times: np.ndarray
    n_inst: np.ndarray
    n_lab: np.ndarray
    oracle_n_inst: np.ndarray
    oracle_n_lab: np.ndarray
    n_inst_faithful: Optional[np.ndarray] = None

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.times.tolist(), self.n_inst.tolist(), self.n_lab.tolist()))


def run_instantaneous_trace(protocol: ProtocolSpec, params: OscillatorParams = OscillatorParams(),
                            stop_times: Optional[Sequence[float]] = None, n_stops: int = 101,
                            faithful: bool = False, fock_dim: Optional[int] = None,
                            rtol: float = 1e-10) -> TraceResult:
    """Excitation in the instantaneous and lab frames when the protocol is halted.

    ``stop_times`` are measured from the start of the protocol leg.  The
    instantaneous-frame value is read off directly from the frame shift.  With
    ``faithful=True`` each stopped state is also carried home by a CD ramp of
    ratio 0.15, as done in the laboratory, and its final phonon number is
    reported alongside.
    """
    nominal = params.nominal()
    fwd = forward_ramp(nominal, protocol.f_max)
    back = _return_waveform(protocol, params)
    if stop_times is None:
        stop_times = np.linspace(0.0, back.duration, n_stops)
    ts = np.sort(np.asarray(stop_times, dtype=float))
    if ts.size == 0 or ts[0] < 0 or ts[-1] > back.duration * (1 + 1e-12):
        raise ValueError(f"stop times must lie in [0, {back.duration}]")
    ts = np.clip(ts, 0.0, back.duration)

    o_fwd = propagate_coherent(fwd, nominal, 0j)
    oracle = propagate_coherent(back, params, o_fwd.alpha[-1], ts)
    f_stop = back.f(ts)
    alpha_eq = equilibrium_alpha(f_stop, params)
    oracle_inst = np.abs(oracle.alpha - alpha_eq) ** 2

    a_max = max(np.abs(oracle.alpha).max(), abs(o_fwd.alpha[-1]))
    dim = fock_dim or fock_dimension(a_max)
    psi_mid = propagate_fock(fwd, nominal, FockState.vacuum(dim), rtol=rtol).state()
    tr = propagate_fock(back, params, psi_mid, ts, rtol=rtol)
    n_inst = excitation_from_moments(tr.mean_n, tr.expect_a, f_stop, params)

    faithful_n = None
    if faithful:
        faithful_n = np.empty(ts.size)
        for i, (t, f) in enumerate(zip(ts, f_stop)):
            ret = linear_ramp(float(f), 0.0, RETURN_RATIO * params.period, params,
                              counterdiabatic=True, label="cd-return")
            home = propagate_fock(ret, params, tr.state(i), rtol=rtol)
            faithful_n[i] = home.mean_n[-1]

    return TraceResult(protocol, ts, np.clip(n_inst, 0.0, None), tr.mean_n, oracle_inst,
                       np.abs(oracle.alpha) ** 2, faithful_n)


# ---------------------------------------------------------------------------
# robustness sweeps


def default_grid() -> np.ndarray:
    """Coarse grid 0.90..1.10 plus a logarithmic refinement around 1."""
    coarse = np.round(np.arange(0.90, 1.1001, 0.02), 10)
    fine = np.logspace(-3, np.log10(0.05), 15)
    grid = np.concatenate([coarse, 1.0 - fine, 1.0 + fine, [1.0]])
    return np.unique(np.round(grid, 14))


def flatness_grid(window: Tuple[float, float] = (1e-3, 1e-2), points: int = 9) -> np.ndarray:
    d = np.logspace(np.log10(window[0]), np.log10(window[1]), points)
    return np.unique(np.concatenate([1.0 - d, [1.0], 1.0 + d]))


@dataclass(frozen=True)
class FlatnessFit:
    protocol: str
    slope: float
    stderr: float
    ci95: Tuple[float, float]
    n_points: int
    slope_below: float  # omega' < omega side only
    slope_above: float
    floor_limited: bool


@dataclass
class SweepResult:
    specs: List[ProtocolSpec]
    ratios: np.ndarray
    final_n: np.ndarray  # (n_protocols, n_ratios), NaN where a run failed
    errors: Dict[Tuple[str, float], str] = field(default_factory=dict)
    exponents: Dict[str, FlatnessFit] = field(default_factory=dict)

    @property
    def protocols(self) -> List[str]:
        return [s.name for s in self.specs]

    def row(self, protocol: str) -> np.ndarray:
        return self.final_n[self.protocols.index(protocol)]

    def at(self, protocol: str, ratio: float) -> float:
        j = int(np.argmin(np.abs(self.ratios - ratio)))
        if abs(self.ratios[j] - ratio) > 1e-12:
            raise KeyError(f"ratio {ratio} not on the sweep grid")
        return float(self.row(protocol)[j])

    def ordering(self) -> List[List[str]]:
        """Protocols from least to most excited, per grid point."""
        names = self.protocols
        return [[names[i] for i in np.argsort(col, kind="stable")] for col in self.final_n.T]

    def asymmetry(self, protocol: str, delta: float) -> float:
        return self.at(protocol, 1.0 + delta) - self.at(protocol, 1.0 - delta)

    def monotonicity_findings(self, window: float = 0.05) -> List[str]:
        """Grid points where ``final_n`` drops while moving away from ``omega' = omega``."""
        found = []
        for name, row in zip(self.protocols, self.final_n):
            for side in (1.0, -1.0):
                sel = np.where(side * (self.ratios - 1.0) >= 0)[0]
                sel = sel[np.argsort(np.abs(self.ratios[sel] - 1.0))]
                sel = sel[np.abs(self.ratios[sel] - 1.0) <= window + 1e-12]
                vals = row[sel]
                for a, b, ra in zip(vals[:-1], vals[1:], self.ratios[sel][1:]):
                    if b < a:
                        found.append(f"{name}: final_n decreases to {b:.3g} at ratio {ra:.6g}")
        return found


def _as_spec(p: Union[str, ProtocolSpec], s: Optional[float]) -> ProtocolSpec:
    if isinstance(p, ProtocolSpec):
        return p if s is None else replace(p, s=s)
    name = str(p).lower()
    if s is None:
        raise ValueError("a shortcut ratio is required to build protocols by name")
    if name.startswith("fourier"):
        order = int(name[len("fourier"):] or 1)
        return ProtocolSpec(ProtocolKind.FOURIER, s, fourier_order=order)
    return ProtocolSpec(ProtocolKind(name), s)


def run_robustness_sweep(protocols: Sequence[Union[str, ProtocolSpec]], s: Optional[float] = 1.5,
                         grid: Optional[Sequence[float]] = None,
                         noise: Optional[NoiseModel] = None,
                         params: OscillatorParams = OscillatorParams(), method: str = "auto",
                         fock_dim: Optional[int] = None, workers: int = 1,
                         window: Tuple[float, float] = (1e-3, 1e-2)) -> SweepResult:
    """Echo phonon number versus ``omega'/omega`` for each protocol.

    ``method='auto'`` uses the exact oracle for noiseless sweeps (the only
    route that resolves excitations near 1e-20) and the master equation
    otherwise.  Failed points are recorded in ``errors`` and left as NaN.
    """
    specs = [_as_spec(p, s) for p in protocols]
    ratios = default_grid() if grid is None else np.unique(np.asarray(grid, dtype=float))
    if not np.any(np.isclose(ratios, 1.0, rtol=0, atol=1e-14)):
        raise ValueError("the sweep grid must contain omega'/omega = 1")
    if method == "auto":
        method = "oracle" if noise is None or noise.is_zero else "lindblad"

    jobs = [(i, j) for i in range(len(specs)) for j in range(ratios.size)]
    out = np.full((len(specs), ratios.size), np.nan)
    errors: Dict[Tuple[str, float], str] = {}

    def job(ij):
        i, j = ij
        try:
            res = run_echo(specs[i], params.with_ratio(float(ratios[j])), noise, method, fock_dim)
            return ij, res.final_n, None
        except (NumericalError, ValueError) as err:
            return ij, math.nan, str(err)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(ij) for ij in jobs]
    for (i, j), val, err in results:  # merged in grid order
        out[i, j] = val
        if err is not None:
            errors[(specs[i].name, float(ratios[j]))] = err

    sweep = SweepResult(specs, ratios, out, errors)
    for spec in specs:
        try:
            sweep.exponents[spec.name] = fit_flatness_exponent(sweep, spec.name, window)
        except ValueError:
            pass
    return sweep


def _slope(x, y):
    fit = stats.linregress(x, y)
    return fit.slope, fit.stderr


def fit_flatness_exponent(sweep: SweepResult, protocol: str,
                          window: Tuple[float, float] = (1e-3, 1e-2),
                          floor: float = 1e-30) -> FlatnessFit:
    """Log-log slope of ``final_n`` against ``|omega'/omega - 1|`` inside ``window``.

    Points at or below ``floor`` are discarded and the fit is flagged as
    floor-limited; fewer than five usable points raises ``ValueError``.
    """
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    delta = np.abs(sweep.ratios - 1.0)
    sel = (delta >= lo * (1 - 1e-9)) & (delta <= hi * (1 + 1e-9))
    if sel.sum() < 5:
        raise ValueError(f"need at least 5 grid points in {window}, found {int(sel.sum())}")
    y = sweep.row(protocol)[sel]
    d = delta[sel]
    side = (sweep.ratios - 1.0)[sel]
    ok = np.isfinite(y) & (y > floor)
    limited = bool((~ok).any())
    if ok.sum() < 5:
        raise ValueError(f"{protocol}: excitations are floor-limited in {window}; shrink the window")
    x, ly = np.log(d[ok]), np.log(y[ok])
    slope, err = _slope(x, ly)
    tcrit = stats.t.ppf(0.975, max(1, ok.sum() - 2))

    def side_slope(mask):
        m = ok & mask
        return _slope(np.log(d[m]), np.log(y[m]))[0] if m.sum() >= 3 else math.nan

    return FlatnessFit(protocol, float(slope), float(err),
                       (float(slope - tcrit * err), float(slope + tcrit * err)),
                       int(ok.sum()), float(side_slope(side < 0)), float(side_slope(side > 0)),
                       limited)


# ---------------------------------------------------------------------------
# amplitude scaling


@dataclass(frozen=True)
class ScalingResult:
    kind: str
    s: np.ndarray
    peak: np.ndarray
    exponent: float
    stderr: float


def run_amplitude_scaling(kind: Union[str, ProtocolKind], s_grid: Sequence[float],
                          params: OscillatorParams = OscillatorParams(),
                          fourier_order: int = 1) -> ScalingResult:
    """Peak control amplitude versus shortcut ratio and its power-law exponent.

    The amplitude tracked is the momentum drive for CD, the auxiliary local
    term for UE and the total force otherwise.
    """
    kind = ProtocolKind(kind)
    s = np.asarray(s_grid, dtype=float)
    if s.size < 2 or np.any(s <= 0):
        raise ValueError("s_grid needs at least two positive ratios")
    peaks = []
    for si in s:
        w = build_waveform(ProtocolSpec(kind, float(si), fourier_order=fourier_order), params)
        audit = amplitude_audit(w, params)
        peaks.append({ProtocolKind.CD: audit.peak_momentum,
                      ProtocolKind.UE: audit.peak_auxiliary}.get(kind, audit.peak_force))
    peaks = np.array(peaks)
    slope, err = _slope(np.log(s), np.log(peaks))
    return ScalingResult(kind.value, s, peaks, float(slope), float(err))
