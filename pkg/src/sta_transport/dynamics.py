"""
Propagators for the driven oscillator
=====================================

Three routes through the same Hamiltonian

    H(t) = w' a^dag a + kappa(t) a^dag + conj(kappa(t)) a:

* :func:`propagate_coherent` -- exact coherent-state solution by quadrature,
  used as the oracle for everything else;
* :func:`propagate_fock` -- Schroedinger equation in a truncated Fock basis;
* :func:`propagate_lindblad` -- master equation with heating and dephasing.

Both matrix integrators run in the interaction picture of ``w' a^dag a``,
where the generator only contains the drive, and rotate back to the static
frame on output.  The dissipators used here are invariant under that rotation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.special import gammaln

from .model import (
    CoherentAmplitude,
    DriveWaveform,
    OscillatorParams,
    equilibrium_alpha,
)


class NumericalError(RuntimeError):
    """Base class for integration failures."""


class TruncationError(NumericalError):
    pass


class PositivityError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


def destroy(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def fock_dimension(alpha_max: float, extra_levels: int = 0) -> int:
    """Truncation rule ``D >= |a|^2 + 6|a| + 10`` for coherent amplitude ``|a|``."""
    a = abs(alpha_max)
    return int(math.ceil(a * a + 6.0 * a + 10.0)) + int(extra_levels)


@dataclass(frozen=True)
class FockState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.ndim != 1 or amp.size < 2:
            raise ValueError("Fock amplitudes must be a vector of length >= 2")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"Fock state is not normalised (norm^2 = {norm!r})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def number(cls, n: int, dim: int) -> "FockState":
        v = np.zeros(dim, dtype=complex)
        v[n] = 1.0
        return cls(v)

    @classmethod
    def vacuum(cls, dim: int) -> "FockState":
        return cls.number(0, dim)

    @classmethod
    def coherent(cls, alpha: complex, dim: int) -> "FockState":
        """Coherent state truncated to ``dim`` levels; errors if the tail is not negligible."""
        return cls(coherent_vector(alpha, dim))

    def expect_a(self) -> complex:
        psi = self.amplitudes
        return complex(np.vdot(psi[:-1], np.sqrt(np.arange(1, psi.size)) * psi[1:]))


def coherent_vector(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    if alpha == 0:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"density matrix trace is {tr!r}")
        if np.linalg.eigvalsh(rho).min() < -1e-8:
            raise ValueError("density matrix has negative eigenvalues")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def from_pure(cls, psi: Union[FockState, np.ndarray]) -> "DensityState":
        v = psi.amplitudes if isinstance(psi, FockState) else np.asarray(psi, dtype=complex)
        return cls(np.outer(v, v.conj()))

    def expect_a(self) -> complex:
        a = np.sqrt(np.arange(1, self.dim))
        return complex(np.sum(a * np.diagonal(self.rho, offset=-1)))


@dataclass(frozen=True)
class NoiseModel:
    """Motional noise channels.

    ``heating_rate`` is the heating rate from the ground state, ``G * nbar``, in
    quanta per unit time.  ``thermal_nbar`` is the bath occupation; the
    default ``inf`` is the pure-heating limit in which ``<n>`` grows exactly
    linearly.  ``dephasing_rate`` multiplies ``D[a^dag a]``.
    """

    heating_rate: float = 0.0
    thermal_nbar: float = math.inf
    dephasing_rate: float = 0.0

    def __post_init__(self):
        for name in ("heating_rate", "thermal_nbar", "dephasing_rate"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.heating_rate > 0 and self.thermal_nbar == 0:
            raise ValueError("a heating rate needs thermal_nbar > 0")

    @property
    def is_zero(self) -> bool:
        return self.heating_rate == 0 and self.dephasing_rate == 0

    def rates(self):
        """``(gamma_down, gamma_up, gamma_phi)`` multiplying D[a], D[a^dag], D[n]."""
        up = self.heating_rate
        down = up
        if up and not math.isinf(self.thermal_nbar):
            down = up * (1.0 + 1.0 / self.thermal_nbar)
        return down, up, self.dephasing_rate


@dataclass(frozen=True)
class PhononStats:
    mean: float
    distribution: np.ndarray


def phonon_stats(state: Union[FockState, DensityState]) -> PhononStats:
    if isinstance(state, FockState):
        p = np.abs(state.amplitudes) ** 2
    elif isinstance(state, DensityState):
        p = np.clip(np.diagonal(state.rho).real, 0.0, None)
    else:
        raise TypeError(f"cannot take phonon statistics of {type(state).__name__}")
    n = np.arange(p.size)
    return PhononStats(float(n @ p), p)


# ---------------------------------------------------------------------------
# exact coherent oracle


@dataclass(frozen=True)
class CoherentTrajectory:
    times: np.ndarray
    alpha: np.ndarray
    error_estimate: float

    def final(self) -> CoherentAmplitude:
        return CoherentAmplitude(complex(self.alpha[-1]))


@lru_cache(maxsize=8)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gl(g, a, b, n):
    x, w = _gauss(n)
    half = 0.5 * (b - a)
    return half * (w @ g(a + half * (x + 1.0)))


def _adaptive_gl(g, a, b, tol, depth=0):
    coarse, fine = _gl(g, a, b, 20), _gl(g, a, b, 40)
    err = abs(fine - coarse)
    if err <= tol or depth >= 30:
        return fine, err
    m = 0.5 * (a + b)
    left, e1 = _adaptive_gl(g, a, m, 0.5 * tol, depth + 1)
    right, e2 = _adaptive_gl(g, m, b, 0.5 * tol, depth + 1)
    return left + right, e1 + e2


def propagate_coherent(w: DriveWaveform, params: OscillatorParams,
                       alpha0: Union[CoherentAmplitude, complex] = 0j,
                       times: Optional[Sequence[float]] = None,
                       tol: float = 1e-12) -> CoherentTrajectory:
    """Exact coherent amplitude ``alpha(t)`` under the waveform.

    ``alpha(t) = exp(-i w' t) [alpha0 - i int_0^t exp(i w' s) kappa(s) ds]``, the
    integral done by adaptive Gauss-Legendre on panels no wider than an
    eighth of a trap period.  ``times`` defaults to ``[0, duration]``.
    """
    a0 = alpha0.alpha if isinstance(alpha0, CoherentAmplitude) else complex(alpha0)
    ts = np.array([0.0, w.duration] if times is None else times, dtype=float)
    if ts.ndim != 1 or np.any(np.diff(ts) < 0):
        raise ValueError("times must be a non-decreasing 1-d sequence")
    wp = params.omega_sim

    def integrand(s):
        return np.exp(1j * wp * s) * w.coupling(s, params)

    max_panel = params.period / 8.0
    cumulative = np.empty(ts.size, dtype=complex)
    total, err, prev = 0j, 0.0, 0.0
    for i, t in enumerate(ts):
        w._check(t)
        if t > prev:
            n_panels = max(1, int(math.ceil((t - prev) / max_panel)))
            edges = np.linspace(prev, t, n_panels + 1)
            for lo, hi in zip(edges[:-1], edges[1:]):
                val, e = _adaptive_gl(integrand, lo, hi, tol / n_panels / max(1, ts.size))
                total += val
                err += e
        cumulative[i] = total
        prev = max(prev, t)
    # quadrature error is measured relative to the coupling scale
    scale = max(1.0, float(np.max(np.abs(w.coupling(np.linspace(0, w.duration, 17), params)))))
    if err > tol * scale * max(1.0, w.duration):
        raise QuadratureError(f"coherent quadrature reached error {err:.3g}, requested {tol:.1g}")
    alpha = np.exp(-1j * wp * ts) * (a0 - 1j * cumulative)
    return CoherentTrajectory(ts, alpha, err)


# ---------------------------------------------------------------------------
# truncated Fock basis


@dataclass(frozen=True)
class FockTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim), static frame
    mean_n: np.ndarray
    expect_a: np.ndarray
    norm_drift: float

    def state(self, i: int = -1) -> FockState:
        psi = self.states[i]
        return FockState(psi / math.sqrt(np.vdot(psi, psi).real))


def _times(w: DriveWaveform, times):
    ts = np.array([0.0, w.duration] if times is None else times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) < 0):
        raise ValueError("times must be a non-decreasing 1-d sequence")
    w._check(ts)
    return ts


def _rotating_coupling(w, params):
    wp = params.omega_sim

    def c(t):
        return complex(w.coupling(t, params)) * np.exp(1j * wp * t)

    return c


def propagate_fock(w: DriveWaveform, params: OscillatorParams, psi0: FockState,
                   times: Optional[Sequence[float]] = None, rtol: float = 1e-10,
                   atol: float = 1e-12, truncation_threshold: float = 1e-10,
                   norm_tolerance: float = 1e-9) -> FockTrajectory:
    """Integrate the Schroedinger equation in ``psi0.dim`` Fock levels.

    DOP853 with local error control on the interaction-picture amplitudes.
    Raises :class:`TruncationError` when the top level becomes populated and
    :class:`NumericalError` when the norm drifts beyond ``norm_tolerance``.
    """
    ts = _times(w, times)
    dim = psi0.dim
    sq = np.sqrt(np.arange(1, dim, dtype=float))
    c = _rotating_coupling(w, params)

    def rhs(t, psi):
        ct = c(t)
        out = np.zeros_like(psi)
        out[1:] += ct * sq * psi[:-1]  # a^dag
        out[:-1] += np.conj(ct) * sq * psi[1:]  # a
        return -1j * out

    if ts[-1] > 0:
        sol = solve_ivp(rhs, (0.0, ts[-1]), psi0.amplitudes.copy(), method="DOP853",
                        t_eval=ts, rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"Fock integration failed: {sol.message}")
        psi_i = sol.y.T
    else:
        psi_i = np.repeat(psi0.amplitudes[None, :], ts.size, axis=0)

    n = np.arange(dim)
    psi = psi_i * np.exp(-1j * params.omega_sim * np.outer(ts, n))
    pops = np.abs(psi) ** 2
    top = pops[:, -1].max()
    if top > truncation_threshold:
        raise TruncationError(
            f"top Fock level population {top:.3g} exceeds {truncation_threshold:.1g} "
            f"at dim {dim}; increase the Fock dimension"
        )
    norms = pops.sum(axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > norm_tolerance:
        raise NumericalError(f"norm drift {drift:.3g} exceeds {norm_tolerance:.1g}; tighten rtol")
    ea = np.einsum("ij,ij->i", psi[:, :-1].conj(), sq * psi[:, 1:])
    return FockTrajectory(ts, psi, pops @ n, ea, drift)


# ---------------------------------------------------------------------------
# Lindblad master equation


@dataclass(frozen=True)
class DensityTrajectory:
    times: np.ndarray
    rhos: np.ndarray  # (n_times, dim, dim), static frame
    mean_n: np.ndarray
    expect_a: np.ndarray
    trace_drift: float
    min_eigenvalue: float

    def state(self, i: int = -1) -> DensityState:
        rho = 0.5 * (self.rhos[i] + self.rhos[i].conj().T)
        return DensityState(rho / np.trace(rho).real)


def lindblad_generator(dim: int, noise: NoiseModel):
    """Return ``D(rho)``, the dissipative part of the generator, for ``dim`` levels."""
    down, up, dephase = noise.rates()
    A = destroy(dim)
    Ad = A.conj().T
    n = np.arange(dim, dtype=float)
    AdA = n  # diagonal
    AAd = np.diag(A @ Ad).real  # truncated: last entry 0
    dephase_kernel = -0.5 * dephase * np.subtract.outer(n, n) ** 2

    def dissipator(rho):
        out = dephase_kernel * rho if dephase else np.zeros_like(rho)
        if down:
            out += down * (A @ rho @ Ad - 0.5 * (AdA[:, None] + AdA[None, :]) * rho)
        if up:
            out += up * (Ad @ rho @ A - 0.5 * (AAd[:, None] + AAd[None, :]) * rho)
        return out

    return dissipator


def propagate_lindblad(w: DriveWaveform, params: OscillatorParams, rho0: DensityState,
                       noise: NoiseModel = NoiseModel(),
                       times: Optional[Sequence[float]] = None, rtol: float = 1e-8,
                       atol: float = 1e-10, positivity_floor: float = -1e-6,
                       truncation_threshold: float = 1e-8) -> DensityTrajectory:
    """Integrate ``rho' = -i[H, rho] + G(nbar+1)D[a] + G nbar D[a^dag] + g_phi D[n]``."""
    ts = _times(w, times)
    dim = rho0.dim
    A = destroy(dim)
    Ad = A.conj().T
    c = _rotating_coupling(w, params)
    dissipator = lindblad_generator(dim, noise)

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        ct = c(t)
        H = ct * Ad + np.conj(ct) * A
        out = -1j * (H @ rho - rho @ H) + dissipator(rho)
        return out.ravel()

    if ts[-1] > 0:
        sol = solve_ivp(rhs, (0.0, ts[-1]), rho0.rho.ravel().copy(), method="DOP853",
                        t_eval=ts, rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"Lindblad integration failed: {sol.message}")
        rho_i = sol.y.T.reshape(ts.size, dim, dim)
    else:
        rho_i = np.repeat(rho0.rho[None], ts.size, axis=0)

    n = np.arange(dim)
    rot = np.exp(-1j * params.omega_sim * ts[:, None, None] * np.subtract.outer(n, n)[None])
    rhos = rho_i * rot
    pops = np.einsum("tii->ti", rhos).real
    traces = pops.sum(axis=1)
    drift = float(np.max(np.abs(traces - 1.0)))
    min_eig = min(float(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min()) for r in rhos)
    if min_eig < positivity_floor:
        raise PositivityError(
            f"density matrix eigenvalue {min_eig:.3g} below {positivity_floor:.1g}; "
            "reduce the step tolerance"
        )
    if pops[:, -1].max() > truncation_threshold:
        raise TruncationError(
            f"top Fock level population {pops[:, -1].max():.3g} exceeds "
            f"{truncation_threshold:.1g} at dim {dim}; increase the Fock dimension"
        )
    sq = np.sqrt(np.arange(1, dim))
    ea = np.einsum("tk,k->t", np.diagonal(rhos, offset=-1, axis1=1, axis2=2), sq)
    return DensityTrajectory(ts, rhos, pops @ n, ea, drift, min_eig)


# ---------------------------------------------------------------------------
# frames


def displacement(beta: complex, dim: int) -> np.ndarray:
    """Truncated displacement operator ``exp(beta a^dag - conj(beta) a)``."""
    A = destroy(dim)
    return expm(beta * A.conj().T - np.conj(beta) * A)


State = Union[CoherentAmplitude, FockState, DensityState]


def to_instantaneous_frame(state: State, f_val: float, params: OscillatorParams,
                           inverse: bool = False, defect_tol: float = 1e-8) -> State:
    """Shift ``state`` into the frame of the well displaced by ``f_val``.

    Applies ``D(-alpha_eq)`` (or ``D(alpha_eq)`` with ``inverse=True``).  The
    Fock versions work in an enlarged space and fail with
    :class:`TruncationError` if more than ``defect_tol`` of the population
    ends up above the original dimension.
    """
    beta = complex(equilibrium_alpha(f_val, params))
    if not inverse:
        beta = -beta
    if isinstance(state, CoherentAmplitude):
        return CoherentAmplitude(state.alpha + beta)
    if beta == 0:
        return state
    dim = state.dim
    big = dim + fock_dimension(abs(beta))
    U = displacement(beta, big)
    if isinstance(state, FockState):
        v = np.zeros(big, dtype=complex)
        v[:dim] = state.amplitudes
        out = U @ v
        leak = float(np.sum(np.abs(out[dim:]) ** 2))
        if leak > defect_tol:
            raise TruncationError(f"frame shift leaks {leak:.3g} of the norm above dim {dim}")
        out = out[:dim]
        return FockState(out / np.linalg.norm(out))
    if isinstance(state, DensityState):
        r = np.zeros((big, big), dtype=complex)
        r[:dim, :dim] = state.rho
        out = U @ r @ U.conj().T
        leak = float(1.0 - np.trace(out[:dim, :dim]).real)
        if leak > defect_tol:
            raise TruncationError(f"frame shift leaks {leak:.3g} of the trace above dim {dim}")
        out = out[:dim, :dim]
        out = 0.5 * (out + out.conj().T)
        return DensityState(out / np.trace(out).real)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def excitation_from_moments(mean_n, expect_a, f_val, params: OscillatorParams):
    """``<n>`` in the displaced frame from lab moments: ``<n> - 2 Re(b* <a>) + |b|^2``.

    Exact consequence of ``D(b)^dag a D(b) = a + b``; vectorised over times.
    """
    b = equilibrium_alpha(f_val, params)
    return np.asarray(mean_n) - 2.0 * np.real(np.conj(b) * np.asarray(expect_a)) + np.abs(b) ** 2
