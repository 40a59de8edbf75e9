"""
Transport waveforms
===================

Builders for the four transport drives: a bare linear ramp, the
counterdiabatic (CD) pair ``(f, h)``, the unitarily equivalent (UE) local drive
and the Fourier-optimised drive of order N.  Every builder returns an analytic
:class:`~sta_transport.model.DriveWaveform`; nothing is pre-sampled.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DriveWaveform, OscillatorParams


class ProtocolKind(str, enum.Enum):
    LINEAR = "linear"
    CD = "cd"
    UE = "ue"
    FOURIER = "fourier"


class Direction(str, enum.Enum):
    FORWARD = "forward"  # 0 -> f_max
    BACKWARD = "backward"  # f_max -> 0


class DesignError(ValueError):
    """The Fourier design system could not be solved."""


@dataclass(frozen=True)
class ProtocolSpec:
    """Which protocol to build.

    ``s`` is the shortcut ratio: the protocol lasts ``s`` trap periods.
    ``f_max`` overrides the force cap taken from :class:`OscillatorParams`.
    ``compensate_handoff`` only affects Fourier drives, see
    :func:`fourier_design_system`.
    """

    kind: ProtocolKind
    s: float
    direction: Direction = Direction.BACKWARD
    fourier_order: int = 1
    f_max: Optional[float] = None
    compensate_handoff: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not (np.isfinite(self.s) and self.s > 0):
            raise ValueError(f"shortcut ratio s must be positive, got {self.s!r}")
        if self.kind is ProtocolKind.FOURIER and int(self.fourier_order) < 1:
            raise ValueError(f"fourier_order must be >= 1, got {self.fourier_order!r}")
        if self.f_max is not None and not self.f_max > 0:
            raise ValueError("f_max must be positive")

    @property
    def name(self) -> str:
        if self.kind is ProtocolKind.FOURIER:
            return f"fourier{int(self.fourier_order)}"
        return self.kind.value

    def duration(self, params: OscillatorParams) -> float:
        return self.s * params.period

    def endpoints(self, params: OscillatorParams):
        f_max = params.f_max if self.f_max is None else self.f_max
        if self.direction is Direction.FORWARD:
            return 0.0, f_max
        return f_max, 0.0


def _expect(spec: ProtocolSpec, kind: ProtocolKind):
    if spec.kind is not kind:
        raise ValueError(f"expected a {kind.value} spec, got {spec.kind.value}")


def linear_ramp(f_from: float, f_to: float, duration: float, params: OscillatorParams,
                counterdiabatic: bool = False, label: str = "linear") -> DriveWaveform:
    """Linear force ramp between arbitrary levels, optionally with its CD term.

    The CD momentum drive is ``h = -f_dot / (m w^2)``, constant for a ramp.
    """
    if not duration > 0:
        raise ValueError("ramp duration must be positive")
    slope = (f_to - f_from) / duration
    h_const = -slope / (params.mass * params.omega_nominal ** 2) if counterdiabatic else 0.0

    def force(t):
        return f_from + slope * np.asarray(t, dtype=float)

    def force_dot(t):
        return np.full_like(np.asarray(t, dtype=float), slope)

    def momentum(t):
        return np.full_like(np.asarray(t, dtype=float), h_const)

    return DriveWaveform(
        duration=duration,
        force=force,
        force_dot=force_dot,
        force_ddot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        momentum=momentum,
        label=label,
        meta={"f_from": f_from, "f_to": f_to, "h": h_const},
    )


def build_linear(spec: ProtocolSpec, params: OscillatorParams = OscillatorParams()) -> DriveWaveform:
    _expect(spec, ProtocolKind.LINEAR)
    f0, f1 = spec.endpoints(params)
    return linear_ramp(f0, f1, spec.duration(params), params, label=spec.name)


def build_cd(spec: ProtocolSpec, params: OscillatorParams = OscillatorParams()) -> DriveWaveform:
    """Linear ramp plus the counterdiabatic momentum drive.

    For a backward ramp from ``f_max`` the momentum drive is the positive
    constant ``h_max / (2 pi s)``.
    """
    _expect(spec, ProtocolKind.CD)
    f0, f1 = spec.endpoints(params)
    return linear_ramp(f0, f1, spec.duration(params), params, counterdiabatic=True, label=spec.name)


# Minimal-jerk quintic and its derivatives in normalised time.
def smoothstep(x):
    x = np.asarray(x, dtype=float)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def smoothstep_d1(x):
    x = np.asarray(x, dtype=float)
    return 30.0 * x ** 2 * (1.0 - x) ** 2


def smoothstep_d2(x):
    x = np.asarray(x, dtype=float)
    return 60.0 * x - 180.0 * x ** 2 + 120.0 * x ** 3


def smoothstep_d3(x):
    x = np.asarray(x, dtype=float)
    return 60.0 - 360.0 * x + 360.0 * x ** 2


def smoothstep_d4(x):
    x = np.asarray(x, dtype=float)
    return -360.0 + 720.0 * x


def build_ue(spec: ProtocolSpec, params: OscillatorParams = OscillatorParams()) -> DriveWaveform:
    """Local drive unitarily equivalent to CD transport along a quintic path.

    The force channel carries ``f + f_ddot / w^2`` where ``f`` is the quintic
    path between the endpoints; the extra local term is exposed as
    ``auxiliary``.  No momentum drive.
    """
    _expect(spec, ProtocolKind.UE)
    f0, f1 = spec.endpoints(params)
    span = f1 - f0
    T = spec.duration(params)
    w2 = params.omega_nominal ** 2

    def base(t):
        return f0 + span * smoothstep(np.asarray(t) / T)

    def aux(t):
        return span * smoothstep_d2(np.asarray(t) / T) / (T ** 2 * w2)

    def force(t):
        return base(t) + aux(t)

    def force_dot(t):
        x = np.asarray(t) / T
        return span * (smoothstep_d1(x) / T + smoothstep_d3(x) / (T ** 3 * w2))

    def force_ddot(t):
        x = np.asarray(t) / T
        return span * (smoothstep_d2(x) / T ** 2 + smoothstep_d4(x) / (T ** 4 * w2))

    return DriveWaveform(
        duration=T,
        force=force,
        force_dot=force_dot,
        force_ddot=force_ddot,
        auxiliary=aux,
        label=spec.name,
        meta={"f_from": f0, "f_to": f1, "base": base},
    )


def _quadrature_nodes(T: float, highest_rate: float):
    # Gauss-Legendre on [0, T], resolved well past the fastest oscillation.
    n = int(max(128, 8 * math.ceil(highest_rate * T / math.pi) + 64))
    x, wts = np.polynomial.legendre.leggauss(n)
    return 0.5 * T * (x + 1.0), 0.5 * T * wts


def fourier_modes(n_modes: int):
    """Mode list ``[(kind, n), ...]`` alternating ``sin`` and ``1 - cos`` harmonics.

    Both families vanish at ``t = 0`` and ``t = T``, so the ramp endpoints are
    untouched.  Sines alone are odd about the midpoint and cannot satisfy the
    asymmetric constraints of a leg that starts displaced.
    """
    return [("sin" if i % 2 == 0 else "cos", i // 2 + 1) for i in range(n_modes)]


def _mode_arrays(modes, T):
    k = np.array([2.0 * np.pi * n / T for _, n in modes])
    is_sin = np.array([kind == "sin" for kind, _ in modes])
    return k, is_sin


def _mode_values(t, k, is_sin, deriv: int):
    """d^deriv/dt^deriv of each mode at times ``t``; shape ``t.shape + (M,)``."""
    arg = np.multiply.outer(np.asarray(t, dtype=float), k)
    # sin(x) derivatives cycle sin, cos, -sin, -cos; (1 - cos x) is -cos(x) + 1.
    s = [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)]
    sin_part = s[deriv % 4](arg)
    cos_part = s[(deriv + 3) % 4](arg)  # -cos(x) is sin(x - pi/2)
    if deriv == 0:
        cos_part = cos_part + 1.0
    return np.where(is_sin, sin_part, cos_part) * k ** deriv


def fourier_design_system(order: int, T: float, f_from: float, f_to: float, f_max: float,
                          omega: float, compensate_handoff: bool = True):
    """Square linear system ``A a = b`` for the Fourier drive coefficients.

    The drive is ``f_from + (f_to - f_from) t/T + f_max * sum_m a_m phi_m(t)``
    with ``2 order + 1`` modes from :func:`fourier_modes`.  Row 0 enforces
    ``f_dot(0) = f_dot(T) = 0`` (both ends give the same equation).  The other
    rows null the real and imaginary parts of the first ``order`` frequency
    derivatives, at ``omega``, of

        R(w) = i * int_0^T exp(i w t) f_ddot(t) dt + c * f_from * w (omega - w) / omega,

    with ``c = 1`` if ``compensate_handoff`` else 0.  A leg started in the
    nominal well and run at trap frequency ``w`` ends displaced by
    ``x0 |R(w)| / w^2`` (``c = 1``) from the well it lands in.  For
    ``f_from = 0`` ``R`` is the bare Fourier transform of the acceleration;
    otherwise the second term is the well shift seen when ``w`` differs from
    the design frequency at the start of the leg.
    """
    modes = fourier_modes(2 * order + 1)
    k, is_sin = _mode_arrays(modes, T)
    t, wts = _quadrature_nodes(T, k[-1] + omega)
    accel = _mode_values(t, k, is_sin, 2)
    phase = np.exp(1j * omega * t) * wts
    handoff = {1: -omega, 2: -2.0} if compensate_handoff else {}

    rows = [_mode_values(0.0, k, is_sin, 1)]
    b = [-(f_to - f_from) / (T * f_max)]
    for d in range(order):
        col = 1j * (((1j * t) ** d * phase) @ accel)
        const = (f_from / f_max) * handoff.get(d, 0.0) / omega
        rows += [col.real, col.imag]
        b += [-const, 0.0]
    return np.array(rows), np.array(b)


def fourier_coefficients(order: int, T: float, f_from: float, f_to: float, f_max: float,
                         omega: float, compensate_handoff: bool = True,
                         tol: float = 1e-10) -> np.ndarray:
    """Solve the design system; raises :class:`DesignError` if it is singular."""
    A, b = fourier_design_system(order, T, f_from, f_to, f_max, omega, compensate_handoff)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        # Find the first constraint block that breaks the rank.
        rank_at = [np.linalg.matrix_rank(A[: 1 + 2 * d]) for d in range(order + 1)]
        bad = next((d for d in range(order + 1) if rank_at[d] < 1 + 2 * d), order)
        block = "f_dot boundary" if bad == 0 else f"spectral derivative {bad - 1}"
        raise DesignError(
            f"Fourier design system of order {order} is singular at T = {T} "
            f"(cond {cond:.3g}); rank drops at the {block} constraints"
        )
    a = np.linalg.solve(A, b)
    resid = np.max(np.abs(A @ a - b))
    if resid > tol:
        raise DesignError(f"Fourier design residual {resid:.3g} exceeds {tol:.1g}")
    return a


def build_fourier(spec: ProtocolSpec, params: OscillatorParams = OscillatorParams()) -> DriveWaveform:
    """Fourier-optimised drive with an order-N spectral zero at the nominal frequency."""
    _expect(spec, ProtocolKind.FOURIER)
    f0, f1 = spec.endpoints(params)
    f_max = max(abs(f0), abs(f1))
    T = spec.duration(params)
    order = int(spec.fourier_order)
    a = fourier_coefficients(order, T, f0, f1, f_max, params.omega_nominal,
                             spec.compensate_handoff)
    k, is_sin = _mode_arrays(fourier_modes(a.size), T)
    slope = (f1 - f0) / T
    amp = f_max * a

    def force(t):
        return f0 + slope * np.asarray(t, dtype=float) + _mode_values(t, k, is_sin, 0) @ amp

    def force_dot(t):
        return slope + _mode_values(t, k, is_sin, 1) @ amp

    def force_ddot(t):
        return _mode_values(t, k, is_sin, 2) @ amp

    return DriveWaveform(
        duration=T,
        force=force,
        force_dot=force_dot,
        force_ddot=force_ddot,
        label=spec.name,
        meta={"f_from": f0, "f_to": f1, "coefficients": a.copy(), "order": order},
    )


_BUILDERS = {
    ProtocolKind.LINEAR: build_linear,
    ProtocolKind.CD: build_cd,
    ProtocolKind.UE: build_ue,
    ProtocolKind.FOURIER: build_fourier,
}


def build_waveform(spec: ProtocolSpec, params: OscillatorParams = OscillatorParams()) -> DriveWaveform:
    return _BUILDERS[spec.kind](spec, params)


@dataclass(frozen=True)
class AmplitudeAudit:
    peak_force: float
    peak_momentum: float
    peak_auxiliary: float
    peak_drive_ratio: float  # max |kappa| / (f_max x0), the common laser budget
    exceeds_budget: bool


def amplitude_audit(w: DriveWaveform, params: OscillatorParams = OscillatorParams(),
                    n_samples: int = 4001) -> AmplitudeAudit:
    """Peak control amplitudes over a dense grid in normalised time.

    The budget flag is raised when either channel exceeds its cap
    (``f_max`` for the force, ``h_max`` for the momentum drive).
    """
    if w is None or n_samples < 2:
        raise ValueError("cannot audit an empty waveform")
    t = np.linspace(0.0, w.duration, n_samples)
    f = np.abs(w.f(t))
    h = np.abs(w.h(t))
    aux = np.abs(w.aux(t))
    kappa = np.abs(w.coupling(t, params))
    slack = 1.0 + 1e-12
    exceeds = bool(f.max() > params.f_max * slack or h.max() > params.h_max * slack)
    return AmplitudeAudit(
        peak_force=float(f.max()),
        peak_momentum=float(h.max()),
        peak_auxiliary=float(aux.max()),
        peak_drive_ratio=float(kappa.max() / (params.f_max * params.x0)),
        exceeds_budget=exceeds,
    )
