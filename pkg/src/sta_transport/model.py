"""
Dragged harmonic oscillator model
=================================

Dimensionless model of a harmonic oscillator transported by a time dependent
force, with an optional drive on the momentum quadrature.  Units: hbar = 1,
the nominal trap frequency is ``2*pi`` so that one trap period ``T0 = 1``.

The engine works in the static frame

    H = w' a^dag a + f(t) x + h(t) p
      = w' a^dag a + kappa(t) a^dag + conj(kappa(t)) a,

with ``x = x0 (a + a^dag)``, ``p = i p0 (a^dag - a)`` and therefore
``kappa = f x0 + i h p0``.  The quadratures are fixed by the *nominal*
frequency (``x0 = sqrt(1 / (2 m w))``); ``w'`` only enters through the
oscillator term.  This is what a change of the beat-note detuning does to the
laser-driven interaction picture

    H_eff = f x0 (a exp(-i(w t + phi)) + a^dag exp(i(w t + phi))),

where ``phi = 0`` selects the force channel and ``phi = -pi/2`` the momentum
channel.  At ``w' = w`` the two descriptions are unitarily equivalent.
Global phases are dropped throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalCalibration:
    """Optional record tying the dimensionless engine to laboratory units.

    Only used by the IO layer.  ``trap_khz`` is the effective trap frequency
    ``w / 2pi`` and ``period_us`` the trap period ``T0 = 2pi / w``.
    """

    trap_khz: float = 20.0
    period_us: float = 50.0
    motional_mhz: Optional[float] = 3.1

    def __post_init__(self):
        if self.trap_khz <= 0 or self.period_us <= 0:
            raise ValueError("trap_khz and period_us must be positive")
        expected = 1e3 / self.trap_khz
        if not math.isclose(expected, self.period_us, rel_tol=1e-9):
            raise ValueError(
                f"period_us={self.period_us} is inconsistent with "
                f"trap_khz={self.trap_khz} (expected {expected})"
            )

    @property
    def mass_ratio(self) -> Optional[float]:
        """Effective-to-bare mass ratio ``nu / w``; None if ``nu`` is unknown."""
        if self.motional_mhz is None:
            return None
        return 1e3 * self.motional_mhz / self.trap_khz

    def to_microseconds(self, t):
        return np.asarray(t) * self.period_us


@dataclass(frozen=True)
class OscillatorParams:
    """Parameters of the dragged oscillator.

    Parameters
    ----------
    omega_nominal : float
        Design frequency ``w``.  Waveforms are built for this value.
    omega_sim : float, optional
        Frequency ``w'`` used during propagation.  Defaults to ``omega_nominal``.
    g_max : float
        Force cap expressed as ``f_max * x0 / w``, i.e. the coherent
        displacement ``|alpha_eq|`` of the fully displaced well.
    mass : float
        Effective mass ``m``.  It only sets the quadrature scales ``x0``, ``p0``.
    """

    omega_nominal: float = TWO_PI
    omega_sim: Optional[float] = None
    g_max: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.omega_sim is None:
            object.__setattr__(self, "omega_sim", self.omega_nominal)
        for name in ("omega_nominal", "omega_sim", "g_max", "mass"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def x0(self) -> float:
        return math.sqrt(1.0 / (2.0 * self.mass * self.omega_nominal))

    @property
    def p0(self) -> float:
        return 1.0 / (2.0 * self.x0)

    @property
    def period(self) -> float:
        return TWO_PI / self.omega_nominal

    @property
    def f_max(self) -> float:
        return self.g_max * self.omega_nominal / self.x0

    @property
    def h_max(self) -> float:
        """Momentum-channel scale ``f_max / (m w)``; equals ``f_max x0 / p0``."""
        return self.f_max / (self.mass * self.omega_nominal)

    @property
    def omega_ratio(self) -> float:
        return self.omega_sim / self.omega_nominal

    def with_ratio(self, ratio: float) -> "OscillatorParams":
        """Copy with ``omega_sim = ratio * omega_nominal``."""
        return OscillatorParams(self.omega_nominal, ratio * self.omega_nominal, self.g_max, self.mass)

    def nominal(self) -> "OscillatorParams":
        return self.with_ratio(1.0)


@dataclass(frozen=True)
class CoherentAmplitude:
    """Coherent state ``|alpha>`` in ladder-operator units."""

    alpha: complex

    @property
    def n(self) -> float:
        return abs(self.alpha) ** 2

    def __sub__(self, other: "CoherentAmplitude") -> "CoherentAmplitude":
        return CoherentAmplitude(self.alpha - other.alpha)


class WaveformDomainError(ValueError):
    """Raised when a waveform is evaluated outside ``[0, duration]``."""


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class DriveWaveform:
    """Analytic drive on the force and momentum channels over ``[0, duration]``.

    ``force`` is the *total* force channel (for the unitarily equivalent
    protocol this already includes the auxiliary local term), and
    ``auxiliary`` isolates that added term for amplitude audits.  All callables
    accept scalars or arrays.
    """

    duration: float
    force: Callable
    force_dot: Callable
    force_ddot: Callable
    momentum: Callable = _zero
    auxiliary: Callable = _zero
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("waveform duration must be positive")

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        slack = 1e-12 * max(1.0, self.duration)
        if np.any(t < -slack) or np.any(t > self.duration + slack):
            raise WaveformDomainError(
                f"time outside [0, {self.duration}] requested from waveform {self.label!r}"
            )
        return np.clip(t, 0.0, self.duration)

    def f(self, t):
        return self.force(self._check(t))

    def f_dot(self, t):
        return self.force_dot(self._check(t))

    def f_ddot(self, t):
        return self.force_ddot(self._check(t))

    def h(self, t):
        return self.momentum(self._check(t))

    def aux(self, t):
        return self.auxiliary(self._check(t))

    def coupling(self, t, params: OscillatorParams):
        """Ladder coupling ``kappa(t)``."""
        t = self._check(t)
        return drive_coupling(self.force(t), self.momentum(t), params)

    def sample(self, n: int = 401):
        """Sample on a uniform grid; returns dict of arrays t, f, f_dot, f_ddot, h."""
        t = np.linspace(0.0, self.duration, n)
        return {
            "t": t,
            "f": self.force(t),
            "f_dot": self.force_dot(t),
            "f_ddot": self.force_ddot(t),
            "h": self.momentum(t),
        }


def drive_coupling(f_val, h_val, params: OscillatorParams):
    """Coefficient of ``a^dag`` produced by ``f x + h p``."""
    return np.asarray(f_val) * params.x0 + 1j * np.asarray(h_val) * params.p0


def equilibrium_displacement(f_val, params: OscillatorParams) -> CoherentAmplitude:
    """Coherent displacement of the ground state of the well displaced by ``f_val``.

    Equal to ``q / (2 x0)`` with ``q = -f / (m w^2)``.
    """
    return CoherentAmplitude(complex(-f_val * params.x0 / params.omega_nominal))


def equilibrium_alpha(f_val, params: OscillatorParams):
    """Vectorised ``equilibrium_displacement`` returning bare complex values."""
    return -np.asarray(f_val, dtype=float) * params.x0 / params.omega_nominal + 0j


def instantaneous_excitation(state: CoherentAmplitude, f_val, params: OscillatorParams) -> float:
    """Mean phonon number of a coherent state seen from the displaced well."""
    return abs(state.alpha - equilibrium_displacement(f_val, params).alpha) ** 2
