import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from sta_transport.dynamics import (
    DensityState,
    FockState,
    NoiseModel,
    NumericalError,
    PositivityError,
    TruncationError,
    coherent_vector,
    destroy,
    displacement,
    excitation_from_moments,
    fock_dimension,
    lindblad_generator,
    phonon_stats,
    propagate_coherent,
    propagate_fock,
    propagate_lindblad,
    to_instantaneous_frame,
)
from sta_transport.model import (
    CoherentAmplitude,
    DriveWaveform,
    OscillatorParams,
    drive_coupling,
    equilibrium_alpha,
)
from sta_transport.protocols import ProtocolKind, ProtocolSpec, build_waveform

P = OscillatorParams()


def constant_drive(f, h=0.0, duration=1.0):
    return DriveWaveform(
        duration=duration,
        force=lambda t: np.full_like(np.asarray(t, dtype=float), f),
        force_dot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        force_ddot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        momentum=lambda t: np.full_like(np.asarray(t, dtype=float), h),
    )


def idle(duration=1.0):
    return constant_drive(0.0, duration=duration)


# --- coherent oracle -------------------------------------------------------

@pytest.mark.parametrize("ratio", [0.9, 1.0, 1.3])
def test_constant_drive_gives_circular_orbit(ratio):
    p = P.with_ratio(ratio)
    f, h = 0.6 * P.f_max, 0.3 * P.h_max
    k = drive_coupling(f, h, p)
    a0 = 0.2 - 0.1j
    ts = np.linspace(0, 1.0, 13)
    traj = propagate_coherent(constant_drive(f, h), p, a0, ts)
    centre = -k / p.omega_sim
    expected = centre + (a0 - centre) * np.exp(-1j * p.omega_sim * ts)
    np.testing.assert_allclose(traj.alpha, expected, atol=1e-12)


def test_linear_backward_half_period_residual_is_frozen():
    w = build_waveform(ProtocolSpec(ProtocolKind.LINEAR, 0.5), P)
    a0 = equilibrium_alpha(P.f_max, P)
    # closed form for a ramp of rate r from rest: delta = (r x0 / w^2)(1 - e^{-i w T}),
    # at T = half a period |delta|^2 = (2 g / (2 pi s))^2 with g = 1, s = 0.5
    n = propagate_coherent(w, P, a0).final().n
    assert n == pytest.approx((2.0 / np.pi) ** 2, rel=1e-12)


def test_oracle_rejects_decreasing_times():
    with pytest.raises(ValueError):
        propagate_coherent(idle(), P, 0j, [0.5, 0.1])


# --- Fock basis -------------------------------------------------------------

def test_coherent_state_has_poisson_statistics():
    alpha = 1.3 - 0.4j
    st_ = phonon_stats(FockState.coherent(alpha, 40))
    np.testing.assert_allclose(st_.distribution, poisson.pmf(np.arange(40), abs(alpha) ** 2), atol=1e-14)
    assert st_.mean == pytest.approx(abs(alpha) ** 2, rel=1e-12)
    assert FockState.coherent(alpha, 40).expect_a() == pytest.approx(alpha, abs=1e-12)


def test_number_and_vacuum_states():
    assert phonon_stats(FockState.number(3, 8)).mean == 3
    assert phonon_stats(FockState.vacuum(5)).mean == 0
    with pytest.raises(ValueError):
        FockState(np.array([1.0, 1.0]))


def test_fock_dimension_rule():
    assert fock_dimension(0.0) == 10
    assert fock_dimension(1.0) == 17
    assert fock_dimension(1.0, extra_levels=4) == 21


@pytest.mark.parametrize("kind,s", [("cd", 0.4), ("ue", 0.5), ("linear", 0.3)])
def test_fock_tracks_oracle(kind, s):
    w = build_waveform(ProtocolSpec(ProtocolKind(kind), s), P)
    a0 = complex(equilibrium_alpha(P.f_max, P))
    ts = np.linspace(0, w.duration, 20)
    oracle = propagate_coherent(w, P, a0, ts)
    fock = propagate_fock(w, P, FockState.coherent(a0, 24), ts)
    assert np.max(np.abs(fock.expect_a - oracle.alpha)) < 1e-8
    np.testing.assert_allclose(fock.mean_n, np.abs(oracle.alpha) ** 2, atol=1e-8)
    assert fock.norm_drift < 1e-9


def test_fock_truncation_doubling_converges():
    w = build_waveform(ProtocolSpec(ProtocolKind.UE, 0.4), P)
    a0 = complex(equilibrium_alpha(P.f_max, P))
    d = fock_dimension(1.0)
    small = propagate_fock(w, P, FockState.coherent(a0, d)).mean_n[-1]
    big = propagate_fock(w, P, FockState.coherent(a0, 2 * d)).mean_n[-1]
    assert abs(small - big) < 1e-8


def test_fock_raises_when_top_level_fills():
    w = constant_drive(3 * P.f_max, duration=0.5)
    with pytest.raises(TruncationError):
        propagate_fock(w, P, FockState.vacuum(6))


def test_fock_raises_on_norm_drift():
    w = build_waveform(ProtocolSpec(ProtocolKind.CD, 0.4), P)
    with pytest.raises(NumericalError):
        propagate_fock(w, P, FockState.vacuum(20), rtol=1e-2, atol=1e-2, norm_tolerance=1e-14)


# --- density matrices and noise ---------------------------------------------

def test_thermal_like_mixture_mean():
    rho = DensityState(np.diag([2.0, 1.0]) / 3)
    assert phonon_stats(rho).mean == pytest.approx(1 / 3)


@pytest.mark.parametrize("rho", [np.array([[1, 0.1], [0, 0]]), np.diag([1.2, 0.1]),
                                 np.diag([1.1, -0.1])])
def test_invalid_density_rejected(rho):
    with pytest.raises(ValueError):
        DensityState(rho.astype(complex))


def test_noise_rates():
    assert NoiseModel(heating_rate=0.2).rates() == (0.2, 0.2, 0.0)
    down, up, _ = NoiseModel(heating_rate=0.2, thermal_nbar=4.0).rates()
    assert up == 0.2 and down == pytest.approx(0.25)
    assert NoiseModel().is_zero
    with pytest.raises(ValueError):
        NoiseModel(heating_rate=-1)


def test_zero_noise_lindblad_matches_fock():
    w = build_waveform(ProtocolSpec(ProtocolKind.CD, 0.4), P)
    a0 = complex(equilibrium_alpha(P.f_max, P))
    psi = FockState.coherent(a0, 20)
    ts = np.linspace(0, w.duration, 11)
    closed = propagate_fock(w, P, psi, ts)
    opened = propagate_lindblad(w, P, DensityState.from_pure(psi), NoiseModel(), ts)
    np.testing.assert_allclose(opened.mean_n, closed.mean_n, atol=1e-6)
    np.testing.assert_allclose(opened.expect_a, closed.expect_a, atol=1e-6)


def test_pure_heating_is_linear_in_time():
    R = 0.05
    ts = np.linspace(0, 2.0, 9)
    tr = propagate_lindblad(idle(2.0), P, DensityState.from_pure(FockState.vacuum(30)),
                            NoiseModel(heating_rate=R), ts)
    np.testing.assert_allclose(tr.mean_n, R * ts, rtol=1e-2, atol=1e-10)
    assert tr.trace_drift < 1e-8


def test_dephasing_decays_coherence():
    g = 0.3
    alpha = 0.5
    ts = np.linspace(0, 1.0, 6)
    tr = propagate_lindblad(idle(), P, DensityState.from_pure(FockState.coherent(alpha, 20)),
                            NoiseModel(dephasing_rate=g), ts)
    # <a> = sum_n sqrt(n+1) rho_{n,n+1} and each coherence of |dn| = 1 decays at g/2
    np.testing.assert_allclose(np.abs(tr.expect_a), alpha * np.exp(-g * ts / 2), rtol=1e-6)
    np.testing.assert_allclose(tr.mean_n, abs(alpha) ** 2, atol=1e-8)


def test_dissipator_preserves_trace():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = m @ m.conj().T
    rho /= np.trace(rho)
    D = lindblad_generator(6, NoiseModel(heating_rate=0.3, thermal_nbar=2.0, dephasing_rate=0.1))
    out = D(rho)
    assert abs(np.trace(out)) < 1e-12
    np.testing.assert_allclose(out, out.conj().T, atol=1e-12)


def test_positivity_floor_is_enforced():
    w = build_waveform(ProtocolSpec(ProtocolKind.CD, 0.4), P)
    rho0 = DensityState.from_pure(FockState.vacuum(20))
    with pytest.raises((PositivityError, NumericalError)):
        propagate_lindblad(w, P, rho0, NoiseModel(heating_rate=0.1), rtol=1e-1, atol=1e-1,
                           positivity_floor=1e-3)


# --- frames -----------------------------------------------------------------

def test_displacement_makes_coherent_states():
    beta = 0.7 + 0.2j
    v = displacement(beta, 40)[:, 0]
    np.testing.assert_allclose(v, coherent_vector(beta, 40), atol=1e-12)
    a = destroy(4)
    np.testing.assert_allclose(np.diag(a.conj().T @ a), [0, 1, 2, 3])


@settings(max_examples=25, deadline=None)
@given(re=st.floats(-1, 1), im=st.floats(-1, 1), frac=st.floats(-1, 1))
def test_frame_shift_consistent_across_representations(re, im, frac):
    alpha, f = complex(re, im), frac * P.f_max
    dim = 40
    coh = to_instantaneous_frame(CoherentAmplitude(alpha), f, P)
    fock = to_instantaneous_frame(FockState.coherent(alpha, dim), f, P)
    dens = to_instantaneous_frame(DensityState.from_pure(FockState.coherent(alpha, dim)), f, P)
    assert fock.expect_a() == pytest.approx(coh.alpha, abs=1e-9)
    assert dens.expect_a() == pytest.approx(coh.alpha, abs=1e-9)
    assert phonon_stats(fock).mean == pytest.approx(coh.n, abs=1e-9)
    moments = excitation_from_moments(abs(alpha) ** 2, alpha, f, P)
    assert moments == pytest.approx(coh.n, abs=1e-12)
    back = to_instantaneous_frame(fock, f, P, inverse=True)
    assert back.expect_a() == pytest.approx(alpha, abs=1e-9)


def test_frame_shift_detects_leakage():
    with pytest.raises(TruncationError):
        to_instantaneous_frame(FockState.number(7, 8), P.f_max, P)
