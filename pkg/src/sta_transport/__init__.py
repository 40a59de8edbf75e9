"""Shortcut-to-adiabaticity transport of a dragged quantum harmonic oscillator."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    CoherentAmplitude,
    DriveWaveform,
    OscillatorParams,
    PhysicalCalibration,
    drive_coupling,
    equilibrium_displacement,
    instantaneous_excitation,
)
from .protocols import (  # noqa: E402
    Direction,
    ProtocolKind,
    ProtocolSpec,
    amplitude_audit,
    build_cd,
    build_fourier,
    build_linear,
    build_ue,
    build_waveform,
)
from .dynamics import (  # noqa: E402
    DensityState,
    FockState,
    NoiseModel,
    phonon_stats,
    propagate_coherent,
    propagate_fock,
    propagate_lindblad,
    to_instantaneous_frame,
)
from .experiments import (  # noqa: E402
    fit_flatness_exponent,
    run_amplitude_scaling,
    run_echo,
    run_instantaneous_trace,
    run_robustness_sweep,
)
