# %% [markdown]
# # Transport waveforms
#
# Four ways to drag the well from `f_max` back to zero in `s` trap periods.
# Units: hbar = 1, nominal trap frequency 2*pi, so one period is 1.

# %%
import numpy as np

from sta_transport import OscillatorParams, ProtocolKind, ProtocolSpec, amplitude_audit, build_waveform

params = OscillatorParams()
print(f"x0 = {params.x0:.4f}, p0 = {params.p0:.4f}")
print(f"f_max = {params.f_max:.4f}, h_max = {params.h_max:.4f}")

# %% [markdown]
# The CD pair adds a constant momentum drive to the linear ramp.  The UE drive
# is local (no momentum channel) but has an extra force term that grows as
# `s**-2`.  The Fourier drive oscillates, overshooting the end points.

# %%
specs = [
    ProtocolSpec(ProtocolKind.LINEAR, 0.4),
    ProtocolSpec(ProtocolKind.CD, 0.4),
    ProtocolSpec(ProtocolKind.UE, 0.4),
    ProtocolSpec(ProtocolKind.FOURIER, 1.5, fourier_order=3),
]
for spec in specs:
    w = build_waveform(spec, params)
    a = amplitude_audit(w, params)
    print(f"{spec.name:9s} T = {w.duration:.2f}  max|f|/f_max = {a.peak_force / params.f_max:6.3f}  "
          f"max|h|/h_max = {a.peak_momentum / params.h_max:6.3f}  over budget: {a.exceeds_budget}")

# %% [markdown]
# A coarse table of the UE force and the Fourier force in time.

# %%
ue = build_waveform(specs[2], params).sample(9)
four = build_waveform(specs[3], params).sample(9)
print("t/T     UE f/f_max   Fourier3 f/f_max")
for x, fu, ff in zip(np.linspace(0, 1, 9), ue["f"], four["f"]):
    print(f"{x:4.2f}   {fu / params.f_max:9.4f}   {ff / params.f_max:9.4f}")
