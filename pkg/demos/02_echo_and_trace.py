# %% [markdown]
# # Quench echo and adiabatic following
#
# The echo starts in the ground state at `f = 0`, ramps adiabatically to
# `f_max` over one full period, and returns with the protocol under test.
# Any phonons left at the end are the protocol's error.

# %%
import numpy as np

from sta_transport import OscillatorParams, ProtocolKind, ProtocolSpec, run_echo, run_instantaneous_trace

params = OscillatorParams()

for kind in ("linear", "cd", "ue"):
    row = []
    for s in (0.15, 0.35, 0.55, 0.75, 0.95):
        res = run_echo(ProtocolSpec(ProtocolKind(kind), s), params, method="fock")
        row.append(res.final_n)
    print(f"{kind:7s}", "  ".join(f"{n:9.2e}" for n in row))

# %% [markdown]
# CD and UE both come home empty.  They differ *during* transport: halting
# the drive and reading the phonon number in the frame of the displaced well
# shows that only CD follows the instantaneous ground state.

# %%
for kind in ("cd", "ue"):
    tr = run_instantaneous_trace(ProtocolSpec(ProtocolKind(kind), 0.4), params, n_stops=11)
    print(kind, "n_inst:", np.array2string(tr.n_inst, precision=3, floatmode="maxprec"))

# %% [markdown]
# In the lab the instantaneous frame is read out by a fast CD return ramp
# (`s = 0.15`) from the halted position.  The faithful trace replays that
# ramp and agrees with the direct readout.

# %%
tr = run_instantaneous_trace(ProtocolSpec(ProtocolKind.UE, 0.4), params, n_stops=5, faithful=True)
print("direct  ", np.round(tr.n_inst, 6))
print("faithful", np.round(tr.n_inst_faithful, 6))
