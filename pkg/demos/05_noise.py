# %% [markdown]
# # Motional heating and dephasing
#
# The master equation adds `D[a]`, `D[a^dag]` and `D[n]` channels.  With
# pure heating the phonon number grows by the heating rate times the total
# echo duration, on top of whatever the protocol leaves behind.

# %%
from sta_transport import NoiseModel, OscillatorParams, ProtocolKind, ProtocolSpec, run_echo

params = OscillatorParams()
for rate in (0.0, 0.005, 0.02):
    for kind, s in (("cd", 0.4), ("ue", 0.4)):
        res = run_echo(ProtocolSpec(ProtocolKind(kind), s), params, NoiseModel(heating_rate=rate))
        print(f"heating {rate:5.3f}  {kind}: final n = {res.final_n:.4f} "
              f"(rate x duration = {rate * (1 + s):.4f}, {res.method}, dim {res.fock_dim})")

# %% [markdown]
# Dephasing conserves the phonon number of a state at rest, but the echo
# moves the state through displaced wells.  Scrambling the phase of a
# displaced coherent state leaves a mixture that the return leg cannot bring
# back to the ground state, so phonons remain.

# %%
res = run_echo(ProtocolSpec(ProtocolKind.CD, 0.4), params, NoiseModel(dephasing_rate=0.1))
print(f"dephasing 0.1: final n = {res.final_n:.4f}")
