# %% [markdown]
# # Cost of going fast
#
# The CD momentum drive grows as `1/s`, the UE auxiliary force as `1/s**2`.

# %%
from sta_transport import OscillatorParams, run_amplitude_scaling

params = OscillatorParams()
s_grid = [0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0]
for kind in ("cd", "ue"):
    res = run_amplitude_scaling(kind, s_grid, params)
    print(f"{kind}: exponent {res.exponent:.6f}")
    for s, p in zip(res.s, res.peak):
        print(f"   s = {s:4.2f}  peak = {p:8.4f}")

# %% [markdown]
# Shorter than about `s = 0.16` the CD momentum drive exceeds the budget
# `h_max` set by the same laser power that gives `f_max`.

# %%
print("h_max =", round(params.h_max, 4), "; CD momentum at s: h_max / (2 pi s)")
