# %% [markdown]
# # Splitting versus generalized Rabi frequency
#
# The sweep preset varies the Rabi frequency on resonance and the pump
# detuning at fixed Rabi frequency.  A line through the origin summarizes how
# the fitted splitting tracks the generalized Rabi frequency.

# %%
import numpy as np

from srfm import load_preset
from srfm.runner import run_sweep

sweep = run_sweep(load_preset("fig3"), threads=4)
print(f"{'Omega~':>8s} {'splitting':>10s} {'ratio':>7s}")
for p in sweep.points:
    print(f"{p.omega_tilde_GHz:8.3f} {p.splitting_GHz:10.3f} {p.splitting_GHz / p.omega_tilde_GHz:7.3f}")
lf = sweep.linear_fit
print(f"slope {lf.slope:.4f} +/- {lf.slope_stderr:.4f}")

# %% [markdown]
# The ratio is above one across the range.  Allowing an intercept shows
# whether the excess is a constant offset or a true change of slope.

# %%
from srfm import fit_linear

free = fit_linear([(p.omega_tilde_GHz, p.splitting_GHz) for p in sweep.points], through_origin=False)
print(f"free line: slope {free.slope:.3f}, intercept {free.intercept:.3f} GHz")
