# %% [markdown]
# # Width of an undriven dense-vapour line
#
# With no pump, the selective-reflection line of a dense vapour is a
# self-broadened Lorentzian seen through the Fresnel map.  The FM signal is
# the derivative of the reflectivity, and the separation of the reflectivity
# extremes (equivalently the FM zero crossings) times 0.87 estimates the
# full width.

# %%
import numpy as np

from srfm import load_preset, simulate

run = simulate(load_preset("fig2a"))
d = run.derived()
print(f"self width          {d['gamma_self_GHz']:.2f} GHz")
print(f"Lorentz-Lorenz shift {d['lorentz_shift_GHz']:.2f} GHz")
print(f"delta_mm            {run.extrema.delta_mm:.2f} GHz")
print(f"0.87 * delta_mm     {run.width_estimate:.2f} GHz")

# %% [markdown]
# The FM zero crossings sit where the reflectivity peaks and dips, so they
# recover the same separation from the signal an experiment records.

# %%
zeros = [z for z, _ in run.fm_extrema.zero_crossings]
print("FM zero crossings:", np.round(zeros, 2), "separation", round(zeros[-1] - zeros[0], 2))

# %% [markdown]
# Pumping part of the population out of the ground state narrows the line in
# proportion to the remaining ground-state density.

# %%
narrow = simulate(load_preset("fig2b"))
print(f"excited fraction {narrow.derived()['excitation_fraction']:.3f}: "
      f"width {narrow.width_estimate:.2f} GHz")
