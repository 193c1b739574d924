# %% [markdown]
# # Fitting a spectrum from somewhere else
#
# The doublet fitter only needs detuning and signal columns.  Here a noisy
# synthetic trace is written to CSV and handed to the same routine the
# `srfm fit` command uses.

# %%
import tempfile
from pathlib import Path

import numpy as np

from srfm import doublet_model
from srfm.runner import run_fit

rng = np.random.default_rng(7)
x = np.linspace(-60, 60, 1201)
y = doublet_model(x, (1.0, 0.7), 2.0, 9.0, 3.5, 0.3) + rng.normal(0, 5e-4, x.size)

path = Path(tempfile.mkdtemp()) / "trace.csv"
np.savetxt(path, np.column_stack([x, y]), delimiter=",", header="detuning_GHz,FM_signal", comments="")

# %%
run = run_fit(path)
f = run.fit
print(f"splitting {f.splitting:.3f} GHz (true 9.0), width {f.width:.3f} GHz (true 7.0)")
print(f"phase {f.phase:.3f} rad (true 0.3), iterations {f.iterations}, converged {f.converged}")
print("residual trace:", np.round(run.fit.trace[:6], 6))
