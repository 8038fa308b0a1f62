# %% [markdown]
# Forward model: from a spectral amplitude to a noisy Q-function scan.

# %%
import numpy as np

import chronoq as cq

grid = cq.make_grid(0.0, 16, 64, 1.0)
scan = cq.make_scan()

# %%
# Each library pulse gives a different phase-space picture. The peak of Q
# sits where the gate mode overlaps the pulse best.
for kind in cq.PULSE_KINDS:
    q = cq.q_function(cq.make_pulse(cq.PulseSpec(kind), grid), scan)
    xi, t = q.argmax()
    print(f"{kind:17s} peak at xi={xi:+.1f} t={t:+.1f}  mean Q={q.values.mean():.3f}")

# %%
# A pulse shifted in frequency moves the peak along xi, a linear spectral
# phase (a delay) moves it along t.
f = cq.make_pulse(cq.PulseSpec("gaussian", center=1.0), grid)
delayed = cq.SpectralAmplitude(grid, f.values * np.exp(-1j * 1.4 * grid.xi))
print(cq.q_function(delayed, scan).argmax())

# %%
# Photon counting: Poisson counts around scale * Q plus a flat background.
q = cq.q_function(cq.make_pulse(cq.PulseSpec("double_pulse"), grid), scan)
counts = cq.simulate_counts(q, scale=2e3, background_level=20, seed=3)
est = cq.subtract_background(counts)
print("peak count", counts.counts.max())
print("similarity to theory", round(cq.similarity(est.values, q.values), 4))
