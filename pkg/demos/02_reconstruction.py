# %% [markdown]
# Maximum-likelihood reconstruction of the spectral correlation from counts.

# %%
import numpy as np

import chronoq as cq

grid = cq.make_grid(0.0, 16, 64, 1.0)
scan = cq.make_scan()
povm = cq.build_povm(grid, scan)

truth = cq.make_pulse(cq.PulseSpec("phase_step"), grid)
data = cq.simulate_counts(cq.q_function(truth, scan), scale=1e8, seed=1)

# %%
result = cq.reconstruct(data, povm, max_iters=2000)
print("iterations", result.iterations, "converged", result.converged)
print("log-likelihood never decreases:", bool(np.all(np.diff(result.history) >= 0)))

# %%
# The dominant eigenmode is the pulse, up to a global phase which no
# intensity measurement can see.
mode, weight = cq.extract_dominant_mode(result)
print("lambda1", round(weight, 4))
print("fidelity", round(cq.fidelity(result.correlation, cq.pure_correlation(truth)), 4))

# %%
# Spectral phase across the bright part of the spectrum, truth vs estimate.
ov = np.vdot(mode.values, truth.values)
est = mode.values * ov / abs(ov)
bright = np.abs(truth.values) > 0.1 * np.abs(truth.values).max()
for x, a, b in list(zip(grid.xi[bright], truth.phase[bright], np.angle(est[bright])))[::3]:
    print(f"xi={x:+.2f}  truth={a:+.3f}  estimate={b:+.3f}")
