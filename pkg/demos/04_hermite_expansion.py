# %% [markdown]
# Q-function from a Hermite-Gauss mode expansion, used as a cross-check of
# the direct overlap integral.

# %%
import numpy as np

import chronoq as cq

grid = cq.make_grid(0.0, 16, 128, 1.0)
scan = cq.make_scan((-3, 3), 31, (-3, 3), 31)

# %%
for kind in cq.PULSE_KINDS:
    f = cq.make_pulse(cq.PulseSpec(kind), grid)
    direct = cq.q_function(f, scan).values
    errs = [np.abs(cq.q_via_expansion(cq.expand_state(f, m), scan).values - direct).max() for m in (4, 10, 20, 40)]
    print(f"{kind:17s}", "  ".join(f"{e:.1e}" for e in errs))

# %%
# Mode weights: a chirped Gaussian spreads over even orders only.
exp = cq.expand_state(cq.make_pulse(cq.PulseSpec("chirped_gaussian"), grid), 12)
print((np.abs(exp.fock_amplitudes) ** 2).round(4))
