# %% [markdown]
# Partially coherent light: an equal mixture of two orthogonal modes.

# %%
import chronoq as cq

grid = cq.make_grid(0.0, 16, 64, 1.0)
scan = cq.make_scan()
povm = cq.build_povm(grid, scan)

f0 = cq.make_pulse(cq.PulseSpec("hermite_gauss", order=0), grid)
f1 = cq.make_pulse(cq.PulseSpec("hermite_gauss", order=1), grid)
W = cq.mixed_correlation([0.5, 0.5], [f0, f1])
print("purity of the source", round(cq.purity(W), 3))

# %%
# Large counts approach the noiseless limit.
data = cq.simulate_counts(cq.q_function(W, scan), scale=1e9, seed=5)
result = cq.reconstruct(data, povm)
print("leading eigenvalues", result.eigenvalues[:3].round(3))

# %%
# Eigenmodes come back in either order, compare each with both modes.
for n, mode in enumerate(result.eigenmodes[:2]):
    m = cq.pure_correlation(mode)
    print(n, [round(cq.fidelity(m, cq.pure_correlation(f)), 4) for f in (f0, f1)])
