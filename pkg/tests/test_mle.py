import warnings

import numpy as np
import pytest
from conftest import noiseless_counts

import chronoq as cq
from chronoq.core import InvalidArgument
from chronoq.forward import coherent_mode_vectors
from chronoq.hermite import hg_functions
from chronoq.mle import IncompleteScanWarning, ReconstructionResult


def _result_from(W, ps_grid):
    lam, modes = W.eigen()
    lam = np.clip(lam, 0, None)
    return ReconstructionResult(W, lam / lam.sum(), modes, 0, 0.0, True, np.zeros(1), ps_grid)


@pytest.fixture(scope="module")
def hg_mixture(grid64, scan, povm64):
    f0 = cq.make_pulse(cq.PulseSpec("hermite_gauss", order=0), grid64)
    f1 = cq.make_pulse(cq.PulseSpec("hermite_gauss", order=1), grid64)
    return f0, f1


# ---- POVM -----------------------------------------------------------------


def test_povm_size_and_norms(grid128, scan):
    povm = cq.build_povm(grid128, scan)
    assert povm.size == 1681
    np.testing.assert_allclose(np.linalg.norm(povm.elements, axis=1), 1.0, atol=1e-14)
    G = povm.completeness
    np.testing.assert_allclose(G, G.conj().T, atol=0)


def test_povm_completeness_well_conditioned_on_low_modes(grid128, scan):
    povm = cq.build_povm(grid128, scan)
    phi = hg_functions(15, grid128.xi) * np.sqrt(grid128.dxi)
    G = povm.completeness
    restricted = np.linalg.eigvalsh(phi @ G @ phi.T)
    assert restricted.min() > 1e-2 * np.linalg.eigvalsh(G).max()


def test_povm_support_is_positive(povm64):
    basis, g = povm64.support()
    assert np.all(g > 0)
    np.testing.assert_allclose(basis.conj().T @ basis, np.eye(g.size), atol=1e-12)
    Ginv = povm64.inverse_sqrt_completeness()
    np.testing.assert_allclose(Ginv, Ginv.conj().T, atol=1e-8)


def test_povm_single_point_warns(grid64):
    with pytest.warns(IncompleteScanWarning):
        cq.build_povm(grid64, cq.make_scan((0, 0), 1, (0, 0), 1))


def test_povm_kernel_symmetry(grid64):
    # E(-xi, -t) is E(xi, t) read backwards along the frequency axis, and
    # E(xi, -t) is its complex conjugate
    rng = np.random.default_rng(1)
    for xi, t in rng.uniform(-3, 3, size=(10, 2)):
        e = coherent_mode_vectors(grid64, [[xi, t], [-xi, -t], [xi, -t]])
        np.testing.assert_allclose(e[1], e[0][::-1], atol=1e-14)
        np.testing.assert_allclose(e[2], e[0].conj(), atol=1e-14)


# ---- log-likelihood ---------------------------------------------------------


def _perturbed(W, rng, size):
    n = W.grid.n_points
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = W.density() + size * (x @ x.conj().T) / n**2
    return cq.SpectralCorrelation.from_density(W.grid, rho / np.trace(rho).real)


def test_true_state_maximizes_likelihood(grid64, scan, povm64):
    f = cq.make_pulse(cq.PulseSpec("phase_step"), grid64)
    W = cq.pure_correlation(f)
    data = noiseless_counts(cq.q_function(f, scan))
    best = cq.log_likelihood(W, data, povm64)
    rng = np.random.default_rng(2)
    for _ in range(50):
        assert best >= cq.log_likelihood(_perturbed(W, rng, rng.uniform(1e-3, 1)), data, povm64)


def test_single_point_counts_favor_its_mode(grid64, scan, povm64):
    k = 900
    counts = np.zeros(scan.size, dtype=np.int64)
    counts[k] = 1000
    data = cq.CountMap(scan, counts.reshape(scan.shape), np.zeros(scan.shape), 1.0, 0)
    xi, t = scan.points()[k]
    W = cq.pure_correlation(cq.coherent_mode(grid64, xi, t))
    best = cq.log_likelihood(W, data, povm64)
    rng = np.random.default_rng(3)
    n = grid64.n_points
    for _ in range(50):
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        other = cq.pure_correlation(cq.normalize(cq.SpectralAmplitude(grid64, v)))
        assert best > cq.log_likelihood(other, data, povm64)


def test_uniform_counts_prefer_centered_state(grid64, scan, povm64):
    data = cq.CountMap(scan, np.ones(scan.shape, dtype=np.int64), np.zeros(scan.shape), 1.0, 0)
    centered = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("gaussian"), grid64))
    shifted = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("gaussian", center=2.0), grid64))
    a = cq.log_likelihood(centered, data, povm64)
    b = cq.log_likelihood(shifted, data, povm64)
    # frozen reference values of sum_k log p_k over the 1681 points
    assert a == pytest.approx(-17913.866742143, rel=1e-9)
    assert b == pytest.approx(-21245.895638564, rel=1e-9)
    assert a > b


def test_log_likelihood_mismatch(grid64, grid128, scan, povm64):
    data = cq.CountMap(scan, np.ones(scan.shape, dtype=np.int64), np.zeros(scan.shape), 1.0, 0)
    W = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("gaussian"), grid128))
    with pytest.raises(InvalidArgument):
        cq.log_likelihood(W, data, povm64)
    zero = cq.CountMap(scan, np.zeros(scan.shape, dtype=np.int64), np.zeros(scan.shape), 1.0, 0)
    with pytest.raises(InvalidArgument):
        cq.log_likelihood(cq.pure_correlation(cq.make_pulse(cq.PulseSpec("gaussian"), grid64)), zero, povm64)


# ---- reconstruction -------------------------------------------------------------


def test_reconstruct_gaussian(grid64, scan, povm64):
    f = cq.make_pulse(cq.PulseSpec("gaussian"), grid64)
    r = cq.reconstruct(noiseless_counts(cq.q_function(f, scan)), povm64)
    assert r.converged
    assert r.eigenvalues[0] > 0.99
    assert cq.fidelity(r.correlation, cq.pure_correlation(f)) > 0.99
    assert np.all(np.diff(r.history) >= -1e-12)
    assert r.final_log_likelihood < 0


def test_reconstruct_mixture(hg_mixture, scan, povm64):
    f0, f1 = hg_mixture
    W = cq.mixed_correlation([0.5, 0.5], [f0, f1])
    r = cq.reconstruct(noiseless_counts(cq.q_function(W, scan)), povm64)
    assert 0.45 <= r.eigenvalues[0] <= 0.55
    assert 0.45 <= r.eigenvalues[1] <= 0.55
    w = cq.mode_weights(r)
    assert np.all(w >= 0) and np.all(np.diff(w) <= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-10)


def test_reconstruct_dominant_of_unequal_mixture(hg_mixture, scan, povm64):
    f0, f1 = hg_mixture
    W = cq.mixed_correlation([0.7, 0.3], [f0, f1])
    r = cq.reconstruct(noiseless_counts(cq.q_function(W, scan)), povm64)
    mode, weight = cq.extract_dominant_mode(r)
    assert weight == pytest.approx(0.7, abs=0.05)
    assert cq.fidelity(cq.pure_correlation(mode), cq.pure_correlation(f0)) > 0.98


def test_first_iteration_increases(grid64, scan, povm64):
    rng = np.random.default_rng(5)
    for _ in range(20):
        q = cq.QFunction(scan, rng.uniform(0.01, 1, scan.shape))
        data = cq.simulate_counts(q, 1e3, 0, seed=int(rng.integers(1 << 30)))
        r = cq.reconstruct(data, povm64, max_iters=1)
        assert r.history[1] > r.history[0]


def test_iterates_are_valid_correlations(grid64, scan, povm64):
    f = cq.make_pulse(cq.PulseSpec("double_pulse"), grid64)
    data = cq.simulate_counts(cq.q_function(f, scan), 1e4, 0, seed=3)
    seen = []

    def check(it, rho):
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)
        lam = np.linalg.eigvalsh(rho)
        assert lam.min() >= -1e-10 * lam.max()
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        seen.append(it)

    r = cq.reconstruct(data, povm64, max_iters=15, tol=0, callback=check)
    assert seen == list(range(1, 16))
    assert r.correlation.invariant_violations() == []
    np.testing.assert_allclose(sum(r.eigenvalues), 1.0, atol=1e-10)
    rebuilt = sum(l * cq.pure_correlation(m).matrix for l, m in zip(r.eigenvalues, r.eigenmodes))
    np.testing.assert_allclose(rebuilt, r.correlation.matrix, atol=1e-10)


def test_zero_iterations(grid64, scan, povm64):
    f = cq.make_pulse(cq.PulseSpec("gaussian"), grid64)
    r = cq.reconstruct(noiseless_counts(cq.q_function(f, scan)), povm64, max_iters=0)
    assert r.iterations == 0 and not r.converged
    assert len(r.history) == 1


def test_permutation_invariance(grid64, scan, povm64):
    f = cq.make_pulse(cq.PulseSpec("chirped_gaussian"), grid64)
    data = cq.simulate_counts(cq.q_function(f, scan), 1e5, 0, seed=8)
    a = cq.reconstruct(data, povm64, max_iters=10, tol=0)
    order = np.random.default_rng(0).permutation(povm64.size)
    b = cq.reconstruct(data, povm64.permuted(order), max_iters=10, tol=0)
    assert np.array_equal(a.correlation.matrix, b.correlation.matrix)
    assert np.array_equal(a.history, b.history)


def test_workers_invariance(grid64, scan, povm64):
    f = cq.make_pulse(cq.PulseSpec("phase_step"), grid64)
    data = cq.simulate_counts(cq.q_function(f, scan), 1e5, 0, seed=9)
    a = cq.reconstruct(data, povm64, max_iters=10, tol=0, workers=1)
    b = cq.reconstruct(data, povm64, max_iters=10, tol=0, workers=4)
    assert np.array_equal(a.correlation.matrix, b.correlation.matrix)


def test_reconstruct_rejects(grid64, grid128, scan, povm64):
    other = cq.make_scan(n_xi=5, n_t=5)
    data = cq.CountMap(other, np.ones(other.shape, dtype=np.int64), np.zeros(other.shape), 1.0, 0)
    with pytest.raises(InvalidArgument):
        cq.reconstruct(data, povm64)
    zero = cq.CountMap(scan, np.zeros(scan.shape, dtype=np.int64), np.zeros(scan.shape), 1.0, 0)
    with pytest.raises(InvalidArgument):
        cq.reconstruct(zero, povm64)
    ones = cq.CountMap(scan, np.ones(scan.shape, dtype=np.int64), np.zeros(scan.shape), 1.0, 0)
    with pytest.raises(InvalidArgument):
        cq.reconstruct(ones, povm64, dilution=0)


# ---- dominant mode and phase ------------------------------------------------------


def test_dominant_mode_of_pure_result(grid64, scan):
    f = cq.make_pulse(cq.PulseSpec("chirped_gaussian"), grid64)
    mode, weight = cq.extract_dominant_mode(_result_from(cq.pure_correlation(f), scan))
    assert weight == pytest.approx(1.0, abs=1e-12)
    assert cq.fidelity(cq.pure_correlation(mode), cq.pure_correlation(f)) == pytest.approx(1.0, abs=1e-10)
    w = cq.mode_weights(_result_from(cq.pure_correlation(f), scan))
    assert w[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(w[1:]) < 1e-12)


def test_dominant_mode_tie_is_deterministic(hg_mixture, scan):
    f0, f1 = hg_mixture
    grid = f0.grid
    W = cq.mixed_correlation([0.5, 0.5], [f0, f1])
    # hand-built results listing the tied pair in both orders
    rest = [cq.SpectralAmplitude(grid, np.eye(grid.n_points)[0] / np.sqrt(grid.dxi))] * (grid.n_points - 2)
    lam = np.r_[0.5, 0.5, np.zeros(grid.n_points - 2)]
    a = ReconstructionResult(W, lam, [f1, f0] + rest, 0, 0.0, True, np.zeros(1), scan)
    b = ReconstructionResult(W, lam, [f0, f1] + rest, 0, 0.0, True, np.zeros(1), scan)
    picks = [cq.extract_dominant_mode(r)[0] for r in (a, b, a, b)]
    for p in picks:
        # the central coherent mode is even, so the HG0 mode wins
        np.testing.assert_array_equal(p.values, f0.values)


def test_fix_global_phase(grid64):
    g = cq.make_pulse(cq.PulseSpec("gaussian"), grid64)
    np.testing.assert_allclose(cq.fix_global_phase(g).values, g.values, atol=1e-15)
    f = cq.make_pulse(cq.PulseSpec("phase_step"), grid64)
    rotated = cq.SpectralAmplitude(grid64, f.values * np.exp(1j * np.pi / 3))
    np.testing.assert_allclose(cq.fix_global_phase(rotated).values, cq.fix_global_phase(f).values, atol=1e-15)
    h = cq.fix_global_phase(cq.make_pulse(cq.PulseSpec("hermite_gauss", order=1), grid64))
    i = np.argmax(np.abs(h.values))
    assert h.values[i].imag == 0 and h.values[i].real > 0
    np.testing.assert_array_equal(cq.fix_global_phase(h).values, h.values)


def test_fix_global_phase_zero(grid64):
    with pytest.raises(InvalidArgument):
        cq.fix_global_phase(cq.SpectralAmplitude(grid64, np.zeros(64)))


def test_no_warnings_on_default_path(grid64, scan):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cq.build_povm(grid64, scan)


def test_ideal_phase_step_leaves_the_support(grid64, povm64):
    # a discontinuous phase has weight on high-order modes that the scan
    # cannot resolve, the smoothed step used by the library does not
    basis, _ = povm64.support()

    def outside(width):
        f = cq.make_pulse(cq.PulseSpec("phase_step", step_width=width), grid64)
        v = f.values * np.sqrt(grid64.dxi)
        return 1 - np.linalg.norm(basis.conj().T @ v) ** 2

    assert outside(0.0) > 1e-2
    assert outside(0.7) < 1e-4
