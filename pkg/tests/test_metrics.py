import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import chronoq as cq
from chronoq.core import InvalidArgument


def _random_state(grid, rng, rank):
    modes = [
        cq.normalize(cq.SpectralAmplitude(grid, rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)))
        for _ in range(rank)
    ]
    return cq.mixed_correlation(rng.uniform(0.1, 1, rank), modes)


def test_similarity_identical_and_disjoint():
    a = np.random.default_rng(0).uniform(size=(5, 7))
    assert cq.similarity(a, a) == pytest.approx(1.0, abs=1e-15)
    e = np.zeros((4, 4))
    t = np.zeros((4, 4))
    e[0, 0], t[3, 3] = 1.0, 2.0
    assert cq.similarity(e, t) == 0.0


def test_similarity_worked_value():
    assert cq.similarity([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert round(cq.similarity([1, 0], [1, 1]), 5) == 0.70711


def test_similarity_rejects():
    with pytest.raises(InvalidArgument):
        cq.similarity([1, 2], [1, 2, 3])
    with pytest.raises(InvalidArgument):
        cq.similarity([0, 0], [1, 2])


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    a=st.floats(1e-3, 1e3),
    b=st.floats(1e-3, 1e3),
)
def test_similarity_scale_invariant_and_symmetric(seed, a, b):
    rng = np.random.default_rng(seed)
    e, t = rng.uniform(size=(2, 6, 6))
    s = cq.similarity(e, t)
    assert cq.similarity(a * e, b * t) == pytest.approx(s, abs=1e-12)
    assert cq.similarity(t, e) == pytest.approx(s, abs=1e-12)
    assert 0 <= s <= 1 + 1e-15


def test_fidelity_pure(grid64):
    f = cq.make_pulse(cq.PulseSpec("phase_step"), grid64)
    W = cq.pure_correlation(f)
    assert cq.fidelity(W, W) == pytest.approx(1.0, abs=1e-10)
    h0 = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("hermite_gauss", order=0), grid64))
    h1 = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("hermite_gauss", order=1), grid64))
    assert cq.fidelity(h0, h1) == pytest.approx(0.0, abs=1e-10)


def test_fidelity_equals_overlap_for_pure(grid64):
    f = cq.make_pulse(cq.PulseSpec("chirped_gaussian"), grid64)
    g = cq.make_pulse(cq.PulseSpec("gaussian", center=0.5), grid64)
    overlap = abs(np.sum(f.values.conj() * g.values) * grid64.dxi) ** 2
    assert cq.fidelity(cq.pure_correlation(f), cq.pure_correlation(g)) == pytest.approx(overlap, abs=1e-12)


def test_fidelity_half_mixture(grid64):
    f0 = cq.make_pulse(cq.PulseSpec("hermite_gauss", order=0), grid64)
    f1 = cq.make_pulse(cq.PulseSpec("hermite_gauss", order=1), grid64)
    mix = cq.mixed_correlation([0.5, 0.5], [f0, f1])
    assert cq.fidelity(cq.pure_correlation(f0), mix) == pytest.approx(0.5, abs=1e-12)


def test_fidelity_grid_mismatch(grid64, grid128):
    a = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("gaussian"), grid64))
    b = cq.pure_correlation(cq.make_pulse(cq.PulseSpec("gaussian"), grid128))
    with pytest.raises(InvalidArgument):
        cq.fidelity(a, b)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r1=st.integers(1, 4), r2=st.integers(1, 4))
def test_fidelity_symmetric(seed, r1, r2):
    g = cq.make_grid(0.0, 8, 16, 1.0)
    rng = np.random.default_rng(seed)
    a, b = _random_state(g, rng, r1), _random_state(g, rng, r2)
    assert cq.fidelity(a, b) == pytest.approx(cq.fidelity(b, a), abs=1e-12)
    assert -1e-12 <= cq.fidelity(a, b) <= 1 + 1e-12


def test_purity_bounds():
    g = cq.make_grid(0.0, 8, 16, 1.0)
    rng = np.random.default_rng(4)
    pure = _random_state(g, rng, 1)
    mixed = _random_state(g, rng, 3)
    assert cq.purity(pure) == pytest.approx(1.0, abs=1e-12)
    assert cq.purity(mixed) < 1 - 1e-3
    assert cq.purity(mixed) == pytest.approx(cq.fidelity(mixed, mixed))
