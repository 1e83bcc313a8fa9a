import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augmae.autodiff import Tensor
from augmae.errors import ConfigError, DomainError, RangeError
from augmae.graph import Graph, SbmSpec, generate_sbm
from augmae.masking import (
    PROB_EPS,
    MaskGenerator,
    Schedule,
    adv_probabilities,
    alpha_at,
    bernoulli_mask,
    gumbel_binarize,
    mix_probabilities,
    random_probabilities,
)


@pytest.fixture
def small_graph():
    return generate_sbm(SbmSpec(sizes=(4, 4), p_intra=0.6, p_inter=0.1, feature_dim=5, seed=1))


def test_untrained_generator_emits_one_half(small_graph):
    gen = MaskGenerator(5, rng=0)
    np.testing.assert_array_equal(adv_probabilities(gen, small_graph).value, 0.5)


def test_generator_clamps_saturated_logits(small_graph):
    gen = MaskGenerator(5, rng=0)
    gen.bias.value[:] = 100.0
    np.testing.assert_array_equal(gen.probabilities(small_graph).value, 1.0 - PROB_EPS)
    gen.bias.value[:] = -100.0
    np.testing.assert_array_equal(gen.probabilities(small_graph).value, PROB_EPS)


def test_generator_is_permutation_equivariant(small_graph):
    gen = MaskGenerator(5, rng=3)
    gen.head.value = np.random.default_rng(0).standard_normal(gen.head.shape)
    perm = np.random.default_rng(2).permutation(small_graph.n)
    permuted = Graph(small_graph.adjacency[np.ix_(perm, perm)], small_graph.features[perm])
    p = gen.probabilities(small_graph).value
    assert np.max(np.abs(gen.probabilities(permuted).value - p[perm])) < 1e-12


def test_gumbel_zero_noise_gives_the_logistic_of_the_logit():
    out = gumbel_binarize([0.5, 1.0 - PROB_EPS], tau=1.0, noise=np.zeros((2, 2)))
    assert out.soft.value[0, 0] == 0.5
    assert out.soft.value[1, 0] > 0.99
    np.testing.assert_array_equal(out.hard, [1.0, 1.0])


def test_gumbel_sample_invariants():
    rng = np.random.default_rng(0)
    out = gumbel_binarize(rng.uniform(0.01, 0.99, 200), tau=0.3, rng=1)
    soft = out.soft.value[:, 0]
    assert np.all((soft > 0) & (soft < 1))
    np.testing.assert_array_equal(out.hard, (soft >= 0.5).astype(float))
    np.testing.assert_array_equal(out.masked_set, np.flatnonzero(out.hard))


@pytest.mark.parametrize("tau", [0.0, -1.0])
def test_gumbel_rejects_non_positive_temperature(tau):
    with pytest.raises(ConfigError):
        gumbel_binarize([0.5], tau=tau, rng=0)


def test_gumbel_rejects_boundary_probabilities():
    with pytest.raises(DomainError):
        gumbel_binarize([0.0, 0.5], rng=0)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_gumbel_threshold_recovers_bernoulli(p):
    out = gumbel_binarize(np.full(20_000, p), tau=1.0, rng=42)
    assert abs(out.hard.mean() - p) <= 0.02


def test_soft_mask_increases_with_probability():
    noise = np.random.default_rng(0).gumbel(size=(1, 2))
    prob = Tensor([0.3], requires_grad=True)
    gumbel_binarize(prob, tau=0.7, noise=noise).soft.sum().backward()
    assert prob.grad[0, 0] > 0


def test_mixing_examples():
    r, a = np.full(3, 0.5), np.array([0.9, 0.2, 0.7])
    np.testing.assert_array_equal(mix_probabilities(r, a, 0.0), r)
    np.testing.assert_array_equal(mix_probabilities(r, a, 1.0), a)
    assert mix_probabilities(0.5, 0.9, 0.5) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(RangeError):
        mix_probabilities(r, a, 1.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_mixing_a_vector_with_itself_is_identity(p, alpha):
    assert mix_probabilities(np.array([p]), np.array([p]), alpha)[0] == pytest.approx(p, abs=1e-15)


def test_random_probabilities():
    np.testing.assert_array_equal(random_probabilities(4, 0.5), [0.5] * 4)
    with pytest.raises(ConfigError):
        random_probabilities(4, 1.0)


def test_random_mask_size_is_binomial():
    n, r = 200, 0.75
    rng = np.random.default_rng(9)
    for _ in range(200):
        size = bernoulli_mask(random_probabilities(n, r), rng).hard.sum()
        assert abs(size - r * n) <= 3 * np.sqrt(n * r * (1 - r))


def test_schedule_examples():
    s = Schedule(alpha0=0.2, alphaT=0.9, eta=1.5, total=40)
    assert alpha_at(s, 0) == 0.2
    assert alpha_at(s, 40) == 0.9
    assert alpha_at(Schedule(0.0, 1.0, 1.0, 10), 5) == 0.5
    with pytest.raises(RangeError):
        alpha_at(s, 41)
    with pytest.raises(RangeError):
        alpha_at(s, -1)


@pytest.mark.parametrize("kwargs", [dict(alpha0=0.8, alphaT=0.2), dict(eta=0.0), dict(total=0), dict(alphaT=1.2)])
def test_schedule_validation(kwargs):
    with pytest.raises(ConfigError):
        Schedule(**kwargs)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.5, 1.0), st.floats(0.1, 3.0), st.integers(1, 500))
def test_schedule_is_monotone(a0, aT, eta, total):
    s = Schedule(a0, aT, eta, total)
    values = [alpha_at(s, t) for t in range(total + 1)]
    assert all(b >= a for a, b in zip(values, values[1:]))
