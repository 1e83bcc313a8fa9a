import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augmae.autodiff import Tensor
from augmae.errors import ConfigError, ContractError, EmptyMaskError
from augmae.losses import (
    LossConfig,
    alignment_loss,
    context_alignment_loss,
    generator_objective,
    model_objective,
    per_node_sce,
    pretext_loss,
    ratio_regularizer,
    sce_loss,
    uniformity_loss,
    uniformity_pairs,
)
from augmae.theory import BoundInstance, context_alignment_value


def unit(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_loss_config_validation():
    with pytest.raises(ConfigError):
        LossConfig(gamma=0.5)
    with pytest.raises(ConfigError):
        LossConfig(t_uniformity=0.0)
    with pytest.raises(ConfigError):
        LossConfig(lambda1=-1.0)


def test_sce_examples():
    x = unit(np.random.default_rng(0), 5, 3)
    for gamma in (1.0, 2.0, 3.5):
        assert sce_loss(x, x, np.ones(5), gamma).item() == pytest.approx(0.0, abs=1e-15)
    assert sce_loss([[1.0, 0.0]], [[-1.0, 0.0]], [1.0], 1.0).item() == 2.0
    assert sce_loss([[1.0, 0.0]], [[0.0, 1.0]], [1.0], 3.0).item() == 1.0


def test_sce_weights_select_rows():
    x = np.array([[1.0, 0.0], [1.0, 0.0]])
    x_hat = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert sce_loss(x, x_hat, [1.0, 0.0], 2.0).item() == 1.0
    assert sce_loss(x, x_hat, [0.0, 1.0], 2.0).item() == 0.0
    assert sce_loss(x, x_hat, [0.25, 0.25], 2.0).item() == 0.5


def test_sce_rejects_empty_mask():
    with pytest.raises(EmptyMaskError):
        sce_loss([[1.0, 0.0]], [[1.0, 0.0]], [0.0], 2.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 4.0))
def test_sce_range(seed, gamma):
    rng = np.random.default_rng(seed)
    value = sce_loss(unit(rng, 6, 3), unit(rng, 6, 3), rng.uniform(0.1, 1.0, 6), gamma).item()
    assert 0.0 <= value <= 2.0**gamma


def test_alignment_examples():
    rng = np.random.default_rng(1)
    z = unit(rng, 4, 3)
    assert alignment_loss(z, z).item() == 0.0
    assert alignment_loss([[0.0, 1.0]], [[0.0, -1.0]]).item() == 4.0
    with pytest.raises(ContractError):
        alignment_loss(np.zeros((0, 2)), np.zeros((0, 2)))


def test_alignment_matches_dot_product_form():
    rng = np.random.default_rng(2)
    a, b = unit(rng, 100, 4), unit(rng, 100, 4)
    assert abs(alignment_loss(a, b).item() - (2.0 - 2.0 * np.mean(np.sum(a * b, axis=1)))) < 1e-12


def test_unit_distance_identity():
    rng = np.random.default_rng(3)
    a, b = unit(rng, 1000, 5), unit(rng, 1000, 5)
    assert np.max(np.abs(np.sum((a - b) ** 2, axis=1) - (2.0 - 2.0 * np.sum(a * b, axis=1)))) < 1e-12


def test_uniformity_examples():
    assert uniformity_loss(np.tile([[0.6, 0.8]], (5, 1))).item() == 0.0
    assert uniformity_loss([[1.0, 0.0], [-1.0, 0.0]], t=2.0).item() == pytest.approx(-8.0, abs=1e-12)
    with pytest.raises(ContractError):
        uniformity_loss([[1.0, 0.0]])


def test_uniformity_square_matches_pair_enumeration():
    square = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    assert len(pairs) == 6
    expected = np.log(np.mean([np.exp(-2.0 * np.sum((square[i] - square[j]) ** 2)) for i, j in pairs]))
    assert uniformity_loss(square, t=2.0).item() == pytest.approx(expected, abs=1e-14)


def test_uniformity_pair_sampling():
    i, j = uniformity_pairs(100, cap=50, seed=4)
    assert i.size == 50
    assert np.all(i != j)
    i2, j2 = uniformity_pairs(100, cap=50, seed=4)
    np.testing.assert_array_equal(i, i2)
    np.testing.assert_array_equal(j, j2)
    i, j = uniformity_pairs(10, cap=45)
    assert i.size == 45


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 4.0))
def test_uniformity_range(seed, t):
    value = uniformity_loss(unit(np.random.default_rng(seed), 7, 3), t=t).item()
    assert -4.0 * t <= value <= 0.0


def test_uniformity_decreases_when_a_duplicate_moves_away():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = unit(rng, 2, 3)
        base = uniformity_loss(np.array([a, a, b])).item()
        moved = a + 0.05 * (a - b)
        moved /= np.linalg.norm(moved)
        assert uniformity_loss(np.array([a, moved, b])).item() < base


def test_ratio_regularizer_examples():
    assert ratio_regularizer(np.array([0.0, 1.0])).item() == 1.0
    assert ratio_regularizer(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).item() == pytest.approx(2.0, abs=1e-12)
    assert np.isfinite(ratio_regularizer(np.zeros(4)).item())


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0))
def test_ratio_regularizer_is_symmetric_and_at_least_one(rho):
    left = ratio_regularizer(np.array([rho])).item()
    right = ratio_regularizer(np.array([1.0 - rho])).item()
    assert abs(left - right) < 1e-12 * max(1.0, left)
    assert left >= 1.0


def test_pretext_examples():
    rng = np.random.default_rng(6)
    h = unit(rng, 5, 3)
    assert pretext_loss(h, h).item() == pytest.approx(-1.0, abs=1e-15)
    assert pretext_loss([[1.0, 0.0]], [[0.0, 1.0]]).item() == 0.0
    with pytest.raises(ContractError):
        pretext_loss(h, h[:3])


def test_pretext_is_half_mse_minus_one():
    rng = np.random.default_rng(7)
    for _ in range(100):
        h, g = unit(rng, 6, 4), unit(rng, 6, 4)
        half_mse = 0.5 * np.mean(np.sum((h - g) ** 2, axis=1))
        assert abs(pretext_loss(h, g).item() - (half_mse - 1.0)) < 1e-12


def test_context_alignment_examples():
    a = np.array([[0.2, 0.1], [0.1, 0.6]])
    same = np.tile([[0.0, 1.0]], (2, 1))
    assert context_alignment_loss(a, same).item() == pytest.approx(-1.0, abs=1e-15)
    assert context_alignment_loss(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2)).item() == 0.0
    with pytest.raises(ContractError):
        context_alignment_loss(np.zeros((2, 2)), np.eye(2))


def test_context_alignment_matches_bipartite_enumeration():
    w = np.array([[0.2, 0.1], [0.0, 0.3], [0.25, 0.15]])
    rng = np.random.default_rng(8)
    inst = BoundInstance(w, unit(rng, 2, 3), unit(rng, 3, 3), unit(rng, 2, 3))
    a_c = inst.context_graph
    explicit = -sum(
        sum(w[c, f] * w[c2, f] / w[:, f].sum() for f in range(2)) * inst.h[c] @ inst.h[c2]
        for c in range(3)
        for c2 in range(3)
    )
    assert context_alignment_loss(a_c, inst.h).item() == pytest.approx(explicit, abs=1e-14)
    assert context_alignment_value(inst) == pytest.approx(explicit, abs=1e-14)


def test_generator_objective_examples():
    soft = np.full(4, 0.5)
    assert generator_objective(Tensor(1.0), soft, 1.0).item() == 0.0
    assert generator_objective(Tensor(0.3), np.array([0.1, 0.2]), 0.0).item() == 0.3


def test_model_objective_examples():
    assert model_objective(Tensor(0.4), Tensor(-3.0), 0.3, 0.0).item() == 0.4
    assert model_objective(Tensor(0.4), Tensor(-3.0), 1.0, 0.7).item() == 0.4
    assert model_objective(Tensor(0.4), Tensor(-3.0), 0.5, 0.1).item() == pytest.approx(0.25, abs=1e-15)


def test_per_node_sce_bernoulli_bound_holds_for_every_cosine():
    # the pointwise step of the reconstruction bound, with x = -cos >= -1 and real exponents
    rng = np.random.default_rng(9)
    cos = rng.uniform(-1.0, 1.0, 10_000)
    for gamma in (1.0, 2.0, 3.0, 1.5, 2.7):
        x = np.column_stack([np.ones_like(cos), np.zeros_like(cos)])
        x_hat = np.column_stack([cos, np.sqrt(1.0 - cos**2)])
        lhs = per_node_sce(x, x_hat, gamma).value[:, 0]
        assert np.all(lhs >= 1.0 - gamma * cos - 1e-12)


def test_bernoulli_inequality_on_its_literal_domain():
    rng = np.random.default_rng(10)
    s = rng.uniform(0.0, 2.0, 10_000)
    for gamma in (1, 2, 3):
        holds = (1.0 - s) ** gamma >= 1.0 - gamma * s - 1e-12
        applicable = (gamma % 2 == 1) | (s <= 1.0)
        assert np.all(holds[applicable])
