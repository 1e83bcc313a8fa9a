import csv

import numpy as np
import pytest

from augmae.errors import ContractError, SplitError
from augmae.evaluation import (
    diagnostics,
    export_sphere_density,
    linear_probe,
    split_indices,
    supervised_alignment,
    uniformity_value,
    wrap_angle,
    write_density_csv,
)
from augmae.losses import uniformity_loss
from augmae.autodiff import Tensor
from augmae.graph import SbmSpec, generate_sbm
from augmae.model import Model, ModelConfig


def unit(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_split_is_reproducible_and_disjoint():
    a, b = split_indices(100, 0.1, 3)
    a2, b2 = split_indices(100, 0.1, 3)
    np.testing.assert_array_equal(a, a2)
    np.testing.assert_array_equal(b, b2)
    assert a.size == 10 and b.size == 90
    assert np.intersect1d(a, b).size == 0


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.2, 1.5])
def test_bad_train_fraction(frac):
    with pytest.raises(SplitError):
        split_indices(50, frac, 0)


def test_one_hot_embeddings_are_perfectly_separable():
    labels = np.repeat([0, 1, 2], 40)
    z = np.eye(3)[labels]
    result = linear_probe(z, labels, train_fraction=0.2, seed=0)
    assert result.accuracy == 1.0
    assert set(result.per_class.values()) == {1.0}


def test_identical_embeddings_fall_back_to_the_majority_class():
    labels = np.array([0] * 140 + [1] * 60)
    z = np.tile([[0.6, 0.8]], (200, 1))
    result = linear_probe(z, labels, train_fraction=0.2, seed=1)
    assert result.accuracy == pytest.approx(result.majority_baseline, abs=0.02)
    assert result.majority_baseline > 0.6


def test_probe_needs_every_class_in_training():
    labels = np.array([0] * 99 + [1])
    with pytest.raises(SplitError):
        linear_probe(np.eye(2)[labels], labels, train_fraction=0.1, seed=0)


def test_shuffled_labels_give_chance_accuracy():
    g = generate_sbm(SbmSpec(sizes=(200, 200), p_intra=0.05, p_inter=0.005, seed=4))
    z = Model(ModelConfig(d_in=g.features.shape[1]), rng=0).embed(g)
    shuffled = np.random.default_rng(5).permutation(g.labels)
    result = linear_probe(z, shuffled, seed=0)
    assert result.accuracy == pytest.approx(0.5, abs=0.05)


def test_collapsed_same_label_pairs_have_zero_alignment():
    labels = np.array([0, 0, 1, 1, 1])
    z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
    result = supervised_alignment(z, labels)
    assert result.mean == 0.0
    assert result.pairs == 4 and result.exhaustive


def test_alignment_needs_a_same_label_pair():
    with pytest.raises(ContractError):
        supervised_alignment(np.eye(3), [0, 1, 2])


def test_alignment_matches_brute_force():
    rng = np.random.default_rng(6)
    z, labels = unit(rng, 30, 3), rng.integers(0, 3, 30)
    dists = [np.linalg.norm(z[i] - z[j]) for i in range(30) for j in range(i + 1, 30) if labels[i] == labels[j]]
    result = supervised_alignment(z, labels)
    assert result.mean == pytest.approx(np.mean(dists), abs=1e-12)
    assert result.histogram.sum() == len(dists)


def test_alignment_is_invariant_to_node_order():
    rng = np.random.default_rng(7)
    z, labels = unit(rng, 40, 4), rng.integers(0, 2, 40)
    perm = rng.permutation(40)
    assert supervised_alignment(z[perm], labels[perm]).mean == pytest.approx(
        supervised_alignment(z, labels).mean, abs=1e-12
    )


def test_alignment_subsamples_above_the_cap():
    rng = np.random.default_rng(8)
    result = supervised_alignment(unit(rng, 200, 3), np.zeros(200, dtype=int), pair_cap=500)
    assert result.pairs == 500 and not result.exhaustive


def test_uniformity_diagnostic_reuses_the_training_loss():
    z = unit(np.random.default_rng(9), 50, 3)
    assert uniformity_value(z, 2.0, 4096, 0) == uniformity_loss(Tensor(z), 2.0, 4096, 0).item()


def test_antipodal_points_give_two_equal_peaks():
    z = np.array([[1.0, 0.0], [-1.0, 0.0]])
    density = export_sphere_density(z, points=360)
    at = lambda angle: density.kde[np.argmin(np.abs(wrap_angle(density.grid - angle)))]
    assert at(0.0) == pytest.approx(at(np.pi), rel=1e-9)
    assert at(0.0) > 10 * at(np.pi / 2)


def test_uniform_points_give_a_flat_density():
    # half-degree offset keeps points off the bin edges
    theta = 2 * np.pi * (np.arange(360) + 0.5) / 360
    density = export_sphere_density(np.column_stack([np.cos(theta), np.sin(theta)]))
    assert density.max_min_ratio < 1.1
    assert np.all(density.counts == 10)


def test_density_integrates_to_one():
    rng = np.random.default_rng(10)
    density = export_sphere_density(unit(rng, 50, 2), points=720)
    assert np.sum(density.kde) * (2 * np.pi / 720) == pytest.approx(1.0, abs=1e-6)


def test_density_needs_two_dimensions():
    with pytest.raises(ContractError):
        export_sphere_density(np.eye(3))


def test_density_csv_columns(tmp_path):
    density = export_sphere_density(unit(np.random.default_rng(11), 20, 2), points=12)
    write_density_csv(density, tmp_path / "d.csv")
    with open(tmp_path / "d.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["angle", "histogram_count", "kde_value"]
    assert len(rows) == 13
    assert sum(float(r[2]) for r in rows[1:]) > 0


def test_diagnostics_report_fields(tmp_path):
    rng = np.random.default_rng(12)
    z, labels = unit(rng, 60, 3), np.repeat([0, 1], 30)
    report, align, probe = diagnostics(z, labels, probe_steps=50)
    assert report.alignment_mean == align.mean
    assert report.probe_accuracy == probe.accuracy
    report.write(tmp_path / "r.json")
    assert "alignment_histogram" in (tmp_path / "r.json").read_text()
