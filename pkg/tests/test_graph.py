import numpy as np
import pytest

from augmae.errors import ConfigError, ContractError, DegenerateInputError, ParseError
from augmae.graph import (
    DataPaths,
    Graph,
    SbmSpec,
    from_edges,
    generate_sbm,
    load_embeddings,
    load_graph,
    save_embeddings,
    save_graph,
    sym_normalize,
)


def test_sym_normalize_small_cases():
    np.testing.assert_array_equal(sym_normalize(np.array([[1.0]])), [[1.0]])
    np.testing.assert_allclose(sym_normalize(np.ones((2, 2))), np.full((2, 2), 0.5), atol=1e-15)


def test_sym_normalize_requires_self_loops():
    with pytest.raises(DegenerateInputError):
        sym_normalize(np.zeros((2, 2)))


def test_sym_normalize_matches_dense_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        upper = np.triu(rng.random((10, 10)) < 0.3, 1)
        a = (upper | upper.T).astype(float) + np.eye(10)
        d_inv_sqrt = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
        assert np.max(np.abs(sym_normalize(a) - d_inv_sqrt @ a @ d_inv_sqrt)) < 1e-12


def test_propagation_is_symmetric_with_unit_spectral_radius():
    for seed in range(10):
        g = generate_sbm(SbmSpec(sizes=(8, 7), p_intra=0.5, p_inter=0.1, seed=seed))
        p = g.propagation.value
        np.testing.assert_array_equal(p, p.T)
        assert np.max(np.abs(np.linalg.eigvalsh(p))) <= 1 + 1e-9


def test_graph_invariants():
    rng = np.random.default_rng(0)
    g = from_edges(4, [(0, 1), (2, 3), (1, 0)], rng.standard_normal((4, 3)) * 5)
    np.testing.assert_array_equal(np.diag(g.adjacency), 1.0)
    np.testing.assert_array_equal(g.adjacency, g.adjacency.T)
    np.testing.assert_allclose(np.linalg.norm(g.features, axis=1), 1.0, atol=1e-12)
    assert g.edge_list() == [(0, 1), (2, 3)]


@pytest.mark.parametrize(
    "adjacency",
    [np.ones((2, 3)), np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[1.0, 0.5], [0.5, 1.0]])],
)
def test_graph_rejects_bad_adjacency(adjacency):
    with pytest.raises(ContractError):
        Graph(adjacency, np.ones((adjacency.shape[0], 2)))


def test_graph_rejects_zero_feature_rows():
    with pytest.raises(DegenerateInputError):
        Graph(np.eye(2), np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_sbm_structure():
    g = generate_sbm(SbmSpec(sizes=(50, 50), p_intra=0.2, p_inter=0.02, seed=7))
    assert g.n == 100
    np.testing.assert_array_equal(g.labels, [0] * 50 + [1] * 50)


def test_sbm_noiseless_features_repeat_within_blocks():
    g = generate_sbm(SbmSpec(sizes=(5, 6), feature_noise=0.0, seed=2))
    for block in (0, 1):
        rows = g.features[g.labels == block]
        np.testing.assert_array_equal(rows, np.broadcast_to(rows[0], rows.shape))


def test_sbm_intra_edge_counts_follow_binomial():
    spec = dict(sizes=(30, 30), p_intra=0.2, p_inter=0.02)
    pairs = 2 * (30 * 29 // 2)
    mean, sd = pairs * 0.2, np.sqrt(pairs * 0.2 * 0.8)
    for seed in range(50):
        g = generate_sbm(SbmSpec(**spec, seed=seed))
        same = g.labels[:, None] == g.labels[None, :]
        intra = np.triu(g.adjacency * same, k=1).sum()
        assert abs(intra - mean) <= 3 * sd


def test_sbm_is_deterministic():
    a = generate_sbm(SbmSpec(seed=3))
    b = generate_sbm(SbmSpec(seed=3))
    np.testing.assert_array_equal(a.adjacency, b.adjacency)
    np.testing.assert_array_equal(a.features, b.features)


@pytest.mark.parametrize(
    "kwargs",
    [dict(p_intra=1.5), dict(p_intra=0.1, p_inter=0.2), dict(sizes=(0, 3)), dict(feature_dim=0), dict(feature_noise=-1)],
)
def test_sbm_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        SbmSpec(**kwargs)


def test_load_small_edge_file(tmp_path):
    (tmp_path / "e.txt").write_text("0 1\n1 2")
    (tmp_path / "f.csv").write_text("1,0\n0,1\n1,1\n")
    g = load_graph(tmp_path / "e.txt", tmp_path / "f.csv")
    assert g.n == 3
    assert g.edge_list() == [(0, 1), (1, 2)]
    assert np.trace(g.adjacency) == 3


def test_load_empty_edge_file(tmp_path):
    (tmp_path / "e.txt").write_text("")
    (tmp_path / "f.csv").write_text("0.5,0.5\n")
    g = load_graph(tmp_path / "e.txt", tmp_path / "f.csv")
    assert g.n == 1
    np.testing.assert_array_equal(g.adjacency, [[1.0]])


def test_malformed_lines_report_line_numbers(tmp_path):
    (tmp_path / "e.txt").write_text("0 1\n1 x\n")
    (tmp_path / "f.csv").write_text("1,0\n0,1\n")
    with pytest.raises(ParseError) as info:
        load_graph(tmp_path / "e.txt", tmp_path / "f.csv")
    assert info.value.line_no == 2
    (tmp_path / "g.csv").write_text("1,0\n0,oops\n")
    with pytest.raises(ParseError, match=":2:"):
        load_graph(tmp_path / "e.txt", tmp_path / "g.csv")


def test_out_of_range_node_id(tmp_path):
    (tmp_path / "e.txt").write_text("0 5\n")
    (tmp_path / "f.csv").write_text("1,0\n0,1\n")
    with pytest.raises(IndexError):
        load_graph(tmp_path / "e.txt", tmp_path / "f.csv")


def test_save_load_round_trip(tmp_path):
    g = generate_sbm(SbmSpec(seed=5))
    paths = DataPaths(tmp_path)
    save_graph(g, paths.edges, paths.features, paths.labels)
    back = paths.load()
    np.testing.assert_array_equal(back.adjacency, g.adjacency)
    np.testing.assert_array_equal(back.features, g.features)
    np.testing.assert_array_equal(back.labels, g.labels)


def test_embeddings_round_trip(tmp_path):
    z = np.random.default_rng(0).standard_normal((7, 3))
    save_embeddings(z, tmp_path / "z.csv")
    np.testing.assert_array_equal(load_embeddings(tmp_path / "z.csv"), z)
    assert len((tmp_path / "z.csv").read_text().splitlines()) == 7
