import numpy as np
import pytest

from igcl.graph import (
    GraphFormatError,
    build_graph,
    generate_sbm,
    load_graph,
    make_splits,
    neighbor_sets,
    normalize_adjacency,
    save_graph,
)


def write_container(path, n, f, c, directed, edges, features, labels=None):
    path.mkdir(parents=True, exist_ok=True)
    (path / "meta").write_text(
        f"n_nodes={n}\nn_feats={f}\nn_classes={c}\ndirected={directed}\n"
    )
    np.asarray(edges, dtype="<u4").reshape(-1, 2).tofile(path / "edges.bin")
    np.asarray(features, dtype="<f4").reshape(n, f).tofile(path / "features.bin")
    if labels is not None:
        np.asarray(labels, dtype="<u4").tofile(path / "labels.bin")


def dense_normalized(adjacency_dense):
    """Independent dense evaluation of D^-1/2 (A+I) D^-1/2."""
    a_hat = adjacency_dense + np.eye(adjacency_dense.shape[0])
    d_hat = a_hat.sum(axis=1)
    inv_sqrt = np.diag(1.0 / np.sqrt(d_hat))
    return inv_sqrt @ a_hat @ inv_sqrt


def random_graph(rng, n, p=0.2, f=3):
    mask = rng.random((n, n)) < p
    mask = np.triu(mask, k=1)
    us, vs = np.nonzero(mask)
    feats = rng.normal(size=(n, f))
    return build_graph(n, np.stack([us, vs], axis=1), feats)


class TestLoadGraph:
    def test_directed_edge_is_symmetrized(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 1, [[0, 1]], [[1.0], [2.0]])
        g = load_graph(tmp_path / "g")
        assert list(g.neighbors(0)) == [1]
        assert list(g.neighbors(1)) == [0]
        assert g.directed_source

    def test_duplicate_edges_are_merged(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 0, [[0, 1], [0, 1], [1, 0]], [[0.0], [0.0]])
        g = load_graph(tmp_path / "g")
        assert g.num_edges == 1

    def test_self_loops_are_dropped(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 0, [[0, 0], [0, 1]], [[0.0], [0.0]])
        g = load_graph(tmp_path / "g")
        assert g.num_edges == 1
        assert list(g.neighbors(0)) == [1]

    def test_round_trip_preserves_graph(self, tmp_path):
        g = generate_sbm(3, 5, 0.8, 0.1, 4, 1.0, seed=3)
        save_graph(tmp_path / "g", g)
        g2 = load_graph(tmp_path / "g")
        assert g2.num_nodes == g.num_nodes
        assert np.array_equal(g2.row_offsets, g.row_offsets)
        assert np.array_equal(g2.col_indices, g.col_indices)
        assert np.array_equal(g2.features, g.features)  # f32 quantized at generation
        assert np.array_equal(g2.labels, g.labels)

    def test_missing_file_reported_with_path(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 0, [[0, 1]], [[0.0], [0.0]])
        (tmp_path / "g" / "features.bin").unlink()
        with pytest.raises(GraphFormatError, match="features.bin"):
            load_graph(tmp_path / "g")

    def test_malformed_header(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 0, [[0, 1]], [[0.0], [0.0]])
        (tmp_path / "g" / "meta").write_text("n_nodes=2\nbogus=1\n")
        with pytest.raises(GraphFormatError, match="bogus"):
            load_graph(tmp_path / "g")

    def test_index_out_of_range_reports_offset(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 0, [[0, 1], [0, 5]], [[0.0], [0.0]])
        with pytest.raises(GraphFormatError, match=r"byte 12.*index 5 out of range"):
            load_graph(tmp_path / "g")

    def test_feature_row_count_mismatch(self, tmp_path):
        write_container(tmp_path / "g", 2, 2, 0, 0, [[0, 1]], np.zeros((2, 2)))
        np.zeros(6, dtype="<f4").tofile(tmp_path / "g" / "features.bin")
        with pytest.raises(GraphFormatError, match="feature-row count 3"):
            load_graph(tmp_path / "g")

    def test_trailing_bytes_rejected(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 0, 0, [[0, 1]], [[0.0], [0.0]])
        with open(tmp_path / "g" / "edges.bin", "ab") as fh:
            fh.write(b"\x01")
        with pytest.raises(GraphFormatError, match="trailing bytes"):
            load_graph(tmp_path / "g")

    def test_label_out_of_class_range(self, tmp_path):
        write_container(tmp_path / "g", 2, 1, 2, 0, [[0, 1]], [[0.0], [0.0]], labels=[0, 2])
        with pytest.raises(GraphFormatError, match="label 2 out of range"):
            load_graph(tmp_path / "g")


class TestNormalizeAdjacency:
    def test_single_node(self):
        g = build_graph(1, np.empty((0, 2)), [[1.0]])
        assert np.array_equal(normalize_adjacency(g).dense(), [[1.0]])

    def test_two_nodes_one_edge(self):
        g = build_graph(2, [[0, 1]], [[0.0], [0.0]])
        assert np.allclose(normalize_adjacency(g).dense(), 0.5 * np.ones((2, 2)), atol=1e-15)

    def test_three_node_star_hand_values(self):
        # center 0 with spokes 1, 2: dhat = (3, 2, 2)
        g = build_graph(3, [[0, 1], [0, 2]], np.zeros((3, 1)))
        dense = normalize_adjacency(g).dense()
        cross = 1.0 / np.sqrt(6.0)
        expected = np.array([
            [1 / 3, cross, cross],
            [cross, 1 / 2, 0.0],
            [cross, 0.0, 1 / 2],
        ])
        assert np.abs(dense - expected).max() < 1e-15

    def test_matches_dense_formula_on_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(2, 51))
            g = random_graph(rng, n)
            got = normalize_adjacency(g).dense()
            a = np.zeros((n, n))
            rows = np.repeat(np.arange(n), g.degrees())
            a[rows, g.col_indices] = 1.0
            assert np.abs(got - dense_normalized(a)).max() < 1e-12

    def test_symmetry_is_exact(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 23)
        dense = normalize_adjacency(g).dense()
        assert np.array_equal(dense, dense.T)

    def test_isolated_node_gets_unit_self_loop(self):
        g = build_graph(3, [[0, 1]], np.zeros((3, 1)))
        dense = normalize_adjacency(g).dense()
        assert dense[2, 2] == 1.0
        assert (normalize_adjacency(g).matrix.sum(axis=1) > 0).all()


class TestNeighborSets:
    def test_single_edge(self):
        g = build_graph(2, [[0, 1]], np.zeros((2, 1)))
        ns = neighbor_sets(g)
        assert list(ns[0]) == [1] and list(ns[1]) == [0]

    def test_isolated_node_empty(self):
        g = build_graph(3, [[0, 1]], np.zeros((3, 1)))
        assert neighbor_sets(g)[2].size == 0

    def test_path_graph_middle_node(self):
        g = build_graph(3, [[0, 1], [1, 2]], np.zeros((3, 1)))
        assert list(neighbor_sets(g)[1]) == [0, 2]

    def test_lists_sorted_and_self_free(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 30, p=0.3)
        for i, ns in enumerate(neighbor_sets(g)):
            assert np.all(np.diff(ns) > 0)
            assert i not in ns


class TestGenerateSbm:
    def test_full_intra_no_inter(self):
        g = generate_sbm(2, 2, 1.0, 0.0, 3, 1.0, seed=0)
        assert g.num_edges == 2  # two disjoint 2-cliques
        assert list(g.neighbors(0)) == [1]
        assert list(g.neighbors(2)) == [3]

    def test_edgeless(self):
        g = generate_sbm(2, 3, 0.0, 0.0, 3, 1.0, seed=0)
        assert g.num_edges == 0

    def test_intra_edge_count_within_three_sigma(self):
        # 4 blocks of 100: 4 * C(100,2) = 19800 intra trials at p = 0.05
        g = generate_sbm(4, 100, 0.05, 0.005, 8, 1.0, seed=42)
        rows = np.repeat(np.arange(g.num_nodes), g.degrees())
        intra = int((g.labels[rows] == g.labels[g.col_indices]).sum()) // 2
        mean = 19800 * 0.05
        sigma = np.sqrt(19800 * 0.05 * 0.95)
        assert abs(intra - mean) <= 3 * sigma

    def test_deterministic_per_seed(self):
        a = generate_sbm(3, 10, 0.3, 0.05, 4, 1.0, seed=9)
        b = generate_sbm(3, 10, 0.3, 0.05, 4, 1.0, seed=9)
        assert np.array_equal(a.col_indices, b.col_indices)
        assert np.array_equal(a.features, b.features)

    def test_labels_are_block_ids(self):
        g = generate_sbm(3, 4, 0.5, 0.0, 2, 1.0, seed=1)
        assert list(g.labels) == [0] * 4 + [1] * 4 + [2] * 4

    def test_invalid_probabilities_rejected(self):
        with pytest.raises(ValueError):
            generate_sbm(2, 2, 0.1, 0.5, 2, 1.0, seed=0)
        with pytest.raises(ValueError):
            generate_sbm(2, 2, 1.5, 0.0, 2, 1.0, seed=0)


class TestMakeSplits:
    def test_sizes_small(self):
        s = make_splits(10, (0.1, 0.1, 0.8), seed=0)
        assert (len(s.train), len(s.valid), len(s.test)) == (1, 1, 8)

    def test_determinism(self):
        a = make_splits(100, (0.2, 0.2, 0.6), seed=4)
        b = make_splits(100, (0.2, 0.2, 0.6), seed=4)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.valid, b.valid)
        assert np.array_equal(a.test, b.test)

    def test_wikics_sized_rounding(self):
        s = make_splits(11701, (0.1, 0.1, 0.8), seed=0)
        assert (len(s.train), len(s.valid), len(s.test)) == (1170, 1170, 9361)

    def test_partition_property(self):
        s = make_splits(57, (0.3, 0.2, 0.5), seed=2)
        merged = np.concatenate([s.train, s.valid, s.test])
        assert np.array_equal(np.sort(merged), np.arange(57))

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValueError):
            make_splits(10, (0.5, 0.5, 0.5), seed=0)
