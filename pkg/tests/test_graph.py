import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpgcn.errors import ConvergenceError, InputError
from lpgcn.graph import (FilterKind, SparseMatrix, build_adjacency, build_filter, compute_ge, ego_eigen_check,
                         ego_row, read_edge_list, spectral_radius)

from conftest import FILTERS, path3, random_graph


def dense_filter(a, kind):
    """Independent dense construction of the four filters."""
    deg = a.sum(axis=1)
    eye = np.eye(len(a))
    inv_sqrt = np.where(deg > 0, 1 / np.sqrt(np.where(deg > 0, deg, 1)), 0.0)
    inv = np.where(deg > 0, 1 / np.where(deg > 0, deg, 1), 0.0)
    if kind == "unnormalized":
        return a + eye
    if kind == "normalized":
        return inv_sqrt[:, None] * a * inv_sqrt[None, :] + eye
    if kind == "random_walk":
        return inv[:, None] * a + eye
    s = 1 / np.sqrt(deg + 1)
    return s[:, None] * (a + eye) * s[None, :]


def dense_radius(m):
    return float(np.abs(np.linalg.eigvals(m)).max())


class TestAdjacency:
    def test_path(self):
        a = build_adjacency([(0, 1), (1, 2)], 3)
        assert a.nnz == 4
        np.testing.assert_array_equal(a.to_dense(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])

    def test_empty_edges(self):
        a = build_adjacency([], 2)
        assert a.shape == (2, 2) and a.nnz == 0

    def test_duplicates_collapse(self):
        assert build_adjacency([(0, 1), (1, 0), (0, 1)], 2).nnz == 2

    def test_self_loops_dropped(self):
        assert build_adjacency([(0, 0), (0, 1)], 2).nnz == 2

    @pytest.mark.parametrize("edges,n", [([(0, 3)], 3), ([(-1, 0)], 2), ([], 0)])
    def test_invalid(self, edges, n):
        with pytest.raises(InputError):
            build_adjacency(edges, n)

    def test_csr_invariants(self):
        a = random_graph(30, 0.2, np.random.default_rng(0))
        assert a.row_offsets[0] == 0 and a.row_offsets[-1] == a.nnz
        assert np.all(np.diff(a.row_offsets) >= 0)
        for i in range(a.n_rows):
            cols = a.col_indices[a.row_offsets[i]:a.row_offsets[i + 1]]
            assert np.all(np.diff(cols) > 0)
        assert np.all(a.values != 0)
        assert a.is_symmetric()

    def test_arrays_read_only(self):
        a = path3()
        with pytest.raises(ValueError):
            a.values[0] = 5.0


class TestEdgeList:
    def test_comments_and_blank_lines(self, tmp_path):
        f = tmp_path / "edges.txt"
        f.write_text("# header\n0 1\n\n1   2\n")
        assert read_edge_list(f) == [(0, 1), (1, 2)]

    def test_bad_line_named(self, tmp_path):
        f = tmp_path / "edges.txt"
        f.write_text("0 1\n1 2 3\n")
        with pytest.raises(InputError, match="edges.txt line 2"):
            read_edge_list(f)

    def test_out_of_range_named(self, tmp_path):
        f = tmp_path / "edges.txt"
        f.write_text("0 1\n# c\n1 9\n")
        with pytest.raises(InputError, match="edges.txt line 3"):
            read_edge_list(f, n=3)


class TestFilters:
    def test_path_unnormalized(self):
        np.testing.assert_array_equal(build_filter(path3(), "unnormalized").to_dense(),
                                      [[1, 1, 0], [1, 1, 1], [0, 1, 1]])

    def test_path_normalized(self):
        r = 1 / math.sqrt(2)
        np.testing.assert_allclose(build_filter(path3(), "normalized").to_dense(),
                                   [[1, r, 0], [r, 1, r], [0, r, 1]], rtol=1e-15)

    def test_single_node_augmented(self):
        f = build_filter(build_adjacency([], 1), FilterKind.AUGMENTED_NORMALIZED)
        np.testing.assert_array_equal(f.to_dense(), [[1.0]])

    @pytest.mark.parametrize("kind", FILTERS)
    def test_matches_dense_formula(self, kind):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a = random_graph(25, 0.15, rng)  # sparse enough to leave isolated nodes
            np.testing.assert_allclose(build_filter(a, kind).to_dense(), dense_filter(a.to_dense(), kind),
                                       rtol=1e-14, atol=0)

    def test_isolated_nodes_keep_identity(self):
        a = build_adjacency([(0, 1)], 3)
        for kind in ("normalized", "random_walk"):
            f = build_filter(a, kind).to_dense()
            np.testing.assert_array_equal(f[2], [0, 0, 1])

    @pytest.mark.parametrize("kind", ["unnormalized", "normalized", "augmented_normalized"])
    def test_symmetric_filters_bitwise(self, kind):
        a = random_graph(40, 0.1, np.random.default_rng(2))
        d = build_filter(a, kind).to_dense()
        assert np.array_equal(d, d.T)

    def test_parse_aliases(self):
        assert FilterKind.parse("AugmentedNormalized") is FilterKind.AUGMENTED_NORMALIZED
        assert FilterKind.parse("random-walk") is FilterKind.RANDOM_WALK
        with pytest.raises(InputError):
            FilterKind.parse("chebyshev")


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(SparseMatrix.identity(7)).lambda_max_abs == pytest.approx(1.0, abs=1e-12)

    def test_path_unnormalized(self):
        est = spectral_radius(build_filter(path3(), "unnormalized"))
        assert est.lambda_max_abs == pytest.approx(dense_radius(build_filter(path3(), "unnormalized").to_dense()),
                                                   abs=1e-8)
        assert est.lambda_max_abs == pytest.approx(1 + math.sqrt(2), abs=1e-8)

    def test_path_normalized(self):
        assert spectral_radius(build_filter(path3(), "normalized")).lambda_max_abs == pytest.approx(2.0, abs=1e-8)

    def test_deterministic(self):
        f = build_filter(random_graph(50, 0.1, np.random.default_rng(5)), "normalized")
        assert spectral_radius(f, seed=3) == spectral_radius(f, seed=3)

    def test_residual_reported(self):
        est = spectral_radius(build_filter(path3(), "augmented_normalized"), tol=1e-10)
        assert 0 <= est.residual <= 1e-10

    def test_negative_extreme_found(self):
        # I - 3 e e^T style: eigenvalues {1, -2}
        m = SparseMatrix.from_dense(np.array([[-0.5, -1.5], [-1.5, -0.5]]))
        assert spectral_radius(m).lambda_max_abs == pytest.approx(2.0, abs=1e-8)

    def test_convergence_error_carries_estimate(self):
        f = build_filter(random_graph(60, 0.1, np.random.default_rng(8)), "unnormalized")
        with pytest.raises(ConvergenceError) as info:
            spectral_radius(f, tol=1e-14, max_iter=2)
        assert info.value.iterations == 2 and info.value.estimate > 0 and info.value.residual > 1e-14

    @pytest.mark.parametrize("kind", FILTERS)
    def test_against_dense(self, kind):
        rng = np.random.default_rng(9)
        for _ in range(5):
            n = int(rng.integers(5, 80))
            f = build_filter(random_graph(n, rng.uniform(0.02, 0.3), rng), kind)
            assert abs(spectral_radius(f).lambda_max_abs - dense_radius(f.to_dense())) <= 1e-6

    def test_random_walk_similar_to_normalized(self):
        rng = np.random.default_rng(10)
        iu = np.arange(39)
        edges = list(zip(iu, iu + 1)) + [tuple(e) for e in rng.integers(0, 40, (40, 2))]
        a = build_adjacency(edges, 40)
        tol = 1e-8
        rw = spectral_radius(build_filter(a, "random_walk"), tol=tol).lambda_max_abs
        nm = spectral_radius(build_filter(a, "normalized"), tol=tol).lambda_max_abs
        assert abs(rw - nm) <= 2 * tol

    def test_augmented_at_most_one(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            f = build_filter(random_graph(40, rng.uniform(0.01, 0.5), rng), "augmented_normalized")
            assert spectral_radius(f).lambda_max_abs <= 1 + 1e-9


class TestEgo:
    def test_identity_row(self):
        assert ego_row(SparseMatrix.identity(3), 0) == {0: 1.0}

    def test_path_rows(self):
        assert ego_row(build_filter(path3(), "unnormalized"), 1) == {0: 1.0, 1: 1.0, 2: 1.0}
        row = ego_row(build_filter(path3(), "normalized"), 0)
        assert row.keys() == {0, 1}
        assert row[0] == 1.0 and row[1] == pytest.approx(1 / math.sqrt(2), rel=1e-15)

    def test_out_of_range(self):
        with pytest.raises(InputError):
            ego_row(SparseMatrix.identity(3), 3)

    def test_single_node_ego(self):
        ego, full = ego_eigen_check(build_adjacency([], 1), "augmented_normalized", 0)
        assert ego == pytest.approx(1.0) and full == pytest.approx(1.0)

    def test_path_ego(self):
        ego, full = ego_eigen_check(path3(), "unnormalized", 0)
        assert ego == pytest.approx(2.0, abs=1e-12)
        assert full == pytest.approx(1 + math.sqrt(2), abs=1e-12)

    @pytest.mark.parametrize("kind", FILTERS)
    def test_ego_bound_every_node(self, kind):
        a = random_graph(30, 0.15, np.random.default_rng(13))
        for node in range(30):
            ego, full = ego_eigen_check(a, kind, node)
            assert ego <= full + 1e-9

    def test_too_large(self):
        with pytest.raises(InputError):
            ego_eigen_check(build_adjacency([], 201), "unnormalized", 0)


class TestGe:
    def test_identity_unit_rows(self):
        x = np.random.default_rng(0).standard_normal((5, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        assert compute_ge(SparseMatrix.identity(5), x) == pytest.approx(1.0, abs=1e-15)

    def test_single_node(self):
        assert compute_ge(SparseMatrix.identity(1), np.array([[3.0, 4.0]])) == 5.0

    def test_dense_oracle(self):
        rng = np.random.default_rng(1)
        a = random_graph(20, 0.2, rng)
        x = rng.standard_normal((20, 4))
        f = build_filter(a, "normalized")
        ref = np.linalg.norm(f.to_dense() @ x, axis=1).max()
        assert compute_ge(f, x) == pytest.approx(ref, rel=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            compute_ge(SparseMatrix.identity(3), np.ones((4, 2)))

    @given(seed=st.integers(0, 10_000), kind=st.sampled_from(FILTERS), d=st.integers(1, 6))
    @settings(max_examples=60, deadline=None)
    def test_ge_general_bounds(self, seed, kind, d):
        # valid for any features: row l1 norm with unit rows, operator norm of X otherwise
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 40))
        f = build_filter(random_graph(n, rng.uniform(0, 0.4), rng), kind)
        x = rng.standard_normal((n, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        ge = compute_ge(f, x)
        assert ge <= np.abs(f.to_dense()).sum(axis=1).max() + 1e-12
        assert ge <= spectral_radius(f).lambda_max_abs * np.linalg.norm(x, 2) + 1e-8

    @pytest.mark.parametrize("kind", FILTERS)
    def test_ge_below_spectral_radius_for_one_hot_features(self, kind):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(2, 60))
            f = build_filter(random_graph(n, rng.uniform(0, 0.4), rng), kind)
            assert compute_ge(f, np.eye(n)) <= spectral_radius(f).lambda_max_abs + 1e-9

    @pytest.mark.parametrize("kind", ["unnormalized", "augmented_normalized"])
    def test_aligned_unit_rows_can_exceed_spectral_radius(self, kind):
        # star with 8 leaves and identical unit features: g_e is the hub's row sum
        a = build_adjacency([(0, j) for j in range(1, 9)], 9)
        f = build_filter(a, kind)
        x = np.ones((9, 1))
        ge = compute_ge(f, x)
        assert ge == pytest.approx(np.abs(f.to_dense()).sum(axis=1).max())
        assert ge > spectral_radius(f).lambda_max_abs + 0.5
