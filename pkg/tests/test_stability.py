import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lpgcn.data import make_synthetic
from lpgcn.errors import InputError
from lpgcn.graph import build_adjacency, build_filter
from lpgcn.metrics import generalization_gap, param_distance, sparsity_ratio
from lpgcn.model import Dataset, ModelParams, propagate
from lpgcn.sgd import TrainConfig, train
from lpgcn.stability import METRIC_COLUMNS, perturb_dataset, read_metrics_csv, sweep, twin_train, write_metrics_csv

from conftest import toy_dataset


def four_node():
    x = np.array([[1.0, 0.5], [-0.5, 1.5], [2.0, -1.0], [0.3, 0.3]])
    return Dataset(x, np.array([1, 0, 0, 1]), np.array([0, 1, 2]), np.array([3]),
                   build_adjacency([(0, 1), (1, 2), (2, 3), (0, 3)], 4))


def scripted_run(z, y, seq, m, eta, lam, radius):
    # p = 2 closed-form prox; logistic loss on a sigmoid output
    w = np.zeros(z.shape[1])
    per_epoch = []
    for t, i in enumerate(seq, start=1):
        f = 1 / (1 + math.exp(-(z[i] @ w)))
        v = w - eta * (-y[i] / (1 + math.exp(y[i] * f))) * f * (1 - f) * z[i]
        nv = np.linalg.norm(v)
        if nv > radius:
            v = v * (radius / nv)
        w = v / (1 + 2 * eta * lam)
        if t % m == 0:
            per_epoch.append(w.copy())
    return per_epoch


class TestDistance:
    def test_examples(self):
        w = np.array([1.0, -2.0, 0.5])
        assert param_distance(w, w) == 0.0
        assert param_distance(w, np.zeros(3)) == 1.0
        assert param_distance(w, -w) == pytest.approx(math.sqrt(2))
        assert param_distance(np.zeros(3), np.zeros(3)) == 0.0

    # subnormal entries are excluded: a ratio below the smallest subnormal rounds to 0
    @given(a=arrays(np.float64, 4, elements=st.floats(-1e3, 1e3, allow_subnormal=False)),
           b=arrays(np.float64, 4, elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
    def test_range(self, a, b):
        d = param_distance(a, b)
        assert 0.0 <= d <= math.sqrt(2)
        assert (d == 0.0) == bool(np.all(a == b))

    def test_tiny_weights(self):
        assert param_distance(np.zeros(2), np.full(2, 1e-300)) == 1.0
        assert param_distance(np.full(2, 1e300), np.full(2, -1e300)) == pytest.approx(math.sqrt(2))

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            param_distance(np.ones(2), np.ones(3))


class TestSparsity:
    def test_examples(self):
        assert sparsity_ratio(np.array([0.0, 0.0, 1.0, 2.0]), 1e-6) == 50.0
        assert sparsity_ratio(np.zeros(5)) == 100.0
        assert sparsity_ratio(np.array([1e-5, -3.0])) == 0.0

    def test_eps_positive(self):
        with pytest.raises(InputError):
            sparsity_ratio(np.ones(2), 0.0)


class TestGap:
    def test_identical_predictions(self):
        x = np.ones((4, 2))
        ds = Dataset(x, np.array([0, 1, 0, 1]), np.array([0, 1]), np.array([2, 3]), build_adjacency([], 4))
        z = propagate(build_filter(ds.graph, "augmented_normalized"), x)
        assert generalization_gap(ModelParams(np.array([0.3, 0.1])), ds, z, "logistic", "sigmoid") == 0.0

    def test_perfect_train_wrong_test(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        ds = Dataset(x, np.array([0, 1, 1, 0]), np.array([0, 1]), np.array([2, 3]), build_adjacency([], 4))
        w = ModelParams(np.eye(2), "experiment")
        assert generalization_gap(w, ds, x, "softmax_ce", "identity") == 1.0

    def test_scripted_reference(self):
        ds = make_synthetic(50, 6, 2, 0.1, 0.5, seed=4)
        z = propagate(build_filter(ds.graph, "normalized"), ds.features)
        w = np.random.default_rng(0).standard_normal(6)
        y = np.where(ds.labels == 1, 1.0, -1.0)
        f = 1 / (1 + np.exp(-(z @ w)))
        loss = np.log1p(np.exp(-y * f))
        want = abs(loss[ds.train_idx].mean() - loss[ds.test_idx].mean())
        got = generalization_gap(ModelParams(w), ds, z, "logistic", "sigmoid")
        assert got == pytest.approx(want, abs=1e-12)

    def test_empty_mask(self):
        ds = Dataset(np.ones((2, 1)), np.array([0, 1]), np.array([0, 1]), np.array([], dtype=np.int64),
                     build_adjacency([], 2))
        with pytest.raises(InputError):
            generalization_gap(ModelParams(np.zeros(1)), ds, ds.features, "logistic", "sigmoid")


class TestPerturb:
    def test_two_train_nodes(self):
        ds = toy_dataset(n=4, train=np.array([0, 1]))
        out, rec = perturb_dataset(ds, 0, seed=5)
        assert rec.source == 1
        np.testing.assert_array_equal(out.features[0], ds.features[1])
        assert out.labels[0] == ds.labels[1]

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_only_row_i_changes(self, seed):
        ds = toy_dataset(n=10, d=3, seed=seed % 7)
        i = int(ds.train_idx[seed % ds.m])
        out, rec = perturb_dataset(ds, i, seed)
        keep = np.arange(ds.n) != i
        np.testing.assert_array_equal(out.features[keep], ds.features[keep])
        np.testing.assert_array_equal(out.labels[keep], ds.labels[keep])
        assert rec.source != i and rec.source in ds.train_idx
        assert out.graph is ds.graph

    def test_errors(self):
        ds = toy_dataset(n=4, train=np.array([0, 2]))
        with pytest.raises(InputError):
            perturb_dataset(ds, 1, 0)
        single = toy_dataset(n=4, train=np.array([0]))
        with pytest.raises(InputError):
            perturb_dataset(single, 0, 0)


class TestTwin:
    def test_scripted_four_node(self):
        ds = four_node()
        cfg = TrainConfig(p=2.0, lam=0.05, eta=2.0, epochs=2, filter_kind="normalized")
        run = twin_train(ds, cfg, 0, source=2)
        seq = run.run_a.trajectory.index_sequence
        np.testing.assert_array_equal(seq, run.run_b.trajectory.index_sequence)

        pert = ds.features.copy()
        pert[0] = ds.features[2]
        y_b = np.array([-1.0, -1.0, -1.0, 1.0])  # node 0 takes node 2's label
        y_a = np.array([1.0, -1.0, -1.0, 1.0])
        filt = build_filter(ds.graph, "normalized").to_dense()
        radius = (math.log1p(math.exp(0.5)) / 0.05) ** 0.5
        wa = scripted_run(filt @ ds.features, y_a, seq, 3, 2.0, 0.05, radius)
        wb = scripted_run(filt @ pert, y_b, seq, 3, 2.0, 0.05, radius)
        want = [math.sqrt(np.sum((a - b) ** 2) / (a @ a + b @ b)) for a, b in zip(wa, wb)]
        np.testing.assert_allclose(run.distances, want, rtol=1e-12)
        np.testing.assert_allclose(run.run_a.params.weights, wa[-1], rtol=1e-12)
        assert min(want) > 0

    def test_identical_replacement_gives_zero(self):
        ds = toy_dataset(n=6, d=2)
        ds.features[2] = ds.features[0]
        ds.labels[2] = ds.labels[0]
        run = twin_train(ds, TrainConfig(epochs=4, eta=0.5), 0, source=2)
        assert np.all(run.distances == 0.0)

    def test_eta_zero_gives_zero(self):
        ds = toy_dataset(n=8, d=3)
        cfg = TrainConfig(eta=0.0, lambda_t=0.01, epochs=3, init="gaussian")
        run = twin_train(ds, cfg, int(ds.train_idx[0]))
        assert np.all(run.distances == 0.0)

    def test_shared_initialisation(self):
        ds = toy_dataset(n=8, d=3)
        run = twin_train(ds, TrainConfig(epochs=1, init="gaussian"), int(ds.train_idx[1]))
        np.testing.assert_array_equal(run.run_a.trajectory.snapshots[0][1], run.run_b.trajectory.snapshots[0][1])
        assert np.any(run.run_a.trajectory.snapshots[0][1] != 0)

    def test_run_a_matches_plain_train(self):
        ds = make_synthetic(60, 8, 2, 0.1, 0.5, seed=2)
        cfg = TrainConfig(p=1.5, epochs=3, seed=4)
        run = twin_train(ds, cfg, int(ds.train_idx[0]))
        params, _, _ = train(ds, cfg)
        np.testing.assert_array_equal(run.run_a.params.weights, params.weights)


@pytest.fixture(scope="module")
def data():
    return make_synthetic(60, 8, 2, 0.1, 0.5, seed=2)


class TestSweep:
    def test_single_cell(self, data):
        res = sweep(data, TrainConfig(epochs=2), [1.5], ["normalized"], 1)
        assert len(res.runs) == 1 and len(res.summary()) == 1

    def test_grid_shape_and_stats(self, data):
        res = sweep(data, TrainConfig(epochs=2, seed=10), [1.001, 2.0], ["normalized", "unnormalized"], 3)
        assert len(res.runs) == 12
        assert [(s.p, s.filter) for s in res.summary()] == [
            (1.001, "normalized"), (2.0, "normalized"), (1.001, "unnormalized"), (2.0, "unnormalized")]
        s = res.summary()[0]
        gaps = res.final(1.001, "normalized", "gen_gap")
        assert s.repeats == 3 and s.gap_mean == pytest.approx(gaps.mean()) and s.gap_std == pytest.approx(gaps.std())
        assert sorted(set(res.seeds.values())) == [10, 11, 12]

    def test_deterministic_and_thread_independent(self, data):
        args = (data, TrainConfig(epochs=2), [1.32, 2.0], ["random_walk"], 2)
        a, b = list(sweep(*args, threads=1).rows()), list(sweep(*args, threads=3).rows())
        assert a == list(sweep(*args, threads=1).rows())
        assert a == b

    def test_invalid(self, data):
        with pytest.raises(InputError):
            sweep(data, TrainConfig(), [], ["normalized"], 1)
        with pytest.raises(InputError):
            sweep(data, TrainConfig(), [2.0], ["normalized"], 0)

    def test_csv_roundtrip(self, data, tmp_path):
        res = sweep(data, TrainConfig(epochs=2), [2.0], ["normalized"], 2)
        path = write_metrics_csv(tmp_path / "m.csv", res.rows())
        back = read_metrics_csv(path)
        rows = list(res.rows())
        assert len(back) == len(rows)
        for rec, row in zip(back, rows):
            assert tuple(rec[c] for c in METRIC_COLUMNS) == row

    def test_csv_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("run_id,p\n")
        with pytest.raises(InputError, match="expected header"):
            read_metrics_csv(bad)
        bad.write_text(",".join(METRIC_COLUMNS) + "\nr,2,normalized,1,0.1,0.2,x,0,0,0\n")
        with pytest.raises(InputError, match="line 2"):
            read_metrics_csv(bad)
