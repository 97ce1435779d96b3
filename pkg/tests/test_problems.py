"""Objectives, datasets, samplers and their standing gradient checks."""

import numpy as np
import pytest

from innaprop.errors import ConfigError, ContractViolation, ParseError
from innaprop.harness.checks import gradient_fidelity
from innaprop.numerics import ParamVector, RngStream
from innaprop.problems import (
    MiniBatchSampler,
    evaluate,
    generate_synthetic,
    load_csv_dataset,
    make_problem,
    minibatch_grad,
    shipped_problems,
)


class TestQuadratic:
    def test_loss_and_grad_values(self):
        prob = make_problem("quadratic", spectrum=(1.0, 10.0))
        assert prob.loss(np.array([1.0, 1.0])) == pytest.approx(5.5, abs=1e-15)
        np.testing.assert_array_equal(prob.grad(np.array([1.0, 1.0])), [1.0, 10.0])
        assert prob.loss(np.zeros(2)) == 0.0

    def test_spectrum_must_be_positive(self):
        with pytest.raises(ContractViolation):
            make_problem("quadratic", spectrum=(1.0, -2.0))


class TestRosenbrock:
    def test_needs_two_dims(self):
        with pytest.raises(ContractViolation):
            make_problem("rosenbrock", dim=1)

    def test_global_minimum(self):
        prob = make_problem("rosenbrock", dim=2)
        assert prob.loss(np.array([1.0, 1.0])) == 0.0
        np.testing.assert_array_equal(prob.grad(np.array([1.0, 1.0])), [0.0, 0.0])

    def test_nonnegative_and_unique_zero_on_million_probes(self):
        prob = make_problem("rosenbrock", dim=2)
        rng = RngStream(13, 0).generator()
        x = rng.uniform(-2.0, 2.0, size=(1_000_000, 2))
        # Independent vectorized evaluation of the same surface.
        vals = 100.0 * (x[:, 1] - x[:, 0] ** 2) ** 2 + (1.0 - x[:, 0]) ** 2
        assert np.all(vals >= 0.0)
        assert np.min(vals) > 0.0
        sample = rng.integers(0, len(x), 100)
        for i in sample:
            assert prob.loss(x[i]) == pytest.approx(vals[i], rel=1e-12)

    def test_higher_dimensional_gradient(self):
        prob = make_problem("rosenbrock", dim=5)
        from innaprop.numerics import fd_gradient

        point = RngStream(14, 0).generator().uniform(-2, 2, 5)
        fd = fd_gradient(prob, ParamVector(point)).data
        an = prob.grad(point)
        assert np.max(np.abs(fd - an)) / np.max(np.abs(an)) < 1e-6


class TestGradientFidelity:
    def test_all_shipped_problems(self):
        worst = gradient_fidelity(n_points=100)
        assert set(worst) == {"quadratic", "rosenbrock", "logistic_regression", "tiny_mlp"}
        for name, err in worst.items():
            assert err < 1e-6, f"{name}: {err}"

    def test_mlp_validates_architecture(self):
        data = generate_synthetic("two_gaussians", n=20, dim=2, seed=0)
        with pytest.raises(ContractViolation):
            make_problem("tiny_mlp", dataset=data, hidden=(0,))
        with pytest.raises(ContractViolation):
            make_problem("tiny_mlp", dataset=data, activation="swish")

    def test_relu_mlp_at_kink_free_point(self):
        data = generate_synthetic("two_gaussians", n=80, dim=2, seed=5)
        prob = make_problem("tiny_mlp", dataset=data, hidden=(6,), activation="relu")
        from innaprop.numerics import fd_gradient

        point = 0.5 * RngStream(15, 0).generator().standard_normal(prob.dim)
        fd = fd_gradient(prob, ParamVector(point), h=1e-6).data
        an = prob.grad(point)
        assert np.max(np.abs(fd - an)) / max(np.max(np.abs(an)), 1e-12) < 1e-4


class TestSyntheticData:
    def test_two_gaussians_deterministic(self):
        a = generate_synthetic("two_gaussians", n=200, dim=3, seed=7)
        b = generate_synthetic("two_gaussians", n=200, dim=3, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.train_idx, b.train_idx)

    def test_two_gaussians_balanced_within_one(self):
        for n in (200, 201):
            data = generate_synthetic("two_gaussians", n=n, dim=2, seed=3)
            ones = int(np.sum(data.labels))
            assert abs(ones - (n - ones)) <= 1

    def test_bayes_separator_accuracy(self):
        # Means 6 sigma apart: a logistic model fit by plain full-batch
        # gradient descent (the oracle) scores > 99% train accuracy.
        data = generate_synthetic("two_gaussians", n=200, dim=2, seed=7, separation=6.0)
        prob = make_problem("logistic_regression", dataset=data)
        theta = np.zeros(prob.dim)
        for _ in range(800):
            theta = theta - 0.5 * prob.grad(theta)
        x, y = data.train_xy()
        z = x @ theta[:-1] + theta[-1]
        train_acc = np.mean((z > 0) == (y > 0.5))
        assert train_acc > 0.99

    def test_linear_regression_zero_noise_recovery(self):
        data = generate_synthetic("linear_regression", n=120, dim=6, seed=9, noise=0.0)
        x, y = data.train_xy()
        w, *_ = np.linalg.lstsq(x, y, rcond=None)
        assert np.linalg.norm(x @ w - y) < 1e-8

    def test_split_disjoint(self):
        data = generate_synthetic("two_gaussians", n=100, dim=2, seed=1, split_fraction=0.7)
        assert data.n_train == 70 and data.n_test == 30
        assert len(np.intersect1d(data.train_idx, data.test_idx)) == 0

    def test_unknown_kind(self):
        with pytest.raises(ContractViolation):
            generate_synthetic("spiral", n=10, dim=2, seed=0)


class TestCsvLoading:
    def _write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_four_row_even_split(self, tmp_path):
        path = self._write(tmp_path, "a,b,y\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n")
        d1 = load_csv_dataset(path, "y", split_fraction=0.5, seed=0)
        d2 = load_csv_dataset(path, "y", split_fraction=0.5, seed=0)
        assert d1.n_train == 2 and d1.n_test == 2
        assert np.array_equal(d1.train_idx, d2.train_idx)
        assert d1.dim == 2

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = self._write(tmp_path, "a,b,y\n1,2,0\n3,oops,1\n")
        with pytest.raises(ParseError, match=r"row 3.*'b'"):
            load_csv_dataset(path, "y")

    def test_missing_label_column(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(ConfigError, match="label column"):
            load_csv_dataset(path, "target")

    def test_ragged_row(self, tmp_path):
        path = self._write(tmp_path, "a,b,y\n1,2,0\n1,2\n")
        with pytest.raises(ParseError, match="row 3"):
            load_csv_dataset(path, "y")


class TestSamplerAndBatches:
    def test_full_ordered_batch_equals_full_gradient_exactly(self):
        data = generate_synthetic("two_gaussians", n=64, dim=2, seed=2)
        prob = make_problem("logistic_regression", dataset=data)
        theta = 0.3 * RngStream(16, 0).generator().standard_normal(prob.dim)
        full = prob.grad(theta)
        ordered = prob.grad(theta, np.arange(data.n_train))
        assert np.array_equal(full, ordered)

    def test_full_gradient_is_mean_of_singletons(self):
        data = generate_synthetic("two_gaussians", n=40, dim=2, seed=2)
        prob = make_problem("tiny_mlp", dataset=data, hidden=(4,))
        theta = 0.3 * RngStream(17, 0).generator().standard_normal(prob.dim)
        singles = np.mean([prob.grad(theta, np.array([i])) for i in range(data.n_train)], axis=0)
        full = prob.grad(theta)
        assert np.max(np.abs(singles - full)) < 1e-12

    def test_duplicated_example_same_gradient(self):
        # A dataset holding the same example twice yields identical
        # single-example gradients for the two copies.
        from innaprop.problems import Dataset

        features = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
        labels = np.array([1.0, 1.0, 0.0, 0.0])
        data = Dataset(features=features, labels=labels,
                       train_idx=np.arange(4), test_idx=np.array([], dtype=int))
        prob = make_problem("logistic_regression", dataset=data)
        theta = 0.3 * RngStream(19, 0).generator().standard_normal(prob.dim)
        g1 = prob.grad(theta, np.array([0]))
        g2 = prob.grad(theta, np.array([1]))
        assert np.array_equal(g1, g2)

    def test_shuffled_epoch_visits_every_example_once(self):
        sampler = MiniBatchSampler(10, 3, "shuffled-epoch", RngStream(4, 0))
        seen = np.concatenate([sampler.next_batch() for _ in range(4)])
        assert sorted(seen.tolist()) == list(range(10))
        assert sampler.epoch == 1

    def test_fixed_seed_identical_batch_sequence(self):
        runs = []
        for _ in range(2):
            sampler = MiniBatchSampler(32, 8, "shuffled-epoch", RngStream(5, 1))
            runs.append([sampler.next_batch().tolist() for _ in range(12)])
        assert runs[0] == runs[1]

    def test_iid_with_replacement_deterministic(self):
        a = MiniBatchSampler(32, 8, "iid-with-replacement", RngStream(6, 0))
        b = MiniBatchSampler(32, 8, "iid-with-replacement", RngStream(6, 0))
        for _ in range(5):
            assert np.array_equal(a.next_batch(), b.next_batch())

    def test_minibatch_grad_contract(self):
        quad = make_problem("quadratic", spectrum=(1.0, 2.0))
        sampler = MiniBatchSampler(4, 2, rng=RngStream(0))
        with pytest.raises(ContractViolation):
            minibatch_grad(quad, ParamVector([1.0, 1.0]), sampler)

    def test_minibatch_grad_returns_batch(self):
        data = generate_synthetic("two_gaussians", n=30, dim=2, seed=8)
        prob = make_problem("logistic_regression", dataset=data)
        sampler = MiniBatchSampler(data.n_train, 5, rng=RngStream(8, 2))
        g, batch = minibatch_grad(prob, ParamVector(np.zeros(prob.dim)), sampler)
        assert g.dim == prob.dim and len(batch) == 5
        np.testing.assert_allclose(g.data, prob.grad(np.zeros(prob.dim), batch), rtol=1e-15)


class TestEvaluate:
    def test_quadratic_at_origin(self):
        prob = make_problem("quadratic", spectrum=(1.0, 10.0))
        out = evaluate(prob, ParamVector([0.0, 0.0]))
        assert out == {"loss": 0.0, "metric": None}

    def test_uninformative_logistic_near_half(self):
        data = generate_synthetic("two_gaussians", n=400, dim=2, seed=11)
        prob = make_problem("logistic_regression", dataset=data)
        out = evaluate(prob, ParamVector(np.zeros(prob.dim)))
        assert abs(out["metric"] - 0.5) < 0.15

    def test_shipped_problem_registry(self):
        names = [p.name for p in shipped_problems()]
        assert names == ["quadratic", "rosenbrock", "logistic_regression", "tiny_mlp"]
