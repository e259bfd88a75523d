import math
import unittest

import numpy as np

from federation_manager.errors import EmptyShard, LabelOutOfRange, MissingConfigKey, ShapeMismatch
from federation_manager.controllers.client_controller import FederatedClient
from federation_manager.models.dataset_models import DatasetSpec, Shard, generate_dataset, partition
from federation_manager.models.head_models import (
    HeadModel,
    head_accuracy,
    head_forward,
    head_loss_grad,
    init_head,
    sgd_epoch,
    train_local,
)
from federation_manager.models.message_models import EvaluateIns, FitIns, FitRes, GetParametersIns, GetParametersRes
from federation_manager.models.tensor_models import ConfigMap, Parameters, make_tensor


def fit_config(epochs=1, lr=0.05, batch_size=16, seed=7):
    return ConfigMap({"local_epochs": epochs, "learning_rate": lr, "batch_size": batch_size, "seed": seed})


def small_shard(n_samples=200, seed=0):
    features, labels = generate_dataset(DatasetSpec(n_samples, 6, 3, 3.0, seed))
    return partition(features, labels, 1, seed=seed, n_classes=3)[0]


class TestHeadForward(unittest.TestCase):
    def test_zero_model_is_uniform(self):
        X = np.random.default_rng(0).normal(size=(5, 4))
        P = head_forward(np.zeros((4, 3)), np.zeros(3), X)
        np.testing.assert_allclose(P, np.full((5, 3), 1 / 3), atol=1e-15)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        P = head_forward(rng.normal(size=(4, 5)) * 10, rng.normal(size=5), rng.normal(size=(50, 4)))
        self.assertLess(np.max(np.abs(P.sum(axis=1) - 1.0)), 1e-12)
        self.assertTrue(np.all(P > 0) and np.all(P < 1))

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        W, X = rng.normal(size=(3, 4)), rng.normal(size=(6, 3))
        a = head_forward(W, np.zeros(4), X)
        b = head_forward(W, np.full(4, 123.0), X)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_large_logits_stay_finite(self):
        P = head_forward(np.array([[1000.0, -1000.0]]), np.zeros(2), np.array([[1.0]]))
        self.assertTrue(np.all(np.isfinite(P)))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            head_forward(np.zeros((3, 2)), np.zeros(2), np.zeros((4, 5)))


class TestLossGrad(unittest.TestCase):
    def test_uniform_loss_is_ln_k(self):
        X = np.random.default_rng(3).normal(size=(10, 4))
        y = np.arange(10) % 5
        loss, _, _ = head_loss_grad(np.zeros((4, 5)), np.zeros(5), X, y)
        self.assertAlmostEqual(loss, math.log(5), places=12)

    def test_confident_correct_predictions(self):
        X = np.eye(3)
        loss, _, _ = head_loss_grad(np.eye(3) * 100.0, np.zeros(3), X, np.arange(3))
        self.assertLess(loss, 1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(4)
        h = 1e-6
        for _ in range(50):
            W, b = rng.normal(size=(4, 3)), rng.normal(size=3)
            X, y = rng.normal(size=(12, 4)), rng.integers(0, 3, size=12)
            _, gW, gb = head_loss_grad(W, b, X, y)
            numeric_W = np.zeros_like(W)
            for idx in np.ndindex(W.shape):
                plus, minus = W.copy(), W.copy()
                plus[idx] += h
                minus[idx] -= h
                numeric_W[idx] = (head_loss_grad(plus, b, X, y)[0] - head_loss_grad(minus, b, X, y)[0]) / (2 * h)
            numeric_b = np.zeros_like(b)
            for i in range(b.size):
                plus, minus = b.copy(), b.copy()
                plus[i] += h
                minus[i] -= h
                numeric_b[i] = (head_loss_grad(W, plus, X, y)[0] - head_loss_grad(W, minus, X, y)[0]) / (2 * h)
            for exact, numeric in ((gW, numeric_W), (gb, numeric_b)):
                scale = np.maximum(np.abs(exact) + np.abs(numeric), 1e-3)
                self.assertLess(np.max(np.abs(exact - numeric) / scale), 1e-5)

    def test_label_out_of_range(self):
        with self.assertRaises(LabelOutOfRange):
            head_loss_grad(np.zeros((2, 3)), np.zeros(3), np.zeros((2, 2)), np.array([0, 3]))

    def test_empty_rows(self):
        with self.assertRaises(EmptyShard):
            head_loss_grad(np.zeros((2, 3)), np.zeros(3), np.zeros((0, 2)), np.array([], dtype=int))


class TestLocalTraining(unittest.TestCase):
    def setUp(self):
        self.shard = small_shard()
        self.model = init_head(6, 3, seed=1)

    def test_zero_learning_rate(self):
        trained = sgd_epoch(self.model, self.shard, 0.0, 16, np.random.default_rng(0))
        np.testing.assert_array_equal(trained.W, self.model.W)
        np.testing.assert_array_equal(trained.b, self.model.b)

    def test_full_batch_is_one_gradient_step(self):
        X, y = self.shard.train_features, self.shard.train_labels
        trained = sgd_epoch(self.model, self.shard, 0.1, X.shape[0], np.random.default_rng(0))
        _, gW, gb = head_loss_grad(self.model.W, self.model.b, X, y)
        np.testing.assert_allclose(trained.W, self.model.W - 0.1 * gW, atol=1e-12)
        np.testing.assert_allclose(trained.b, self.model.b - 0.1 * gb, atol=1e-12)

    def test_same_seed_same_model(self):
        a = sgd_epoch(self.model, self.shard, 0.1, 16, np.random.default_rng(5))
        b = sgd_epoch(self.model, self.shard, 0.1, 16, np.random.default_rng(5))
        self.assertEqual(a.to_parameters(), b.to_parameters())

    def test_full_batch_loss_nonincreasing(self):
        X, y = self.shard.train_features, self.shard.train_labels
        model = self.model
        previous = head_loss_grad(model.W, model.b, X, y)[0]
        for _ in range(30):
            model = train_local(model, X, y, 1, 0.01, X.shape[0], np.random.default_rng(0)).model
            loss = head_loss_grad(model.W, model.b, X, y)[0]
            self.assertLessEqual(loss, previous + 1e-12)
            previous = loss

    def test_admit_hook_stops_before_batch(self):
        X, y = self.shard.train_features, self.shard.train_labels
        admitted = []

        def admit(batch):
            if len(admitted) == 3:
                return False
            admitted.append(batch)
            return True

        outcome = train_local(self.model, X, y, 2, 0.1, 16, np.random.default_rng(0), admit)
        self.assertTrue(outcome.stopped_early)
        self.assertEqual(outcome.sample_visits, 48)

    def test_empty_train_split(self):
        shard = Shard(np.zeros((1, 6)), np.zeros(1, dtype=int), 0, 3)
        with self.assertRaises(EmptyShard):
            sgd_epoch(self.model, shard, 0.1, 4, np.random.default_rng(0))


class TestFederatedClient(unittest.TestCase):
    def setUp(self):
        self.shard = small_shard()
        self.client = FederatedClient(self.shard, init_seed=3)

    def test_seeded_initial_parameters(self):
        self.assertEqual(FederatedClient(self.shard, 3).get_parameters(), self.client.get_parameters())
        self.assertEqual(init_head(6, 3, 3).to_parameters(), self.client.get_parameters())

    def test_returned_parameters_are_a_copy(self):
        before = self.client.get_parameters()
        snapshot = before[0].as_array()
        result = self.client.fit(before, fit_config())
        np.testing.assert_array_equal(before[0].as_array(), snapshot)
        self.assertEqual(self.client.get_parameters(), result.parameters)
        self.assertNotEqual(result.parameters, before)

    def test_fit_counts_sample_visits(self):
        result = self.client.fit(self.client.get_parameters(), fit_config(epochs=3))
        self.assertEqual(result.num_examples, 3 * self.shard.train_count)
        self.assertEqual(result.completed_epochs, 3.0)
        self.assertFalse(result.failed)

    def test_zero_epochs_is_failed(self):
        params = self.client.get_parameters()
        result = self.client.fit(params, fit_config(epochs=0))
        self.assertEqual(result.parameters, params)
        self.assertEqual(result.num_examples, 0)
        self.assertTrue(result.failed)
        self.assertIsInstance(result.to_message(), FitRes)

    def test_missing_key(self):
        with self.assertRaises(MissingConfigKey):
            self.client.fit(self.client.get_parameters(), fit_config().without("seed"))

    def test_shape_mismatch(self):
        wrong = init_head(5, 3, 0).to_parameters()
        with self.assertRaises(ShapeMismatch):
            self.client.fit(wrong, fit_config())
        with self.assertRaises(ShapeMismatch):
            self.client.evaluate(Parameters([make_tensor([1], [0.0])]))

    def test_more_epochs_lower_train_loss(self):
        params = self.client.get_parameters()
        one = FederatedClient(self.shard, 3).fit(params, fit_config(epochs=1, lr=0.01))
        five = FederatedClient(self.shard, 3).fit(params, fit_config(epochs=5, lr=0.01))
        self.assertLessEqual(five.metrics["train_loss"], one.metrics["train_loss"])

    def test_full_batch_matches_centralized_descent(self):
        X, y = generate_dataset(DatasetSpec(200, 6, 3, 3.0, 0))
        client = FederatedClient(Shard(X, y, X.shape[0], 3), init_seed=3)
        params = client.get_parameters()
        result = client.fit(params, fit_config(epochs=50, lr=0.05, batch_size=X.shape[0]))
        W, b = params[0].as_array(), params[1].as_array()
        for _ in range(50):
            _, gW, gb = head_loss_grad(W, b, X, y)
            W, b = W - 0.05 * gW, b - 0.05 * gb
        trained = HeadModel.from_parameters(result.parameters)
        self.assertLess(np.max(np.abs(trained.W - W)), 1e-9)
        self.assertLess(np.max(np.abs(trained.b - b)), 1e-9)

    def test_evaluate_empty_test_split(self):
        X, y = generate_dataset(DatasetSpec(20, 6, 3, 3.0, 0))
        client = FederatedClient(Shard(X, y, X.shape[0], 3))
        result = client.evaluate(client.get_parameters())
        self.assertEqual(result.num_examples, 0)
        self.assertTrue(result.metrics["failed"])
        self.assertEqual(client.handle(EvaluateIns(client.get_parameters(), ConfigMap())).num_examples, 0)

    def test_evaluate_zero_model(self):
        zero = HeadModel(np.zeros((6, 3)), np.zeros(3)).to_parameters()
        result = self.client.evaluate(zero)
        self.assertAlmostEqual(result.loss, math.log(3), places=12)
        self.assertEqual(result.num_examples, self.shard.test_count)

    def test_evaluate_perfect_classifier(self):
        features = np.array([[1.0, 0.0], [0.0, 1.0]] * 5)
        labels = np.array([0, 1] * 5)
        client = FederatedClient(Shard(features, labels, 6, 2))
        perfect = HeadModel(np.eye(2) * 50.0, np.zeros(2)).to_parameters()
        self.assertEqual(client.evaluate(perfect).metrics["accuracy"], 1.0)

    def test_evaluate_is_pure(self):
        params = self.client.get_parameters()
        self.assertEqual(self.client.evaluate(params), self.client.evaluate(params))
        self.assertEqual(self.client.get_parameters(), params)

    def test_handle_messages(self):
        answer = self.client.handle(GetParametersIns())
        self.assertIsInstance(answer, GetParametersRes)
        rejected = self.client.handle(FitIns(answer.parameters, ConfigMap({"local_epochs": 1})))
        self.assertTrue(rejected.failed)
        self.assertEqual(rejected.num_examples, 0)

    def test_accuracy_helper(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        self.assertEqual(head_accuracy(np.eye(2), np.zeros(2), X, np.array([0, 0])), 0.5)


if __name__ == "__main__":
    unittest.main()
