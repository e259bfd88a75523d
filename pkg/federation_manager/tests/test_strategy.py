import unittest
from types import SimpleNamespace

import numpy as np

from federation_manager.errors import (
    EmptyResults,
    InsufficientResults,
    InvalidCutoff,
    ShapeMismatch,
    UnknownProcessorClass,
    ZeroTotalWeight,
)
from federation_manager.models.record_models import EvaluateOutcome, FitOutcome
from federation_manager.models.tensor_models import ConfigMap, Parameters, Tensor, make_tensor
from federation_manager.controllers.strategy_controller import (
    DeadlineFedAvg,
    FedAvg,
    aggregate_evaluate,
    weighted_average,
)


def fake_client(client_id, processor_class="gpu"):
    return SimpleNamespace(client_id=client_id, capabilities=ConfigMap({"processor_class": processor_class}))


def random_params(rng, shapes=((3, 2), (2,))):
    return Parameters([Tensor(s, rng.normal(size=int(np.prod(s)))) for s in shapes])


class TestWeightedAverage(unittest.TestCase):
    def test_equal_values(self):
        p = Parameters([make_tensor([2], [1.5, -2.0])])
        self.assertEqual(weighted_average([(p, 3), (p, 5)]), p)

    def test_hand_computed(self):
        items = [(Parameters([make_tensor([], [0.0])]), 1), (Parameters([make_tensor([], [4.0])]), 3)]
        result = weighted_average(items)
        self.assertEqual(float(result[0].data[0]), 3.0)

    def test_against_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            shapes = [(int(rng.integers(1, 9)), int(rng.integers(1, 9))) for _ in range(int(rng.integers(1, 5)))]
            count = int(rng.integers(1, 6))
            items = [(random_params(rng, shapes), int(rng.integers(1, 101))) for _ in range(count)]
            result = weighted_average(items)
            total = sum(w for _, w in items)
            for index in range(len(shapes)):
                expected = sum(w * p[index].as_array() for p, w in items) / total
                self.assertLess(np.max(np.abs(result[index].as_array() - expected)), 1e-12)

    def test_weight_scaling(self):
        rng = np.random.default_rng(1)
        items = [(random_params(rng), int(rng.integers(1, 50))) for _ in range(4)]
        scaled = [(p, 7 * w) for p, w in items]
        a, b = weighted_average(items), weighted_average(scaled)
        for ta, tb in zip(a, b):
            self.assertLess(np.max(np.abs(ta.data - tb.data)), 1e-12)

    def test_empty(self):
        with self.assertRaises(EmptyResults):
            weighted_average([])

    def test_shape_mismatch(self):
        a = Parameters([make_tensor([2], [1, 2])])
        b = Parameters([make_tensor([3], [1, 2, 3])])
        with self.assertRaises(ShapeMismatch):
            weighted_average([(a, 1), (b, 1)])

    def test_zero_total_weight(self):
        p = Parameters([make_tensor([1], [1.0])])
        with self.assertRaises(ZeroTotalWeight):
            weighted_average([(p, 0), (p, 0)])


class TestAggregateEvaluate(unittest.TestCase):
    def test_single(self):
        self.assertEqual(aggregate_evaluate([(0.5, 10)]), 0.5)

    def test_mean_of_two(self):
        self.assertEqual(aggregate_evaluate([(0.0, 1), (1.0, 1)]), 0.5)

    def test_against_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            results = [(float(rng.uniform(0, 5)), int(rng.integers(1, 100))) for _ in range(5)]
            expected = sum(loss * n for loss, n in results) / sum(n for _, n in results)
            self.assertLess(abs(aggregate_evaluate(results) - expected), 1e-12)

    def test_empty(self):
        with self.assertRaises(EmptyResults):
            aggregate_evaluate([])

    def test_strategy_aggregate_evaluate_weights_accuracy(self):
        strategy = FedAvg(1, 0.1, 8)
        outcomes = [EvaluateOutcome("b", 1.0, 3, 0.0), EvaluateOutcome("a", 0.0, 1, 1.0)]
        loss, accuracy = strategy.aggregate_evaluate(1, outcomes)
        self.assertEqual(loss, 0.75)
        self.assertEqual(accuracy, 0.25)


class TestFedAvg(unittest.TestCase):
    def setUp(self):
        self.strategy = FedAvg(local_epochs=5, learning_rate=0.05, batch_size=32, base_seed=42)
        self.params = Parameters([make_tensor([2], [0.0, 1.0])])

    def test_configure_fit_carries_hyper_parameters(self):
        clients = [fake_client(f"c{i}") for i in range(10)]
        instructions = self.strategy.configure_fit(1, self.params, clients)
        self.assertEqual(len(instructions), 10)
        self.assertEqual(len({cid for cid, _ in instructions}), 10)
        for _, ins in instructions:
            self.assertEqual(ins.config["local_epochs"], 5)
            self.assertEqual(ins.config["learning_rate"], 0.05)
            self.assertEqual(ins.config["batch_size"], 32)
            self.assertNotIn("cutoff_seconds", ins.config)
            self.assertEqual(ins.parameters, self.params)

    def test_seed_derivation(self):
        self.assertEqual(self.strategy.fit_seed(3, "c1"), self.strategy.fit_seed(3, "c1"))
        self.assertNotEqual(self.strategy.fit_seed(3, "c1"), self.strategy.fit_seed(4, "c1"))
        self.assertNotEqual(self.strategy.fit_seed(3, "c1"), self.strategy.fit_seed(3, "c2"))

    def test_instructions_sorted_by_client_id(self):
        clients = [fake_client("b"), fake_client("c"), fake_client("a")]
        ids = [cid for cid, _ in self.strategy.configure_fit(1, self.params, clients)]
        self.assertEqual(ids, ["a", "b", "c"])

    def test_single_result(self):
        p = Parameters([make_tensor([2], [3.0, 4.0])])
        self.assertEqual(self.strategy.aggregate_fit(1, [FitOutcome("a", p, 10)], []), p)

    def test_midpoint(self):
        a = FitOutcome("a", Parameters([make_tensor([2], [0.0, 2.0])]), 5)
        b = FitOutcome("b", Parameters([make_tensor([2], [2.0, 4.0])]), 5)
        result = self.strategy.aggregate_fit(1, [a, b], [])
        self.assertEqual(result[0].data.tolist(), [1.0, 3.0])

    def test_permutation_invariant_bitwise(self):
        rng = np.random.default_rng(4)
        outcomes = [FitOutcome(f"c{i}", random_params(rng), int(rng.integers(1, 100))) for i in range(6)]
        reference = self.strategy.aggregate_fit(1, outcomes, [])
        for _ in range(10):
            shuffled = [outcomes[i] for i in rng.permutation(len(outcomes))]
            self.assertEqual(self.strategy.aggregate_fit(1, shuffled, []), reference)

    def test_insufficient_results(self):
        a = FitOutcome("a", self.params, 5)
        with self.assertRaises(InsufficientResults):
            self.strategy.aggregate_fit(1, [a], ["b"])

    def test_lowered_minimum(self):
        strategy = FedAvg(1, 0.1, 8, min_successful_clients=2)
        outcomes = [FitOutcome("a", self.params, 5), FitOutcome("b", self.params, 5)]
        self.assertEqual(strategy.aggregate_fit(1, outcomes, ["c"]), self.params)
        with self.assertRaises(InsufficientResults):
            strategy.aggregate_fit(1, outcomes[:1], ["b", "c"])


class TestDeadlineFedAvg(unittest.TestCase):
    def setUp(self):
        self.params = Parameters([make_tensor([2], [0.0, 1.0])])

    def test_cutoff_only_for_positive_tau(self):
        strategy = DeadlineFedAvg(5, 0.05, 32, {"gpu": 0.0, "cpu": 119.4})
        instructions = dict(strategy.configure_fit(1, self.params, [fake_client("g", "gpu"),
                                                                    fake_client("c", "cpu")]))
        self.assertNotIn("cutoff_seconds", instructions["g"].config)
        self.assertEqual(instructions["c"].config["cutoff_seconds"], 119.4)

    def test_all_zero_tau_equals_fedavg(self):
        clients = [fake_client("g", "gpu"), fake_client("c", "cpu")]
        deadline = DeadlineFedAvg(5, 0.05, 32, {"gpu": 0.0, "cpu": 0.0}, base_seed=9)
        fedavg = FedAvg(5, 0.05, 32, base_seed=9)
        self.assertEqual(deadline.configure_fit(2, self.params, clients),
                         fedavg.configure_fit(2, self.params, clients))

    def test_unknown_class(self):
        strategy = DeadlineFedAvg(5, 0.05, 32, {"gpu": 0.0})
        with self.assertRaises(UnknownProcessorClass):
            strategy.configure_fit(1, self.params, [fake_client("t", "tpu")])

    def test_negative_tau(self):
        with self.assertRaises(UnknownProcessorClass):
            DeadlineFedAvg(5, 0.05, 32, {"cpu": -1.0})
        with self.assertRaises(InvalidCutoff):
            DeadlineFedAvg(5, 0.05, 32, {"cpu": float("inf")})

    def test_partial_client_weight(self):
        strategy = DeadlineFedAvg(1, 0.05, 32, {"gpu": 0.0, "cpu": 10.0})
        full = FitOutcome("a", Parameters([make_tensor([], [0.0])]), 100)
        half = FitOutcome("b", Parameters([make_tensor([], [3.0])]), 50)
        result = strategy.aggregate_fit(1, [full, half], [])
        self.assertAlmostEqual(float(result[0].data[0]), 1.0, places=12)


if __name__ == "__main__":
    unittest.main()
