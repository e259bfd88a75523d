import json
import os
import tempfile
import unittest

from federation_manager.errors import MetricsIoError
from federation_manager.models.metrics_repository import (
    MetricsRepository,
    metrics_to_csv,
    read_metrics,
    write_metrics,
)
from federation_manager.models.record_models import MetricsTable, RoundRecord
from federation_manager.models.tensor_models import Parameters, make_tensor


def sample_table():
    records = (
        RoundRecord(1, 1.0986122886681098, 0.35, 4.0, 40.0, 4.0, 40.0, ("c0", "c1")),
        RoundRecord(2, 0.1, 0.9, 5.08, 50.8, 9.08, 90.8, ("c0",), failed_clients=("c1",)),
    )
    params = Parameters([make_tensor([2, 2], [0.1, 0.2, 0.3, 0.4]), make_tensor([2], [0.0, -0.5])])
    return MetricsTable(records, params, "abc123", "in_process", "federated")


class TestMetricsCsv(unittest.TestCase):
    def test_exact_text(self):
        expected = (
            "round,global_loss,global_accuracy,round_virtual_time_s,round_energy_j,"
            "cum_virtual_time_s,cum_energy_j,participants\n"
            "1,1.0986122886681098,0.35,4.0,40.0,4.0,40.0,c0;c1\n"
            "2,0.1,0.9,5.08,50.8,9.08,90.8,c0\n"
        )
        self.assertEqual(metrics_to_csv(sample_table()), expected)

    def test_header_only_without_rounds(self):
        text = metrics_to_csv(MetricsTable(()))
        self.assertEqual(text.count("\n"), 1)

    def test_read_back(self):
        table = sample_table()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "metrics.csv")
            write_metrics(table, path)
            self.assertEqual(tuple(read_metrics(path)), table.records)

    def test_bad_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "metrics.csv")
            with open(path, "w", encoding="utf-8") as f:
                f.write("a,b\n")
            with self.assertRaises(MetricsIoError):
                read_metrics(path)

    def test_missing_file(self):
        with self.assertRaises(MetricsIoError):
            read_metrics("/nonexistent/metrics.csv")


class TestMetricsRepository(unittest.TestCase):
    def test_save_and_load(self):
        table = sample_table()
        with tempfile.TemporaryDirectory() as tmp:
            repo = MetricsRepository(os.path.join(tmp, "run"))
            repo.save_table(table)
            self.assertTrue(os.path.exists(repo.metadata_path))
            with open(repo.metadata_path, encoding="utf-8") as f:
                metadata = json.load(f)
            loaded = repo.load_table()
        self.assertEqual(metadata["config_hash"], "abc123")
        self.assertEqual(metadata["mode"], "in_process")
        self.assertEqual(loaded.records, table.records)
        self.assertEqual(loaded.final_parameters, table.final_parameters)
        self.assertEqual(loaded.config_hash, "abc123")

    def test_sub_repository(self):
        with tempfile.TemporaryDirectory() as tmp:
            sub = MetricsRepository(tmp).sub_repository("local_epochs=5")
            self.assertTrue(os.path.isdir(sub.dir_path))
            self.assertTrue(sub.metrics_path.endswith(os.path.join("local_epochs=5", "metrics.csv")))

    def test_summary_properties(self):
        table = sample_table()
        self.assertEqual(table.final_accuracy, 0.9)
        self.assertEqual(table.total_virtual_time_s, 9.08)
        self.assertEqual(table.total_energy_j, 90.8)
        self.assertEqual(table.all_failed_clients(), [(2, "c1")])


if __name__ == "__main__":
    unittest.main()
