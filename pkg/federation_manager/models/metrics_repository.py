import csv
import io
import json
import os
from typing import List

from federation_manager.constants.metrics_fields import (
    METADATA_SUFFIX,
    METRICS_COLUMNS,
    METRICS_FILE_NAME,
    PARAMETERS_FILE_NAME,
    PARTICIPANT_SEPARATOR,
)
from federation_manager.errors import MetricsIoError
from federation_manager.models.record_models import MetricsTable, RoundRecord
from federation_manager.models.tensor_models import Parameters
from federation_manager.utils.codec import decode_parameters, encode_parameters


def metrics_to_csv(table: MetricsTable) -> str:
    """CSV text: exact columns, '\\n' line endings, floats written with repr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for record in table.records:
        writer.writerow([
            str(record.round),
            repr(float(record.global_loss)),
            repr(float(record.global_accuracy)),
            repr(float(record.round_virtual_time_s)),
            repr(float(record.round_energy_j)),
            repr(float(record.cum_virtual_time_s)),
            repr(float(record.cum_energy_j)),
            PARTICIPANT_SEPARATOR.join(record.participants),
        ])
    return buffer.getvalue()


def _write_bytes(path: str, data: bytes) -> None:
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise MetricsIoError(f"Écriture impossible de {path} : {e.strerror}.") from e


def write_metrics(table: MetricsTable, path: str) -> None:
    """Write the CSV; same table, same bytes."""
    _write_bytes(path, metrics_to_csv(table).encode("utf-8"))


def read_metrics(path: str) -> List[RoundRecord]:
    """Parse a metrics CSV back into round records."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise MetricsIoError(f"Lecture impossible de {path} : {e.strerror}.") from e
    if not rows or rows[0] != METRICS_COLUMNS:
        raise MetricsIoError(f"En-tête CSV inattendu dans {path}.")
    records = []
    for row in rows[1:]:
        if len(row) != len(METRICS_COLUMNS):
            raise MetricsIoError(f"Ligne CSV invalide dans {path} : {row!r}.")
        participants = tuple(p for p in row[7].split(PARTICIPANT_SEPARATOR) if p)
        records.append(RoundRecord(
            int(row[0]), float(row[1]), float(row[2]), float(row[3]),
            float(row[4]), float(row[5]), float(row[6]), participants,
        ))
    return records


def write_metadata(table: MetricsTable, path: str) -> None:
    """Sidecar JSON with config hash, mode and evaluation kind."""
    text = json.dumps(table.metadata(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    _write_bytes(path, text.encode("utf-8"))


def write_parameters(parameters: Parameters, path: str) -> None:
    _write_bytes(path, encode_parameters(parameters))


def read_parameters_file(path: str) -> Parameters:
    try:
        with open(path, "rb") as f:
            return decode_parameters(f.read())
    except OSError as e:
        raise MetricsIoError(f"Lecture impossible de {path} : {e.strerror}.") from e


class MetricsRepository:
    """
    Gère la persistance des résultats d'expérience dans un répertoire :
    metrics.csv, son fichier de métadonnées et les paramètres finaux.
    """

    def __init__(self, dir_path: str = "data/results") -> None:
        self.dir_path = dir_path
        try:
            os.makedirs(self.dir_path, exist_ok=True)
        except OSError as e:
            raise MetricsIoError(f"Création impossible de {dir_path} : {e.strerror}.") from e

    @property
    def metrics_path(self) -> str:
        return os.path.join(self.dir_path, METRICS_FILE_NAME)

    @property
    def metadata_path(self) -> str:
        return self.metrics_path + METADATA_SUFFIX

    @property
    def parameters_path(self) -> str:
        return os.path.join(self.dir_path, PARAMETERS_FILE_NAME)

    def save_table(self, table: MetricsTable) -> None:
        """Write the three files of one run."""
        write_metrics(table, self.metrics_path)
        write_metadata(table, self.metadata_path)
        write_parameters(table.final_parameters, self.parameters_path)

    def load_table(self) -> MetricsTable:
        """Read a saved run back (metadata is optional)."""
        records = read_metrics(self.metrics_path)
        metadata = {}
        if os.path.exists(self.metadata_path):
            try:
                with open(self.metadata_path, "r", encoding="utf-8") as f:
                    metadata = json.load(f)
            except (OSError, json.JSONDecodeError):
                metadata = {}
        parameters = Parameters([])
        if os.path.exists(self.parameters_path):
            parameters = read_parameters_file(self.parameters_path)
        return MetricsTable(
            tuple(records),
            parameters,
            metadata.get("config_hash", ""),
            metadata.get("mode", "in_process"),
            metadata.get("evaluation", "federated"),
        )

    def sub_repository(self, name: str) -> "MetricsRepository":
        """One sub-directory per sweep value."""
        return MetricsRepository(os.path.join(self.dir_path, name))
