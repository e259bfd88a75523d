from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from federation_manager.models.tensor_models import ConfigMap, Parameters


@dataclass(frozen=True)
class FitOutcome:
    """
    One successful FitRes, as handed to the strategy.

    Attributes:
        client_id (str): Client qui a répondu.
        parameters (Parameters): Paramètres renvoyés.
        num_examples (int): Visites d'exemples effectuées ce tour (>= 1).
        metrics (ConfigMap): completed_epochs, virtual_time_s, energy_J, ...
    """
    client_id: str
    parameters: Parameters
    num_examples: int
    metrics: ConfigMap = field(default_factory=ConfigMap)

    def __post_init__(self) -> None:
        if self.num_examples < 1:
            raise ValueError(f"FitOutcome de {self.client_id} sans exemple traité.")


@dataclass(frozen=True)
class EvaluateOutcome:
    client_id: str
    loss: float
    num_examples: int
    accuracy: float


@dataclass(frozen=True)
class RoundRecord:
    """
    Metrics of one federated round.

    failed_clients is kept in memory and in the run log only; it does not
    take part in equality since the CSV does not carry it.
    """
    round: int
    global_loss: float
    global_accuracy: float
    round_virtual_time_s: float
    round_energy_j: float
    cum_virtual_time_s: float
    cum_energy_j: float
    participants: Tuple[str, ...] = ()
    failed_clients: Tuple[str, ...] = field(default=(), compare=False)

    def to_row(self) -> Dict[str, object]:
        return {
            "round": self.round,
            "global_loss": self.global_loss,
            "global_accuracy": self.global_accuracy,
            "round_virtual_time_s": self.round_virtual_time_s,
            "round_energy_j": self.round_energy_j,
            "cum_virtual_time_s": self.cum_virtual_time_s,
            "cum_energy_j": self.cum_energy_j,
            "participants": list(self.participants),
        }


@dataclass(frozen=True)
class FederationResult:
    final_parameters: Parameters
    rounds: Tuple[RoundRecord, ...] = ()

    @property
    def final_record(self) -> Optional[RoundRecord]:
        return self.rounds[-1] if self.rounds else None


@dataclass(frozen=True)
class MetricsTable:
    """
    Tableau de métriques d'une exécution : les tours, les paramètres finaux et
    les métadonnées d'en-tête.

    Attributes:
        records (Tuple[RoundRecord, ...]): Un enregistrement par tour exécuté.
        final_parameters (Parameters): Modèle global final.
        config_hash (str): SHA-256 de la configuration canonique (hors mode).
        mode (str): "in_process" ou "tcp".
        evaluation (str): "federated" ou "centralized".
    """
    records: Tuple[RoundRecord, ...]
    final_parameters: Parameters = field(default_factory=lambda: Parameters([]))
    config_hash: str = ""
    mode: str = "in_process"
    evaluation: str = "federated"

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].global_accuracy if self.records else float("nan")

    @property
    def final_loss(self) -> float:
        return self.records[-1].global_loss if self.records else float("nan")

    @property
    def total_virtual_time_s(self) -> float:
        return self.records[-1].cum_virtual_time_s if self.records else 0.0

    @property
    def total_energy_j(self) -> float:
        return self.records[-1].cum_energy_j if self.records else 0.0

    def metadata(self) -> Dict[str, object]:
        return {
            "config_hash": self.config_hash,
            "mode": self.mode,
            "evaluation": self.evaluation,
            "rounds": len(self.records),
        }

    def all_failed_clients(self) -> List[Tuple[int, str]]:
        return [(r.round, cid) for r in self.records for cid in r.failed_clients]
