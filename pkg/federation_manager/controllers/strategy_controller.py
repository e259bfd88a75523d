"""
Server-side decision layer: which config each selected client gets, and how
results are folded into the next global model.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from federation_manager.constants.config_keys import (
    KEY_BATCH_SIZE,
    KEY_CUTOFF_SECONDS,
    KEY_LEARNING_RATE,
    KEY_LOCAL_EPOCHS,
    KEY_PROCESSOR_CLASS,
    KEY_SEED,
)
from federation_manager.errors import (
    EmptyResults,
    InsufficientResults,
    InvalidCutoff,
    ShapeMismatch,
    UnknownProcessorClass,
    ZeroTotalWeight,
)
from federation_manager.models.message_models import EvaluateIns, FitIns
from federation_manager.models.record_models import EvaluateOutcome, FitOutcome
from federation_manager.models.tensor_models import ConfigMap, Parameters, Tensor
from federation_manager.utils.seeding import derive_seed

logger = logging.getLogger(__name__)


def weighted_average(items: Sequence[Tuple[Parameters, int]]) -> Parameters:
    """
    Element-wise Σ wᵢ·pᵢ / Σ wᵢ in float64, accumulated in the given order.

    Raises:
        EmptyResults: Liste vide.
        ShapeMismatch: Paramètres de formes incompatibles.
        ZeroTotalWeight: Somme des poids nulle.
    """
    if not items:
        raise EmptyResults("Aucun résultat à agréger.")
    reference = items[0][0]
    for parameters, _ in items[1:]:
        if not reference.is_shape_compatible(parameters):
            raise ShapeMismatch(f"Formes incompatibles : {reference.shapes} contre {parameters.shapes}.")
    total = 0
    for _, weight in items:
        if weight < 0:
            raise ZeroTotalWeight(f"Poids négatif : {weight}.")
        total += weight
    if total == 0:
        raise ZeroTotalWeight("La somme des poids est nulle.")

    sums = [np.zeros(t.size, dtype=np.float64) for t in reference]
    for parameters, weight in items:
        for acc, tensor in zip(sums, parameters):
            acc += float(weight) * tensor.data
    return Parameters([Tensor(t.shape, acc / float(total)) for t, acc in zip(reference, sums)])


def aggregate_evaluate(results: Sequence[Tuple[float, int]]) -> float:
    """Example-weighted mean loss."""
    if not results:
        raise EmptyResults("Aucun résultat d'évaluation.")
    total = sum(n for _, n in results)
    if total == 0:
        raise EmptyResults("Aucun exemple évalué.")
    return sum(float(n) * loss for loss, n in results) / float(total)


class Strategy(ABC):
    """
    Decisions delegated by the FL loop. Implementations are immutable once built.

    min_successful_clients None means every selected client must succeed.
    """

    @property
    @abstractmethod
    def min_successful_clients(self) -> Optional[int]: ...

    def required_results(self, n_selected: int) -> int:
        if self.min_successful_clients is None:
            return n_selected
        return min(self.min_successful_clients, n_selected)

    @abstractmethod
    def configure_fit(self, round: int, parameters: Parameters, clients: Sequence) -> List[Tuple[str, FitIns]]: ...

    @abstractmethod
    def aggregate_fit(self, round: int, results: Sequence[FitOutcome], failures: Sequence[str]) -> Parameters: ...

    def configure_evaluate(self, round: int, parameters: Parameters,
                           clients: Sequence) -> List[Tuple[str, EvaluateIns]]:
        ins = EvaluateIns(parameters, ConfigMap({"round": round}))
        return [(client.client_id, ins) for client in sorted(clients, key=lambda c: c.client_id)]

    def aggregate_evaluate(self, round: int, results: Sequence[EvaluateOutcome]) -> Tuple[float, float]:
        """(loss, accuracy), both example-weighted."""
        ordered = sorted(results, key=lambda r: r.client_id)
        loss = aggregate_evaluate([(r.loss, r.num_examples) for r in ordered])
        accuracy = aggregate_evaluate([(r.accuracy, r.num_examples) for r in ordered])
        return loss, accuracy


class FedAvg(Strategy):
    """
    Federated averaging, weights = examples processed this round.

    Args:
        local_epochs: E envoyé à chaque client.
        learning_rate: Pas de SGD.
        batch_size: Taille de lot.
        base_seed: Graine de base des graines par tour et par client.
        min_successful_clients: Minimum de résultats pour agréger (None = tous).
    """

    name = "fedavg"

    def __init__(self, local_epochs: int, learning_rate: float, batch_size: int, base_seed: int = 0,
                 min_successful_clients: Optional[int] = None) -> None:
        if min_successful_clients is not None and min_successful_clients < 1:
            raise ValueError("min_successful_clients doit être >= 1.")
        self._local_epochs = int(local_epochs)
        self._learning_rate = float(learning_rate)
        self._batch_size = int(batch_size)
        self._base_seed = int(base_seed)
        self._min_successful_clients = min_successful_clients

    @property
    def min_successful_clients(self) -> Optional[int]:
        return self._min_successful_clients

    def fit_seed(self, round: int, client_id: str) -> int:
        return derive_seed(self._base_seed, "fit", round, client_id)

    def base_fit_config(self, round: int, client_id: str) -> Dict[str, object]:
        return {
            KEY_LOCAL_EPOCHS: self._local_epochs,
            KEY_LEARNING_RATE: self._learning_rate,
            KEY_BATCH_SIZE: self._batch_size,
            KEY_SEED: self.fit_seed(round, client_id),
        }

    def configure_fit(self, round: int, parameters: Parameters, clients: Sequence) -> List[Tuple[str, FitIns]]:
        instructions = []
        for client in sorted(clients, key=lambda c: c.client_id):
            config = ConfigMap(self.base_fit_config(round, client.client_id))
            instructions.append((client.client_id, FitIns(parameters, config)))
        return instructions

    def aggregate_fit(self, round: int, results: Sequence[FitOutcome], failures: Sequence[str]) -> Parameters:
        usable = [r for r in results if r.num_examples > 0]
        required = self.required_results(len(usable) + len(failures))
        if len(usable) < required or not usable:
            raise InsufficientResults(
                f"Tour {round} : {len(usable)} résultat(s) exploitable(s), {required} requis."
            )
        ordered = sorted(usable, key=lambda r: r.client_id)
        return weighted_average([(r.parameters, r.num_examples) for r in ordered])


class DeadlineFedAvg(FedAvg):
    """
    FedAvg with a processor-specific cutoff τ. Clients return whatever they have
    at τ; τ = 0 disables the cutoff for that class.
    """

    name = "deadline"

    def __init__(self, local_epochs: int, learning_rate: float, batch_size: int,
                 tau_seconds_by_class: Mapping[str, float], base_seed: int = 0,
                 min_successful_clients: Optional[int] = None) -> None:
        super().__init__(local_epochs, learning_rate, batch_size, base_seed, min_successful_clients)
        taus: Dict[str, float] = {}
        for processor_class, tau in tau_seconds_by_class.items():
            tau = float(tau)
            if not math.isfinite(tau) or tau < 0:
                raise InvalidCutoff(f"τ invalide pour la classe {processor_class!r} : {tau}.")
            taus[processor_class] = tau
        self._taus = taus

    @property
    def tau_seconds_by_class(self) -> Dict[str, float]:
        return dict(self._taus)

    def tau_for(self, capabilities: ConfigMap) -> float:
        processor_class = capabilities.get(KEY_PROCESSOR_CLASS)
        if processor_class not in self._taus:
            raise UnknownProcessorClass(f"Aucun τ configuré pour la classe {processor_class!r}.")
        return self._taus[processor_class]

    def configure_fit(self, round: int, parameters: Parameters, clients: Sequence) -> List[Tuple[str, FitIns]]:
        instructions = []
        for client in sorted(clients, key=lambda c: c.client_id):
            config = self.base_fit_config(round, client.client_id)
            tau = self.tau_for(client.capabilities)
            if tau > 0:
                config[KEY_CUTOFF_SECONDS] = tau
            instructions.append((client.client_id, FitIns(parameters, ConfigMap(config))))
        return instructions


def build_strategy(cfg) -> Strategy:
    """Strategy described by an ExperimentConfig."""
    common = dict(
        local_epochs=cfg.local_epochs,
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        base_seed=cfg.seeds.model,
        min_successful_clients=cfg.strategy.min_successful_clients,
    )
    if cfg.strategy.type == "deadline":
        return DeadlineFedAvg(tau_seconds_by_class=cfg.strategy.tau_by_class, **common)
    return FedAvg(**common)
