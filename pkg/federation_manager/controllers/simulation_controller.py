"""
Deterministic client heterogeneity: virtual time, energy and cutoff τ inside fit.

Nothing here reads the wall clock; time is sample-visits × seconds_per_sample.
"""
from __future__ import annotations

import logging
from typing import Sequence, Tuple

from federation_manager.constants.config_keys import (
    KEY_COMPLETED_EPOCHS,
    KEY_CUTOFF_SECONDS,
    KEY_ENERGY_J,
    KEY_FAILED,
    KEY_LOCAL_EPOCHS,
    KEY_VIRTUAL_TIME_S,
)
from federation_manager.controllers.client_controller import FederatedClient, FitResult
from federation_manager.errors import EmptyList, MissingConfigKey, ShapeMismatch
from federation_manager.models.message_models import FitIns, FitRes, Message
from federation_manager.models.profile_models import ClientProfile, SimClock
from federation_manager.models.tensor_models import ConfigMap, Parameters

logger = logging.getLogger(__name__)


def simulate_fit(
    profile: ClientProfile,
    client: FederatedClient,
    parameters: Parameters,
    config: ConfigMap,
) -> Tuple[FitResult, float, float]:
    """
    Run client.fit under the profile's virtual clock.

    With cutoff_seconds τ > 0, training stops before the first batch that would
    end after τ; only completed batches count.

    Returns:
        (FitResult with virtual_time_s and energy_J in its metrics, virtual_time_s, energy_J)
    """
    clock = SimClock(profile.seconds_per_sample)
    tau = config.get(KEY_CUTOFF_SECONDS)
    cutoff = float(tau) if tau is not None and float(tau) > 0 else None

    def admit(batch_samples: int) -> bool:
        if cutoff is not None and clock.time_after(batch_samples) > cutoff:
            return False
        clock.advance(batch_samples)
        return True

    result = client.fit(parameters, config, admit_batch=admit)
    virtual_time_s = clock.elapsed_virtual_s
    energy_j = profile.energy_for(virtual_time_s)
    metrics = result.metrics.with_entries(**{KEY_VIRTUAL_TIME_S: virtual_time_s, KEY_ENERGY_J: energy_j})
    if cutoff is not None and result.completed_epochs < config.get(KEY_LOCAL_EPOCHS, 0):
        logger.debug("%s stopped at τ=%s after %d sample-visits", profile.client_id, cutoff, result.num_examples)
    simulated = FitResult(result.parameters, result.num_examples, result.completed_epochs, metrics)
    return simulated, virtual_time_s, energy_j


def round_time(client_times: Sequence[float]) -> float:
    """The straggler defines a synchronous round."""
    if not client_times:
        raise EmptyList("Aucun temps client.")
    return max(client_times)


def round_energy(client_energies: Sequence[float]) -> float:
    if not client_energies:
        raise EmptyList("Aucune énergie client.")
    return float(sum(client_energies))


class SimulatedClient:
    """
    FederatedClient seen through a hardware profile: same messages, plus
    virtual time and energy in every FitRes.
    """

    def __init__(self, client: FederatedClient, profile: ClientProfile) -> None:
        self.client = client
        self.profile = profile

    @property
    def client_id(self) -> str:
        return self.profile.client_id

    def capabilities(self) -> ConfigMap:
        return self.profile.capabilities()

    def handle(self, message: Message) -> Message:
        if not isinstance(message, FitIns):
            return self.client.handle(message)
        try:
            result, _, _ = simulate_fit(self.profile, self.client, message.parameters, message.config)
        except (MissingConfigKey, ShapeMismatch, ValueError) as e:
            logger.warning("%s: fit rejected: %s", self.client_id, e)
            metrics = ConfigMap({KEY_FAILED: True, KEY_COMPLETED_EPOCHS: 0.0,
                                 KEY_VIRTUAL_TIME_S: 0.0, KEY_ENERGY_J: 0.0})
            return FitRes(message.parameters, 0, metrics)
        return result.to_message()
