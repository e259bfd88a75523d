from __future__ import annotations

import math
from dataclasses import dataclass

from federation_manager.constants.config_keys import (
    DEFAULT_POWER_WATTS,
    DEFAULT_PROCESSOR_CLASS,
    DEFAULT_SECONDS_PER_SAMPLE,
    KEY_POWER_WATTS,
    KEY_PROCESSOR_CLASS,
    KEY_SECONDS_PER_SAMPLE,
)
from federation_manager.errors import InvalidSpec
from federation_manager.models.tensor_models import ConfigMap


@dataclass(frozen=True)
class ClientProfile:
    """
    Simulated hardware of one client.

    Attributes:
        client_id (str): Identifiant du client.
        processor_class (str): Classe de processeur ("gpu", "cpu", ...).
        seconds_per_sample (float): Temps virtuel pour une visite d'exemple.
        power_watts (float): Puissance active.
        shard_index (int): Index du shard de données.
    """
    client_id: str
    processor_class: str = DEFAULT_PROCESSOR_CLASS
    seconds_per_sample: float = DEFAULT_SECONDS_PER_SAMPLE
    power_watts: float = DEFAULT_POWER_WATTS
    shard_index: int = 0

    def __post_init__(self) -> None:
        if not self.client_id:
            raise InvalidSpec("client_id ne peut pas être vide.")
        for name in ("seconds_per_sample", "power_watts"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidSpec(f"{name} doit être strictement positif (reçu {value}).")
        if self.shard_index < 0:
            raise InvalidSpec("shard_index doit être >= 0.")

    def capabilities(self) -> ConfigMap:
        """Capabilities advertised in Hello."""
        return ConfigMap({
            KEY_PROCESSOR_CLASS: self.processor_class,
            KEY_SECONDS_PER_SAMPLE: float(self.seconds_per_sample),
            KEY_POWER_WATTS: float(self.power_watts),
        })

    def energy_for(self, virtual_time_s: float) -> float:
        """Active power × time; idle power is not modelled."""
        return self.power_watts * virtual_time_s


class SimClock:
    """
    Virtual clock of one client for one round.

    Counts sample-visits; elapsed time is samples × seconds_per_sample, never a
    running float sum, so an uncut run lands exactly on the full-run product.
    """

    def __init__(self, seconds_per_sample: float) -> None:
        self.seconds_per_sample = seconds_per_sample
        self.samples = 0

    @property
    def elapsed_virtual_s(self) -> float:
        return self.samples * self.seconds_per_sample

    def time_after(self, batch_samples: int) -> float:
        return (self.samples + batch_samples) * self.seconds_per_sample

    def advance(self, batch_samples: int) -> None:
        self.samples += batch_samples
