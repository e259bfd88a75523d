"""
Experiment configuration: one JSON document parsed into frozen dataclasses.

Every validation error names the offending field path, e.g. "clients[2].power_watts".
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

from federation_manager.constants.config_keys import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_CLASS_SEPARATION,
    DEFAULT_CLIENT_COUNT,
    DEFAULT_DATA_SEED,
    DEFAULT_LABEL_SKEW_ALPHA,
    DEFAULT_LEARNING_RATE,
    DEFAULT_LOCAL_EPOCHS,
    DEFAULT_MODEL_SEED,
    DEFAULT_N_CLASSES,
    DEFAULT_N_FEATURES,
    DEFAULT_N_SAMPLES,
    DEFAULT_POWER_WATTS,
    DEFAULT_PROCESSOR_CLASS,
    DEFAULT_ROUNDS,
    DEFAULT_SAMPLING_SEED,
    DEFAULT_SECONDS_PER_SAMPLE,
    EVALUATION_KINDS,
    INITIAL_PARAMETER_SOURCES,
    PARTITION_SCHEMES,
    ROUND_TIMEOUT_FACTOR,
    ROUND_TIMEOUT_FLOOR_S,
    RUN_MODES,
    STRATEGY_TYPES,
    TRAIN_FRACTION,
)
from federation_manager.errors import ConfigParseError, ConfigValidationError, InvalidSpec
from federation_manager.models.dataset_models import DatasetSpec
from federation_manager.models.profile_models import ClientProfile
from federation_manager.utils.validators import (
    is_non_negative_float,
    is_non_negative_int,
    is_number,
    is_positive_float,
    is_positive_int,
    is_valid_client_id,
    is_valid_processor_class,
)

TOP_LEVEL_KEYS = {
    "rounds", "clients", "clients_per_round", "local_epochs", "learning_rate", "batch_size", "dataset",
    "partition", "strategy", "seeds", "mode", "evaluation", "initial_parameters", "round_timeout_s",
}
CLIENT_KEYS = {"id", "processor_class", "seconds_per_sample", "power_watts"}
DATASET_KEYS = {"n_samples", "n_features", "n_classes", "class_separation", "seed"}
PARTITION_KEYS = {"scheme", "alpha"}
STRATEGY_KEYS = {"type", "tau_seconds_by_class", "min_successful_clients"}
SEEDS_KEYS = {"model", "sampling", "data"}


@dataclass(frozen=True)
class PartitionConfig:
    scheme: str = "iid"
    alpha: Optional[float] = None


@dataclass(frozen=True)
class StrategyConfig:
    type: str = "fedavg"
    tau_seconds_by_class: Tuple[Tuple[str, float], ...] = ()
    min_successful_clients: Optional[int] = None

    @property
    def tau_by_class(self) -> Dict[str, float]:
        return dict(self.tau_seconds_by_class)


@dataclass(frozen=True)
class SeedsConfig:
    model: int = DEFAULT_MODEL_SEED
    sampling: int = DEFAULT_SAMPLING_SEED
    data: int = DEFAULT_DATA_SEED


def default_clients(count: int = DEFAULT_CLIENT_COUNT) -> Tuple[ClientProfile, ...]:
    return tuple(ClientProfile(f"client-{i:02d}", shard_index=i) for i in range(count))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Tous les facteurs d'une expérience (E, C, τ, graines, mode).

    clients[i] reads shard i of the partition.
    """
    rounds: int = DEFAULT_ROUNDS
    clients: Tuple[ClientProfile, ...] = field(default_factory=default_clients)
    clients_per_round: int = DEFAULT_CLIENT_COUNT
    local_epochs: int = DEFAULT_LOCAL_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    dataset: DatasetSpec = field(default_factory=lambda: DatasetSpec(
        DEFAULT_N_SAMPLES, DEFAULT_N_FEATURES, DEFAULT_N_CLASSES, DEFAULT_CLASS_SEPARATION, DEFAULT_DATA_SEED))
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    mode: str = "in_process"
    evaluation: str = "federated"
    initial_parameters: str = "seeded"
    round_timeout_s: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready document using the file's key names."""
        doc: Dict[str, Any] = {
            "rounds": self.rounds,
            "clients": [
                {"id": c.client_id, "processor_class": c.processor_class,
                 "seconds_per_sample": c.seconds_per_sample, "power_watts": c.power_watts}
                for c in self.clients
            ],
            "clients_per_round": self.clients_per_round,
            "local_epochs": self.local_epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "dataset": asdict(self.dataset),
            "partition": {"scheme": self.partition.scheme},
            "strategy": {"type": self.strategy.type, "tau_seconds_by_class": self.strategy.tau_by_class},
            "seeds": asdict(self.seeds),
            "mode": self.mode,
            "evaluation": self.evaluation,
            "initial_parameters": self.initial_parameters,
        }
        if self.partition.alpha is not None:
            doc["partition"]["alpha"] = self.partition.alpha
        if self.strategy.min_successful_clients is not None:
            doc["strategy"]["min_successful_clients"] = self.strategy.min_successful_clients
        if self.round_timeout_s is not None:
            doc["round_timeout_s"] = self.round_timeout_s
        return doc

    def max_train_rows(self) -> int:
        """Upper bound of any shard's train split under an equal split."""
        per_shard = -(-self.dataset.n_samples // len(self.clients))
        return max(1, int(per_shard * TRAIN_FRACTION))

    def effective_round_timeout(self) -> float:
        """Wall-clock guard for one fit/evaluate request; never changes simulated results."""
        if self.round_timeout_s is not None:
            return self.round_timeout_s
        if self.partition.scheme == "iid":
            rows = self.max_train_rows()
        else:
            rows = self.dataset.n_samples
        slowest = max(c.seconds_per_sample for c in self.clients)
        expected = self.local_epochs * rows * slowest
        return max(ROUND_TIMEOUT_FLOOR_S, ROUND_TIMEOUT_FACTOR * expected)

    def with_values(self, **changes: Any) -> "ExperimentConfig":
        """Copy with changes, validated again."""
        updated = replace(self, **changes)
        validate_config(updated)
        return updated


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON, mode excluded so both modes share one hash."""
    doc = cfg.to_dict()
    doc.pop("mode", None)
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ----------------------
# Parsing helpers
# ----------------------

def _fail(path: str, message: str) -> ConfigValidationError:
    return ConfigValidationError(f"{path} : {message}")


def _expect_object(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise _fail(path, "objet JSON attendu.")
    return value


def _reject_unknown(doc: Mapping[str, Any], allowed: set, prefix: str) -> None:
    for key in sorted(set(doc) - allowed):
        raise _fail(f"{prefix}{key}", "clé inconnue.")


def _get(doc: Mapping[str, Any], key: str, default: Any, path: str, check: Callable[[Any], bool],
         expected: str) -> Any:
    value = doc.get(key, default)
    if not check(value):
        raise _fail(path, f"{expected} attendu (reçu {value!r}).")
    return value


def _parse_clients(raw: Any) -> Tuple[ClientProfile, ...]:
    if raw is None:
        return default_clients()
    if not isinstance(raw, list) or not raw:
        raise _fail("clients", "liste non vide attendue.")
    profiles = []
    seen = set()
    for index, item in enumerate(raw):
        path = f"clients[{index}]"
        entry = _expect_object(item, path)
        _reject_unknown(entry, CLIENT_KEYS, f"{path}.")
        client_id = _get(entry, "id", None, f"{path}.id", is_valid_client_id, "identifiant valide")
        if client_id in seen:
            raise _fail(f"{path}.id", f"identifiant en double {client_id!r}.")
        seen.add(client_id)
        processor_class = _get(entry, "processor_class", DEFAULT_PROCESSOR_CLASS, f"{path}.processor_class",
                               is_valid_processor_class, "classe de processeur")
        sps = _get(entry, "seconds_per_sample", DEFAULT_SECONDS_PER_SAMPLE, f"{path}.seconds_per_sample",
                   is_positive_float, "nombre > 0")
        power = _get(entry, "power_watts", DEFAULT_POWER_WATTS, f"{path}.power_watts",
                     is_positive_float, "nombre > 0")
        profiles.append(ClientProfile(client_id, processor_class, float(sps), float(power), index))
    return tuple(profiles)


def _parse_dataset(raw: Any, seeds_raw: Mapping[str, Any]) -> DatasetSpec:
    doc = _expect_object(raw if raw is not None else {}, "dataset")
    _reject_unknown(doc, DATASET_KEYS, "dataset.")
    spec = DatasetSpec(
        n_samples=_get(doc, "n_samples", DEFAULT_N_SAMPLES, "dataset.n_samples", is_positive_int, "entier >= 1"),
        n_features=_get(doc, "n_features", DEFAULT_N_FEATURES, "dataset.n_features", is_positive_int,
                        "entier >= 1"),
        n_classes=_get(doc, "n_classes", DEFAULT_N_CLASSES, "dataset.n_classes",
                       lambda v: is_positive_int(v) and v >= 2, "entier >= 2"),
        class_separation=float(_get(doc, "class_separation", DEFAULT_CLASS_SEPARATION,
                                    "dataset.class_separation", is_positive_float, "nombre > 0")),
        seed=_get(doc, "seed", seeds_raw.get("data", DEFAULT_DATA_SEED), "dataset.seed", is_non_negative_int,
                  "entier >= 0"),
    )
    try:
        spec.validate()
    except InvalidSpec as e:
        raise _fail("dataset", str(e)) from e
    return spec


def _parse_partition(raw: Any) -> PartitionConfig:
    doc = _expect_object(raw if raw is not None else {}, "partition")
    _reject_unknown(doc, PARTITION_KEYS, "partition.")
    scheme = _get(doc, "scheme", "iid", "partition.scheme", lambda v: v in PARTITION_SCHEMES,
                  " ou ".join(PARTITION_SCHEMES))
    alpha = doc.get("alpha")
    if scheme == "label_skew" and alpha is None:
        alpha = DEFAULT_LABEL_SKEW_ALPHA
    if alpha is not None:
        if not is_positive_float(alpha):
            raise _fail("partition.alpha", f"nombre > 0 attendu (reçu {alpha!r}).")
        alpha = float(alpha)
    return PartitionConfig(scheme, alpha)


def _parse_strategy(raw: Any) -> StrategyConfig:
    doc = _expect_object(raw if raw is not None else {}, "strategy")
    _reject_unknown(doc, STRATEGY_KEYS, "strategy.")
    kind = _get(doc, "type", "fedavg", "strategy.type", lambda v: v in STRATEGY_TYPES, " ou ".join(STRATEGY_TYPES))
    taus = _expect_object(doc.get("tau_seconds_by_class", {}), "strategy.tau_seconds_by_class")
    entries = []
    for name in sorted(taus):
        value = taus[name]
        if not is_non_negative_float(value):
            raise _fail(f"strategy.tau_seconds_by_class.{name}", f"nombre fini >= 0 attendu (reçu {value!r}).")
        entries.append((name, float(value)))
    min_clients = doc.get("min_successful_clients")
    if min_clients is not None and not is_positive_int(min_clients):
        raise _fail("strategy.min_successful_clients", f"entier >= 1 attendu (reçu {min_clients!r}).")
    return StrategyConfig(kind, tuple(entries), min_clients)


def _parse_seeds(raw: Any, data_seed: int) -> SeedsConfig:
    doc = _expect_object(raw if raw is not None else {}, "seeds")
    _reject_unknown(doc, SEEDS_KEYS, "seeds.")
    return SeedsConfig(
        model=_get(doc, "model", DEFAULT_MODEL_SEED, "seeds.model", is_non_negative_int, "entier >= 0"),
        sampling=_get(doc, "sampling", DEFAULT_SAMPLING_SEED, "seeds.sampling", is_non_negative_int, "entier >= 0"),
        data=_get(doc, "data", data_seed, "seeds.data", is_non_negative_int, "entier >= 0"),
    )


def validate_config(cfg: ExperimentConfig) -> None:
    """
    Cross-field invariants.

    Raises:
        ConfigValidationError: Avec le chemin du champ fautif.
    """
    if not is_non_negative_int(cfg.rounds):
        raise _fail("rounds", "entier >= 0 attendu.")
    if not cfg.clients:
        raise _fail("clients", "au moins un client est requis.")
    if not is_positive_int(cfg.clients_per_round) or cfg.clients_per_round > len(cfg.clients):
        raise _fail("clients_per_round", f"doit être entre 1 et {len(cfg.clients)} (reçu {cfg.clients_per_round}).")
    if not is_positive_int(cfg.local_epochs):
        raise _fail("local_epochs", "entier >= 1 attendu.")
    if not is_positive_float(cfg.learning_rate):
        raise _fail("learning_rate", "nombre > 0 attendu.")
    if not is_positive_int(cfg.batch_size):
        raise _fail("batch_size", "entier >= 1 attendu.")
    if len(cfg.clients) > cfg.dataset.n_samples:
        raise _fail("clients", f"{len(cfg.clients)} clients pour {cfg.dataset.n_samples} exemple(s).")
    if cfg.mode not in RUN_MODES:
        raise _fail("mode", f"{' ou '.join(RUN_MODES)} attendu (reçu {cfg.mode!r}).")
    if cfg.evaluation not in EVALUATION_KINDS:
        raise _fail("evaluation", f"{' ou '.join(EVALUATION_KINDS)} attendu (reçu {cfg.evaluation!r}).")
    if cfg.initial_parameters not in INITIAL_PARAMETER_SOURCES:
        raise _fail("initial_parameters",
                    f"{' ou '.join(INITIAL_PARAMETER_SOURCES)} attendu (reçu {cfg.initial_parameters!r}).")
    if cfg.round_timeout_s is not None and not is_positive_float(cfg.round_timeout_s):
        raise _fail("round_timeout_s", "nombre > 0 attendu.")
    min_clients = cfg.strategy.min_successful_clients
    if min_clients is not None and min_clients > cfg.clients_per_round:
        raise _fail("strategy.min_successful_clients",
                    f"ne peut dépasser clients_per_round ({cfg.clients_per_round}).")
    for name, tau in cfg.strategy.tau_seconds_by_class:
        if not (math.isfinite(tau) and tau >= 0):
            raise _fail(f"strategy.tau_seconds_by_class.{name}", "nombre fini >= 0 attendu.")
    if cfg.strategy.type == "deadline":
        taus = cfg.strategy.tau_by_class
        for index, client in enumerate(cfg.clients):
            if client.processor_class not in taus:
                raise _fail(f"strategy.tau_seconds_by_class.{client.processor_class}",
                            f"τ manquant pour la classe de clients[{index}].")


def load_config_dict(doc: Any) -> ExperimentConfig:
    root = _expect_object(doc, "<racine>")
    _reject_unknown(root, TOP_LEVEL_KEYS, "")
    seeds_raw = root.get("seeds") if isinstance(root.get("seeds"), dict) else {}
    dataset = _parse_dataset(root.get("dataset"), seeds_raw)
    clients = _parse_clients(root.get("clients"))
    cfg = ExperimentConfig(
        rounds=_get(root, "rounds", DEFAULT_ROUNDS, "rounds", is_non_negative_int, "entier >= 0"),
        clients=clients,
        clients_per_round=_get(root, "clients_per_round", len(clients), "clients_per_round", is_positive_int,
                               "entier >= 1"),
        local_epochs=_get(root, "local_epochs", DEFAULT_LOCAL_EPOCHS, "local_epochs", is_positive_int,
                          "entier >= 1"),
        learning_rate=float(_get(root, "learning_rate", DEFAULT_LEARNING_RATE, "learning_rate",
                                 is_positive_float, "nombre > 0")),
        batch_size=_get(root, "batch_size", DEFAULT_BATCH_SIZE, "batch_size", is_positive_int, "entier >= 1"),
        dataset=dataset,
        partition=_parse_partition(root.get("partition")),
        strategy=_parse_strategy(root.get("strategy")),
        seeds=_parse_seeds(root.get("seeds"), dataset.seed),
        mode=root.get("mode", "in_process"),
        evaluation=root.get("evaluation", "federated"),
        initial_parameters=root.get("initial_parameters", "seeded"),
        round_timeout_s=root.get("round_timeout_s"),
    )
    if cfg.round_timeout_s is not None and is_number(cfg.round_timeout_s):
        cfg = replace(cfg, round_timeout_s=float(cfg.round_timeout_s))
    validate_config(cfg)
    return cfg


def load_config(text: str) -> ExperimentConfig:
    """
    Parse and validate an experiment config JSON document; missing keys take their defaults.

    Raises:
        ConfigParseError: JSON invalide.
        ConfigValidationError: Valeur invalide, avec le chemin du champ.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"JSON invalide (ligne {e.lineno}, colonne {e.colno}) : {e.msg}.") from e
    return load_config_dict(doc)


def load_config_file(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigParseError(f"Lecture impossible de {path} : {e.strerror}.") from e
    return load_config(text)
