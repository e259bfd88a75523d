from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from federation_manager.constants.config_keys import TRAIN_FRACTION
from federation_manager.errors import InvalidSpec, MalformedEncoding, ShapeMismatch, TooManyShards
from federation_manager.models.tensor_models import ConfigMap, Parameters, Tensor
from federation_manager.utils.codec import encode_config, encode_parameters, split_config_and_parameters
from federation_manager.utils.seeding import make_rng

LABEL_SKEW_ATTEMPTS = 100
MIN_SHARD_SIZE = 2


@dataclass(frozen=True)
class DatasetSpec:
    """
    Synthetic feature-classification task standing in for frozen base-model outputs.

    Attributes:
        n_samples: Total rows.
        n_features: Feature dimension d.
        n_classes: Number of classes k.
        class_separation: Radius of the sphere holding the class centers.
        seed: Data seed.
    """
    n_samples: int
    n_features: int
    n_classes: int
    class_separation: float
    seed: int = 0

    def validate(self) -> None:
        if self.n_features < 1:
            raise InvalidSpec("n_features doit être >= 1.")
        if self.n_classes < 2:
            raise InvalidSpec("n_classes doit être >= 2.")
        if self.n_samples < self.n_classes:
            raise InvalidSpec("n_samples doit être >= n_classes.")
        if not self.class_separation > 0:
            raise InvalidSpec("class_separation doit être > 0.")


def generate_dataset(spec: DatasetSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gaussian blobs: k centers on the sphere of radius class_separation, unit
    variance around each center, balanced classes (counts differ by at most 1).

    Returns:
        (features [n, d] float64, labels [n] int64), deterministic by seed.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    directions = rng.normal(size=(spec.n_classes, spec.n_features))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    # a zero draw is practically impossible, but d=1 can yield tiny norms
    norms[norms == 0] = 1.0
    centers = directions / norms * spec.class_separation
    labels = rng.permutation(np.arange(spec.n_samples) % spec.n_classes).astype(np.int64)
    features = centers[labels] + rng.normal(size=(spec.n_samples, spec.n_features))
    return features, labels


@dataclass(frozen=True, eq=False)
class Shard:
    """
    One client's local data. Rows [0, train_count) are the train split, the rest the test split.

    Attributes:
        features: [n, d] float64.
        labels: [n] int64 in [0, n_classes).
        train_count: Size of the train split.
        n_classes: Number of classes of the task (a shard may miss some).
    """
    features: np.ndarray
    labels: np.ndarray
    train_count: int
    n_classes: int

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels).astype(np.int64)
        if features.ndim != 2 or labels.ndim != 1 or features.shape[0] != labels.shape[0]:
            raise ShapeMismatch(f"{features.shape[0]} ligne(s) pour {labels.shape[0]} étiquette(s).")
        if not 0 <= self.train_count <= labels.shape[0]:
            raise ShapeMismatch(f"train_count={self.train_count} hors de [0, {labels.shape[0]}].")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def train_features(self) -> np.ndarray:
        return self.features[:self.train_count]

    @property
    def train_labels(self) -> np.ndarray:
        return self.labels[:self.train_count]

    @property
    def test_features(self) -> np.ndarray:
        return self.features[self.train_count:]

    @property
    def test_labels(self) -> np.ndarray:
        return self.labels[self.train_count:]

    @property
    def test_count(self) -> int:
        return self.size - self.train_count


def _train_count(size: int) -> int:
    """80/20 split that keeps at least one row on each side when possible."""
    if size < 2:
        return size
    return min(size - 1, max(1, int(size * TRAIN_FRACTION)))


def _make_shard(features: np.ndarray, labels: np.ndarray, rows: np.ndarray, n_classes: int) -> Shard:
    return Shard(features[rows], labels[rows], _train_count(rows.shape[0]), n_classes)


def _label_skew_rows(labels: np.ndarray, n_shards: int, alpha: float,
                     rng: np.random.Generator) -> Optional[List[np.ndarray]]:
    """One Dirichlet draw per class; None when some shard ends up too small."""
    per_shard: List[List[np.ndarray]] = [[] for _ in range(n_shards)]
    for cls in np.unique(labels):
        rows = rng.permutation(np.flatnonzero(labels == cls))
        proportions = rng.dirichlet(np.full(n_shards, alpha))
        cuts = (np.cumsum(proportions)[:-1] * rows.shape[0]).astype(int)
        for shard_index, part in enumerate(np.split(rows, cuts)):
            per_shard[shard_index].append(part)
    merged = [np.concatenate(parts) for parts in per_shard]
    if min(m.shape[0] for m in merged) < MIN_SHARD_SIZE:
        return None
    return [rng.permutation(m) for m in merged]


def partition(
    features: np.ndarray,
    labels: np.ndarray,
    n_shards: int,
    scheme: str = "iid",
    seed: int = 0,
    alpha: Optional[float] = None,
    n_classes: Optional[int] = None,
) -> List[Shard]:
    """
    Split a dataset into client shards, each with an 80/20 train/test split.

    Schemes:
        iid: seeded shuffle, then contiguous equal split (sizes differ by at most 1).
        label_skew: per-class proportions drawn from a symmetric Dirichlet(alpha).
    """
    n_samples = int(labels.shape[0])
    classes = int(n_classes if n_classes is not None else labels.max() + 1)
    if n_shards < 1:
        raise TooManyShards("Il faut au moins un shard.")
    if n_shards > n_samples:
        raise TooManyShards(f"{n_shards} shards pour {n_samples} exemple(s).")
    rng = make_rng(seed, "partition", scheme)

    if scheme == "iid":
        order = rng.permutation(n_samples)
        return [_make_shard(features, labels, rows, classes) for rows in np.array_split(order, n_shards)]

    if scheme == "label_skew":
        if alpha is None or not alpha > 0:
            raise InvalidSpec("label_skew exige alpha > 0.")
        if n_shards * MIN_SHARD_SIZE > n_samples:
            raise TooManyShards(f"{n_shards} shards de {MIN_SHARD_SIZE} exemples minimum pour {n_samples}.")
        for _ in range(LABEL_SKEW_ATTEMPTS):
            shard_rows = _label_skew_rows(labels, n_shards, alpha, rng)
            if shard_rows is not None:
                return [_make_shard(features, labels, rows, classes) for rows in shard_rows]
        raise TooManyShards(f"Impossible de répartir les données en {n_shards} shards non vides (alpha={alpha}).")

    raise InvalidSpec(f"Schéma de partition inconnu : {scheme!r}.")


# ----------------------
# Shard files
# ----------------------

def encode_shard(shard: Shard) -> bytes:
    """encode_config({train_count, n_classes}) · encode_parameters([features, labels])."""
    header = ConfigMap({"train_count": shard.train_count, "n_classes": shard.n_classes})
    body = Parameters([Tensor.from_array(shard.features), Tensor.from_array(shard.labels.astype(np.float64))])
    return encode_config(header) + encode_parameters(body)


def decode_shard(data: bytes) -> Shard:
    header, body = split_config_and_parameters(data)
    if len(body) != 2 or len(body[0].shape) != 2 or len(body[1].shape) != 1:
        raise MalformedEncoding("Un shard contient exactement features [n, d] et labels [n].")
    train_count = header.get("train_count")
    if not isinstance(train_count, int) or isinstance(train_count, bool):
        raise MalformedEncoding("Entrée 'train_count' manquante ou non entière.")
    labels = body[1].as_array()
    if np.any(labels != np.round(labels)):
        raise MalformedEncoding("Les étiquettes doivent être entières.")
    n_classes = header.get("n_classes")
    if not isinstance(n_classes, int) or isinstance(n_classes, bool):
        n_classes = int(labels.max()) + 1 if labels.size else 2
    return Shard(body[0].as_array(), labels.astype(np.int64), train_count, n_classes)


def save_shard(path: str, shard: Shard) -> None:
    with open(path, "wb") as f:
        f.write(encode_shard(shard))


def load_shard(path: str) -> Shard:
    with open(path, "rb") as f:
        return decode_shard(f.read())
