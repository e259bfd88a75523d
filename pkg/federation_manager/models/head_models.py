from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from federation_manager.constants.config_keys import INIT_WEIGHT_SCALE
from federation_manager.errors import EmptyShard, LabelOutOfRange, ShapeMismatch
from federation_manager.models.tensor_models import Parameters, Tensor


@dataclass(frozen=True, eq=False)
class HeadModel:
    """
    Trainable classifier on top of frozen features: softmax(X·W + b).

    Attributes:
        W (np.ndarray): Weights, shape [d, k].
        b (np.ndarray): Biases, shape [k].
    """
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if W.ndim != 2 or b.ndim != 1 or W.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"Formes incompatibles : W{list(W.shape)}, b{list(b.shape)}.")
        if W.shape[0] < 1 or W.shape[1] < 2:
            raise ShapeMismatch(f"Il faut d >= 1 et k >= 2 (reçu d={W.shape[0]}, k={W.shape[1]}).")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def n_features(self) -> int:
        return int(self.W.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.W.shape[1])

    def to_parameters(self) -> Parameters:
        """Parameters [W, b], in that order."""
        return Parameters([Tensor.from_array(self.W), Tensor.from_array(self.b)])

    @classmethod
    def from_parameters(cls, parameters: Parameters) -> "HeadModel":
        if len(parameters) != 2:
            raise ShapeMismatch(f"Deux tenseurs attendus (W, b), {len(parameters)} reçu(s).")
        return cls(parameters[0].as_array(), parameters[1].as_array())


def init_head(n_features: int, n_classes: int, seed: int) -> HeadModel:
    """Seeded uniform(-0.05, 0.05) weights, zero biases."""
    rng = np.random.default_rng(seed)
    W = rng.uniform(-INIT_WEIGHT_SCALE, INIT_WEIGHT_SCALE, size=(n_features, n_classes))
    return HeadModel(W, np.zeros(n_classes))


def _check_inputs(W: np.ndarray, b: np.ndarray, X: np.ndarray) -> None:
    if W.ndim != 2 or b.ndim != 1 or b.shape[0] != W.shape[1]:
        raise ShapeMismatch(f"Formes incompatibles : W{list(W.shape)}, b{list(b.shape)}.")
    if X.ndim != 2 or X.shape[1] != W.shape[0]:
        raise ShapeMismatch(f"X{list(X.shape)} incompatible avec W{list(W.shape)}.")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def head_forward(W: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise softmax(X·W + b), stabilized by max-subtraction."""
    W, b, X = np.asarray(W, np.float64), np.asarray(b, np.float64), np.asarray(X, np.float64)
    _check_inputs(W, b, X)
    logits = X @ W + b
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _check_labels(y: np.ndarray, n_rows: int, n_classes: int) -> np.ndarray:
    labels = np.asarray(y)
    if labels.ndim != 1 or labels.shape[0] != n_rows:
        raise ShapeMismatch(f"{labels.shape[0] if labels.ndim else 0} étiquette(s) pour {n_rows} ligne(s).")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelOutOfRange(f"Étiquettes attendues dans [0, {n_classes}).")
    return labels.astype(np.int64)


def head_loss_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean cross-entropy and closed-form gradients.

    gradW = Xᵀ(P − Y)/n, gradb = column mean of (P − Y).
    """
    W, b, X = np.asarray(W, np.float64), np.asarray(b, np.float64), np.asarray(X, np.float64)
    _check_inputs(W, b, X)
    n = X.shape[0]
    if n == 0:
        raise EmptyShard("Aucune ligne pour calculer la perte.")
    labels = _check_labels(y, n, W.shape[1])
    log_p = _log_softmax(X @ W + b)
    rows = np.arange(n)
    loss = float(-log_p[rows, labels].mean())
    delta = np.exp(log_p)
    delta[rows, labels] -= 1.0
    grad_W = X.T @ delta / n
    grad_b = delta.mean(axis=0)
    return loss, grad_W, grad_b


def head_accuracy(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Top-1 accuracy."""
    W, b, X = np.asarray(W, np.float64), np.asarray(b, np.float64), np.asarray(X, np.float64)
    _check_inputs(W, b, X)
    if X.shape[0] == 0:
        raise EmptyShard("Aucune ligne pour calculer la précision.")
    labels = _check_labels(y, X.shape[0], W.shape[1])
    predictions = np.argmax(X @ W + b, axis=1)
    return float(np.mean(predictions == labels))


# ----------------------
# Local SGD
# ----------------------

@dataclass(frozen=True, eq=False)
class TrainingOutcome:
    model: HeadModel
    sample_visits: int
    stopped_early: bool


def _batches(order: np.ndarray, batch_size: int) -> Iterator[np.ndarray]:
    for start in range(0, order.shape[0], batch_size):
        yield order[start:start + batch_size]


def train_local(
    model: HeadModel,
    X: np.ndarray,
    y: np.ndarray,
    epochs: int,
    lr: float,
    batch_size: int,
    rng: np.random.Generator,
    admit_batch: Optional[Callable[[int], bool]] = None,
) -> TrainingOutcome:
    """
    Mini-batch SGD over (X, y) for a number of epochs.

    Each epoch visits the rows in an rng-shuffled order; the last batch may be
    short. admit_batch(batch_len) is asked before every batch: returning False
    stops training before that batch.
    """
    if batch_size < 1:
        raise ValueError("batch_size doit être >= 1.")
    if lr < 0:
        raise ValueError("Le taux d'apprentissage doit être positif.")
    n = X.shape[0]
    if n == 0:
        raise EmptyShard("Aucun exemple d'entraînement.")
    W, b = model.W.copy(), model.b.copy()
    visits = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for idx in _batches(order, batch_size):
            if admit_batch is not None and not admit_batch(idx.shape[0]):
                return TrainingOutcome(HeadModel(W, b), visits, True)
            _, grad_W, grad_b = head_loss_grad(W, b, X[idx], y[idx])
            W -= lr * grad_W
            b -= lr * grad_b
            visits += idx.shape[0]
    return TrainingOutcome(HeadModel(W, b), visits, False)


def sgd_epoch(model: HeadModel, shard, lr: float, batch_size: int, rng: np.random.Generator) -> HeadModel:
    """One pass over the shard's train split."""
    return train_local(model, shard.train_features, shard.train_labels, 1, lr, batch_size, rng).model
