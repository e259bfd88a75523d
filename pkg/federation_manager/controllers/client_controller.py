"""
Client side: get_parameters / fit / evaluate over a head model, and the
message loop that answers server instructions on a channel.
"""
from __future__ import annotations

import logging
import socket
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from federation_manager.constants.config_keys import (
    FIT_REQUIRED_KEYS,
    KEY_ACCURACY,
    KEY_BATCH_SIZE,
    KEY_COMPLETED_EPOCHS,
    KEY_FAILED,
    KEY_LEARNING_RATE,
    KEY_LOCAL_EPOCHS,
    KEY_SEED,
    KEY_TRAIN_LOSS,
)
from federation_manager.constants.protocol_tags import (
    DISCONNECT_REASON_LABELS,
    REASON_PROTOCOL_VIOLATION,
)
from federation_manager.errors import (
    ConnectionClosed,
    FederationError,
    MissingConfigKey,
    ProtocolViolation,
    ShapeMismatch,
)
from federation_manager.models.dataset_models import Shard
from federation_manager.models.head_models import (
    HeadModel,
    head_accuracy,
    head_loss_grad,
    init_head,
    train_local,
)
from federation_manager.models.message_models import (
    Disconnect,
    EvaluateIns,
    EvaluateRes,
    FitIns,
    FitRes,
    GetParametersIns,
    GetParametersRes,
    Message,
)
from federation_manager.models.tensor_models import ConfigMap, Parameters
from federation_manager.utils.framing import (
    DuplexChannel,
    SocketChannel,
    handshake_client,
    read_frame,
    send_message,
)
from federation_manager.utils.validators import parse_bind_address

logger = logging.getLogger(__name__)

CONNECT_RETRY_DELAY_S = 0.1


@dataclass(frozen=True)
class FitResult:
    """
    Outcome of one local fit.

    Attributes:
        parameters (Parameters): Paramètres après entraînement local.
        num_examples (int): Visites d'exemples du split d'entraînement effectuées.
        completed_epochs (float): Époques accomplies (fractionnaires si coupure).
        metrics (ConfigMap): completed_epochs, train_loss, failed éventuel.
    """
    parameters: Parameters
    num_examples: int
    completed_epochs: float
    metrics: ConfigMap = field(default_factory=ConfigMap)

    @property
    def failed(self) -> bool:
        return self.metrics.get(KEY_FAILED) is True

    def to_message(self) -> FitRes:
        return FitRes(self.parameters, self.num_examples, self.metrics)


@dataclass(frozen=True)
class EvaluateResult:
    loss: float
    num_examples: int
    metrics: ConfigMap

    def to_message(self) -> EvaluateRes:
        return EvaluateRes(self.loss, self.num_examples, self.metrics)


def _require(config: ConfigMap, key: str):
    if key not in config:
        raise MissingConfigKey(f"Clé de configuration manquante : {key!r}.")
    return config[key]


class FederatedClient:
    """
    Client FL : un modèle de tête entraînable sur un shard local.

    The model starts from a seeded init so get_parameters before any fit is
    reproducible.
    """

    def __init__(self, shard: Shard, init_seed: int = 0) -> None:
        self.shard = shard
        self.model = init_head(shard.n_features, shard.n_classes, init_seed)

    def _load(self, parameters: Parameters) -> HeadModel:
        model = HeadModel.from_parameters(parameters)
        if model.n_features != self.shard.n_features or model.n_classes != self.shard.n_classes:
            raise ShapeMismatch(
                f"Modèle [{model.n_features}, {model.n_classes}] incompatible avec le shard "
                f"[{self.shard.n_features}, {self.shard.n_classes}]."
            )
        return model

    def get_parameters(self) -> Parameters:
        return self.model.to_parameters()

    def fit(
        self,
        parameters: Parameters,
        config: ConfigMap,
        admit_batch: Optional[Callable[[int], bool]] = None,
    ) -> FitResult:
        """
        Load the global parameters, run local_epochs of SGD on the train split.

        admit_batch is the cutoff hook used by the hardware simulation.
        """
        for key in FIT_REQUIRED_KEYS:
            _require(config, key)
        epochs = int(config[KEY_LOCAL_EPOCHS])
        model = self._load(parameters)
        n_train = self.shard.train_count

        if epochs <= 0:
            metrics = ConfigMap({KEY_FAILED: True, KEY_COMPLETED_EPOCHS: 0.0})
            return FitResult(parameters, 0, 0.0, metrics)

        rng = np.random.default_rng(int(config[KEY_SEED]))
        outcome = train_local(
            model,
            self.shard.train_features,
            self.shard.train_labels,
            epochs,
            float(config[KEY_LEARNING_RATE]),
            int(config[KEY_BATCH_SIZE]),
            rng,
            admit_batch,
        )
        self.model = outcome.model
        completed = outcome.sample_visits / n_train
        train_loss, _, _ = head_loss_grad(outcome.model.W, outcome.model.b,
                                          self.shard.train_features, self.shard.train_labels)
        entries = {KEY_COMPLETED_EPOCHS: float(completed), KEY_TRAIN_LOSS: float(train_loss)}
        if outcome.sample_visits == 0:
            entries[KEY_FAILED] = True
        return FitResult(outcome.model.to_parameters(), outcome.sample_visits, float(completed), ConfigMap(entries))

    def evaluate(self, parameters: Parameters, config: Optional[ConfigMap] = None) -> EvaluateResult:
        """
        Loss and top-1 accuracy on the test split; the local model is left untouched.

        An empty test split answers num_examples=0, which the server leaves out.
        """
        model = self._load(parameters)
        X, y = self.shard.test_features, self.shard.test_labels
        if X.shape[0] == 0:
            return EvaluateResult(0.0, 0, ConfigMap({KEY_ACCURACY: 0.0, KEY_FAILED: True}))
        loss, _, _ = head_loss_grad(model.W, model.b, X, y)
        accuracy = head_accuracy(model.W, model.b, X, y)
        return EvaluateResult(float(loss), int(X.shape[0]), ConfigMap({KEY_ACCURACY: accuracy}))

    def handle(self, message: Message) -> Message:
        """Answer one instruction with its matching response."""
        if isinstance(message, GetParametersIns):
            return GetParametersRes(self.get_parameters())
        if isinstance(message, FitIns):
            try:
                return self.fit(message.parameters, message.config).to_message()
            except (MissingConfigKey, ShapeMismatch, ValueError) as e:
                logger.warning("fit rejected: %s", e)
                return failure_response(message)
        if isinstance(message, EvaluateIns):
            return self.evaluate(message.parameters, message.config).to_message()
        raise ProtocolViolation(f"Instruction inattendue : {type(message).__name__}.")


# ----------------------
# Message loop
# ----------------------

def failure_response(message: Message) -> Message:
    """
    The "could not do it" answer to an instruction, as the server reads it:
    a failed FitRes or an EvaluateRes with no examples.
    """
    if isinstance(message, FitIns):
        return FitRes(message.parameters, 0, ConfigMap({KEY_FAILED: True, KEY_COMPLETED_EPOCHS: 0.0}))
    if isinstance(message, EvaluateIns):
        return EvaluateRes(0.0, 0, ConfigMap({KEY_FAILED: True}))
    raise ProtocolViolation(f"Pas de réponse d'échec pour {type(message).__name__}.")


def run_client_loop(
    channel: DuplexChannel,
    handler: Callable[[Message], Message],
    client_id: str,
    capabilities: Optional[ConfigMap] = None,
) -> int:
    """
    Handshake, then answer each instruction with exactly one response.

    Returns:
        int: Code de la déconnexion reçue (0 si le serveur ferme simplement).

    Raises:
        ProtocolViolation: Message inattendu (le serveur reçoit Disconnect(2)).
    """
    handshake_client(channel, client_id, capabilities)
    logger.info("%s connected", client_id)
    while True:
        try:
            message = read_frame(channel)
        except ConnectionClosed:
            logger.info("%s: server closed the connection", client_id)
            return 0
        if isinstance(message, Disconnect):
            label = DISCONNECT_REASON_LABELS.get(message.reason, str(message.reason))
            logger.info("%s: disconnected by server (%s)", client_id, label)
            return message.reason
        if not isinstance(message, (GetParametersIns, FitIns, EvaluateIns)):
            try:
                send_message(channel, Disconnect(REASON_PROTOCOL_VIOLATION))
            except OSError:
                pass
            raise ProtocolViolation(f"Message inattendu côté client : {type(message).__name__}.")
        try:
            response = handler(message)
        except (FederationError, ValueError) as e:
            if isinstance(message, GetParametersIns):
                raise
            logger.warning("%s: %s failed: %s", client_id, type(message).__name__, e)
            response = failure_response(message)
        send_message(channel, response)


def connect(address: str, timeout: float = 10.0) -> SocketChannel:
    """Open a TCP connection, retrying until the server listens or timeout elapses."""
    host, port = parse_bind_address(address)
    deadline = time.monotonic() + timeout
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return SocketChannel(sock)
        except OSError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(CONNECT_RETRY_DELAY_S)


def start_client(
    address: str,
    handler: Callable[[Message], Message],
    client_id: str,
    capabilities: Optional[ConfigMap] = None,
    connect_timeout: float = 10.0,
) -> int:
    """Connect to a server and serve it until Disconnect or EOF."""
    channel = connect(address, connect_timeout)
    try:
        return run_client_loop(channel, handler, client_id, capabilities)
    except FederationError:
        logger.exception("%s: session aborted", client_id)
        raise
    finally:
        channel.close()
