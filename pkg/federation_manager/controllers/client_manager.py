"""
Server-side handles on clients. The FL loop only sees ClientProxy, so an
in-process client and a TCP client go through the same code path.
"""
from __future__ import annotations

import logging
import threading
import time
from abc import ABC, abstractmethod
from typing import Callable, Dict, List, Optional

import numpy as np

from federation_manager.constants.protocol_tags import REASON_DONE
from federation_manager.errors import (
    ClientFailure,
    ConnectionClosed,
    DuplicateClientId,
    InsufficientClients,
    ProtocolError,
    ProtocolViolation,
)
from federation_manager.models.message_models import (
    RESPONSE_FOR,
    Disconnect,
    EvaluateIns,
    EvaluateRes,
    FitIns,
    FitRes,
    GetParametersIns,
    Message,
)
from federation_manager.models.tensor_models import ConfigMap, Parameters
from federation_manager.utils.framing import DuplexChannel, read_frame, send_message

logger = logging.getLogger(__name__)


class ClientProxy(ABC):
    """
    Server-side handle on one client. Requests are serialized: one outstanding
    request per client at a time.
    """

    def __init__(self, client_id: str, capabilities: Optional[ConfigMap] = None) -> None:
        self.client_id = client_id
        self.capabilities = capabilities or ConfigMap()
        self._lock = threading.Lock()

    @property
    def broken(self) -> bool:
        """True once the connection behind the proxy is unusable."""
        return False

    @abstractmethod
    def _exchange(self, message: Message, timeout: Optional[float]) -> Message: ...

    def request(self, message: Message, timeout: Optional[float] = None) -> Message:
        expected = RESPONSE_FOR[type(message)]
        with self._lock:
            response = self._exchange(message, timeout)
        if isinstance(response, Disconnect):
            raise ClientFailure(f"{self.client_id} s'est déconnecté (code {response.reason}).")
        if not isinstance(response, expected):
            raise ProtocolViolation(
                f"{self.client_id} a répondu {type(response).__name__} au lieu de {expected.__name__}."
            )
        return response

    def get_parameters(self, timeout: Optional[float] = None) -> Parameters:
        return self.request(GetParametersIns(), timeout).parameters

    def fit(self, ins: FitIns, timeout: Optional[float] = None) -> FitRes:
        return self.request(ins, timeout)

    def evaluate(self, ins: EvaluateIns, timeout: Optional[float] = None) -> EvaluateRes:
        return self.request(ins, timeout)

    def hold(self) -> None:
        """Block requests until release(); used while the handshake finishes."""
        self._lock.acquire()

    def release(self) -> None:
        self._lock.release()

    def disconnect(self, reason: int = REASON_DONE) -> None:
        """Tell the client the session is over; a no-op for in-process clients."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.client_id!r})"


class InProcessClientProxy(ClientProxy):
    """Calls the client's message handler directly, in the dispatching thread."""

    def __init__(self, client_id: str, handler: Callable[[Message], Message],
                 capabilities: Optional[ConfigMap] = None) -> None:
        super().__init__(client_id, capabilities)
        self._handler = handler

    def _exchange(self, message: Message, timeout: Optional[float]) -> Message:
        try:
            return self._handler(message)
        except Exception as e:
            raise ClientFailure(f"{self.client_id} : {e}") from e


class StreamClientProxy(ClientProxy):
    """Frames over a DuplexChannel (TCP socket or in-memory loopback)."""

    def __init__(self, client_id: str, channel: DuplexChannel, capabilities: Optional[ConfigMap] = None) -> None:
        super().__init__(client_id, capabilities)
        self.channel = channel
        self._broken = False

    @property
    def broken(self) -> bool:
        return self._broken

    def _exchange(self, message: Message, timeout: Optional[float]) -> Message:
        if self._broken:
            raise ClientFailure(f"Connexion de {self.client_id} déjà perdue.")
        try:
            self.channel.set_timeout(timeout)
            send_message(self.channel, message)
            return read_frame(self.channel)
        except TimeoutError as e:
            self._mark_broken()
            raise ClientFailure(f"{self.client_id} n'a pas répondu dans les {timeout} s.") from e
        except (ConnectionClosed, ProtocolError, OSError) as e:
            self._mark_broken()
            raise ClientFailure(f"Connexion perdue avec {self.client_id} : {e}") from e

    def _mark_broken(self) -> None:
        self._broken = True
        self.channel.close()

    def disconnect(self, reason: int = REASON_DONE) -> None:
        if self._broken:
            return
        with self._lock:
            try:
                send_message(self.channel, Disconnect(reason))
            except OSError:
                pass
            self._broken = True
            self.channel.close()


def sample_from(clients: List[ClientProxy], n: int, seed: int) -> List[ClientProxy]:
    """Seeded uniform draw of n clients out of a list sorted by client_id."""
    if n > len(clients):
        raise InsufficientClients(f"{n} client(s) demandé(s), {len(clients)} disponible(s).")
    if n < 0:
        raise InsufficientClients(f"Nombre de clients invalide : {n}.")
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(clients), size=n, replace=False).tolist())
    return [clients[i] for i in chosen]


class ClientManager:
    """
    Registre des clients connectés.

    Safe for concurrent registration; every read returns a snapshot, so a client
    registered during a round only becomes eligible in the next one.
    """

    def __init__(self) -> None:
        self._clients: Dict[str, ClientProxy] = {}
        self._cond = threading.Condition()

    def register_client(self, proxy: ClientProxy) -> None:
        with self._cond:
            if proxy.client_id in self._clients:
                raise DuplicateClientId(f"Client déjà enregistré : {proxy.client_id!r}.")
            self._clients[proxy.client_id] = proxy
            self._cond.notify_all()
        logger.info("Client %s registered", proxy.client_id)

    def unregister(self, client_id: str) -> None:
        with self._cond:
            if self._clients.pop(client_id, None) is not None:
                logger.warning("Client %s unregistered", client_id)
            self._cond.notify_all()

    def num_available(self) -> int:
        with self._cond:
            return len(self._clients)

    def all_clients(self) -> List[ClientProxy]:
        """Snapshot sorted by client_id."""
        with self._cond:
            return [self._clients[cid] for cid in sorted(self._clients)]

    def get(self, client_id: str) -> Optional[ClientProxy]:
        with self._cond:
            return self._clients.get(client_id)

    def wait_for(self, n: int, timeout: Optional[float] = None) -> bool:
        """Block until at least n clients are registered; False on timeout."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while len(self._clients) < n:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return False
                self._cond.wait(remaining)
            return True

    def sample_clients(self, n: int, seed: int) -> List[ClientProxy]:
        """
        n distinct clients, drawn uniformly with a seeded generator over the
        ids sorted ascending; returned sorted by id.

        Raises:
            InsufficientClients: Si n dépasse le nombre de clients disponibles.
        """
        return sample_from(self.all_clients(), n, seed)

    def disconnect_all(self, reason: int = REASON_DONE) -> None:
        for proxy in self.all_clients():
            proxy.disconnect(reason)
