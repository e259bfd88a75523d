"""
TCP front door of the server: accepts connections, runs the handshake and
registers one StreamClientProxy per client.
"""
from __future__ import annotations

import logging
import socket
import threading
from typing import List, Optional, Tuple

from federation_manager.constants.protocol_tags import (
    HANDSHAKE_TIMEOUT_S,
    REASON_SERVER_SHUTDOWN,
)
from federation_manager.controllers.client_manager import ClientManager, StreamClientProxy
from federation_manager.errors import DuplicateClientId, ProtocolError
from federation_manager.models.tensor_models import ConfigMap
from federation_manager.utils.framing import SocketChannel, handshake_server

logger = logging.getLogger(__name__)

ACCEPT_POLL_S = 0.2


class TcpFederationServer:
    """
    Serveur TCP : une connexion par client, poignée de main puis enregistrement.

    Args:
        bind: (host, port); port 0 picks a free port, see `address`.
        client_manager: Registre où enregistrer les clients.
        handshake_timeout: Délai maximal de la poignée de main.
    """

    def __init__(self, bind: Tuple[str, int], client_manager: ClientManager,
                 handshake_timeout: float = HANDSHAKE_TIMEOUT_S) -> None:
        self.bind = bind
        self.client_manager = client_manager
        self.handshake_timeout = handshake_timeout
        self._sock: Optional[socket.socket] = None
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []

    @property
    def address(self) -> Tuple[str, int]:
        if self._sock is None:
            return self.bind
        host, port = self._sock.getsockname()[:2]
        return host, port

    def start(self) -> "TcpFederationServer":
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(self.bind)
        sock.listen()
        sock.settimeout(ACCEPT_POLL_S)
        self._sock = sock
        thread = threading.Thread(target=self._accept_loop, name="fl-accept", daemon=True)
        thread.start()
        self._threads.append(thread)
        logger.info("Listening on %s:%d", *self.address)
        return self

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            worker = threading.Thread(target=self._register, args=(SocketChannel(conn),),
                                      name="fl-handshake", daemon=True)
            worker.start()

    def _register(self, channel: SocketChannel) -> None:
        held: List[StreamClientProxy] = []

        def admit(client_id: str, capabilities: ConfigMap) -> None:
            # registered before HelloAck, held so no request overtakes the ack
            proxy = StreamClientProxy(client_id, channel, capabilities)
            proxy.hold()
            held.append(proxy)
            self.client_manager.register_client(proxy)

        try:
            handshake_server(channel, self.handshake_timeout, admit=admit)
        except DuplicateClientId as e:
            logger.warning("%s", e)
            channel.close()
        except (ProtocolError, OSError) as e:
            logger.warning("Handshake with %s failed: %s", channel.peer, e)
            for proxy in held:
                if self.client_manager.get(proxy.client_id) is proxy:
                    self.client_manager.unregister(proxy.client_id)
            channel.close()
        finally:
            for proxy in held:
                proxy.release()

    def shutdown(self) -> None:
        """Stop accepting, then send Disconnect(3) to every registered client."""
        self._stop.set()
        if self._sock is not None:
            self._sock.close()
        for thread in self._threads:
            thread.join(timeout=2 * ACCEPT_POLL_S + 1)
        self.client_manager.disconnect_all(REASON_SERVER_SHUTDOWN)
        logger.info("Server stopped")

    def __enter__(self) -> "TcpFederationServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()
