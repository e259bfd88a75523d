"""
Frames over a duplex byte channel: length:u32 BE · type_tag:u8 · payload.

The same code serves TCP sockets and the in-memory loopback used by tests and
in-process runs, so both transports behave identically.
"""
from __future__ import annotations

import logging
import socket
import struct
import threading
import time
from typing import Callable, Optional, Protocol, Tuple

from federation_manager.constants.protocol_tags import (
    HANDSHAKE_TIMEOUT_S,
    MAX_FRAME_BYTES,
    REASON_DUPLICATE_ID,
    REASON_PROTOCOL_VIOLATION,
)
from federation_manager.errors import (
    ConnectionClosed,
    DuplicateClientId,
    HandshakeRejected,
    HandshakeTimeout,
    MalformedPayload,
    OversizeMessage,
    ProtocolViolation,
    TruncatedFrame,
)
from federation_manager.models.message_models import (
    Disconnect,
    Hello,
    HelloAck,
    Message,
    decode_message,
)
from federation_manager.models.tensor_models import ConfigMap

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct(">I")
_TAG = struct.Struct(">B")


class ByteSource(Protocol):
    def read(self, count: int) -> bytes:
        """Return between 1 and count bytes, or b'' at end of stream."""


class DuplexChannel(ByteSource, Protocol):
    def write(self, data: bytes) -> None: ...

    def close(self) -> None: ...

    def set_timeout(self, seconds: Optional[float]) -> None: ...


# ----------------------
# Frames
# ----------------------

def write_frame(message: Message) -> bytes:
    """Serialize a message into one frame (deterministic)."""
    payload = message.encode_payload()
    length = 1 + len(payload)
    if length > MAX_FRAME_BYTES:
        raise OversizeMessage(f"Trame de {length} octets au-delà de la limite de {MAX_FRAME_BYTES}.")
    return _LENGTH.pack(length) + _TAG.pack(message.TYPE_TAG) + payload


def _read_exactly(source: ByteSource, count: int, at_boundary: bool) -> bytes:
    buffer = bytearray()
    while len(buffer) < count:
        chunk = source.read(count - len(buffer))
        if not chunk:
            if at_boundary and not buffer:
                raise ConnectionClosed("Connexion fermée par le pair.")
            raise TruncatedFrame(f"Flux interrompu : {len(buffer)}/{count} octet(s) reçus.")
        buffer.extend(chunk)
    return bytes(buffer)


def read_frame(source: ByteSource) -> Message:
    """
    Read exactly one frame and decode it.

    Blocks until the frame is complete; bytes after the frame stay unread.
    """
    header = _read_exactly(source, _LENGTH.size, at_boundary=True)
    (length,) = _LENGTH.unpack(header)
    if length == 0 or length > MAX_FRAME_BYTES:
        raise MalformedPayload(f"Longueur de trame invalide : {length}.")
    body = _read_exactly(source, length, at_boundary=False)
    return decode_message(body[0], body[1:])


def send_message(channel: DuplexChannel, message: Message) -> None:
    channel.write(write_frame(message))


# ----------------------
# Channels
# ----------------------

class BufferSource:
    """Replays a byte string, at most chunk_size bytes per read."""

    def __init__(self, data: bytes, chunk_size: Optional[int] = None) -> None:
        self._data = bytes(data)
        self._offset = 0
        self._chunk_size = chunk_size

    @property
    def remaining(self) -> bytes:
        return self._data[self._offset:]

    def read(self, count: int) -> bytes:
        if self._chunk_size is not None:
            count = min(count, self._chunk_size)
        chunk = self._data[self._offset:self._offset + count]
        self._offset += len(chunk)
        return chunk


class SocketChannel:
    """DuplexChannel over a connected TCP socket."""

    def __init__(self, sock: socket.socket) -> None:
        self.sock = sock
        self._closed = False

    def read(self, count: int) -> bytes:
        try:
            return self.sock.recv(count)
        except socket.timeout as e:
            raise TimeoutError("Délai de lecture dépassé.") from e
        except ConnectionResetError:
            return b""

    def write(self, data: bytes) -> None:
        self.sock.sendall(data)

    def set_timeout(self, seconds: Optional[float]) -> None:
        self.sock.settimeout(seconds)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    @property
    def peer(self) -> str:
        try:
            host, port = self.sock.getpeername()[:2]
            return f"{host}:{port}"
        except OSError:
            return "?"


class _Pipe:
    """One direction of the loopback: a buffer guarded by a condition."""

    def __init__(self) -> None:
        self.buffer = bytearray()
        self.closed = False
        self.cond = threading.Condition()


class LoopbackChannel:
    """In-memory DuplexChannel end; reads park on a condition until data or EOF."""

    def __init__(self, inbound: _Pipe, outbound: _Pipe) -> None:
        self._in = inbound
        self._out = outbound
        self._timeout: Optional[float] = None

    def read(self, count: int) -> bytes:
        deadline = None if self._timeout is None else time.monotonic() + self._timeout
        with self._in.cond:
            while not self._in.buffer and not self._in.closed:
                wait_for = None if deadline is None else deadline - time.monotonic()
                if wait_for is not None and wait_for <= 0:
                    raise TimeoutError("Délai de lecture dépassé.")
                self._in.cond.wait(wait_for)
            chunk = bytes(self._in.buffer[:count])
            del self._in.buffer[:count]
            return chunk

    def write(self, data: bytes) -> None:
        with self._out.cond:
            if self._out.closed:
                raise BrokenPipeError("Canal fermé.")
            self._out.buffer.extend(data)
            self._out.cond.notify_all()

    def set_timeout(self, seconds: Optional[float]) -> None:
        self._timeout = seconds

    def close(self) -> None:
        for pipe in (self._in, self._out):
            with pipe.cond:
                pipe.closed = True
                pipe.cond.notify_all()


def loopback_pair() -> Tuple[LoopbackChannel, LoopbackChannel]:
    """Two connected in-memory channel ends (server side, client side)."""
    a_to_b, b_to_a = _Pipe(), _Pipe()
    return LoopbackChannel(b_to_a, a_to_b), LoopbackChannel(a_to_b, b_to_a)


# ----------------------
# Handshake
# ----------------------

class _DeadlineSource:
    """ByteSource that gives every read only the time left until one deadline."""

    def __init__(self, channel: DuplexChannel, deadline: Optional[float]) -> None:
        self._channel = channel
        self._deadline = deadline

    def read(self, count: int) -> bytes:
        if self._deadline is not None:
            remaining = self._deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("Délai de lecture dépassé.")
            self._channel.set_timeout(remaining)
        return self._channel.read(count)


def _read_with_timeout(channel: DuplexChannel, timeout: Optional[float]) -> Message:
    """Read one frame; the timeout covers the whole frame, not each recv."""
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        return read_frame(_DeadlineSource(channel, deadline))
    except TimeoutError as e:
        raise HandshakeTimeout(f"Poignée de main non terminée après {timeout} s.") from e
    finally:
        channel.set_timeout(None)


def handshake_server(
    channel: DuplexChannel,
    timeout: Optional[float] = HANDSHAKE_TIMEOUT_S,
    admit: Optional[Callable[[str, ConfigMap], None]] = None,
) -> Tuple[str, ConfigMap]:
    """
    Read Hello, answer HelloAck, return (client_id, capabilities).

    admit runs between Hello and HelloAck; a DuplicateClientId it raises is
    answered with Disconnect(1) instead of the ack, then re-raised.
    """
    first = _read_with_timeout(channel, timeout)
    if not isinstance(first, Hello):
        _send_quietly(channel, Disconnect(REASON_PROTOCOL_VIOLATION))
        raise ProtocolViolation(f"Hello attendu, {type(first).__name__} reçu.")
    if admit is not None:
        try:
            admit(first.client_id, first.capabilities)
        except DuplicateClientId:
            _send_quietly(channel, Disconnect(REASON_DUPLICATE_ID))
            raise
    send_message(channel, HelloAck())
    logger.debug("Handshake done with %s", first.client_id)
    return first.client_id, first.capabilities


def handshake_client(
    channel: DuplexChannel,
    client_id: str,
    capabilities: Optional[ConfigMap] = None,
    timeout: Optional[float] = HANDSHAKE_TIMEOUT_S,
) -> None:
    """
    Send Hello and wait for HelloAck.

    Raises:
        HandshakeRejected: Le serveur a répondu Disconnect (motif dans .reason).
    """
    send_message(channel, Hello(client_id, capabilities or ConfigMap()))
    answer = _read_with_timeout(channel, timeout)
    if isinstance(answer, Disconnect):
        raise HandshakeRejected(f"Connexion refusée par le serveur (code {answer.reason}).", answer.reason)
    if not isinstance(answer, HelloAck):
        raise ProtocolViolation(f"HelloAck attendu, {type(answer).__name__} reçu.")


def _send_quietly(channel: DuplexChannel, message: Message) -> None:
    try:
        send_message(channel, message)
    except OSError:
        pass
