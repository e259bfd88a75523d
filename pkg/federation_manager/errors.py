"""
Exceptions raised across the federation manager.

Every typed error named by an operation derives from FederationError, so the CLI
can catch one base class and print a readable message.
"""


class FederationError(Exception):
    """Base class for all errors raised by this package."""


# ----------------------
# Tensor core / codec
# ----------------------

class ShapeMismatch(FederationError, ValueError):
    """Tensor data length, parameter shapes or matrix dimensions disagree."""


class NonFiniteValue(FederationError, ValueError):
    """A tensor element is NaN or infinite."""


class DecodeError(FederationError, ValueError):
    """Base class for binary decoding failures."""


class TruncatedInput(DecodeError):
    """The byte sequence ends before the encoding is complete."""


class MalformedEncoding(DecodeError):
    """The byte sequence is structurally invalid."""


class DuplicateKey(DecodeError):
    """A ConfigMap encoding repeats a key."""


class UnknownValueTag(DecodeError):
    """A ConfigMap value carries an unknown type tag."""


# ----------------------
# Protocol
# ----------------------

class ProtocolError(FederationError):
    """Base class for wire protocol failures."""


class InvalidMessage(ProtocolError, ValueError):
    """A message violates its own invariants (e.g. failed FitRes without flag)."""


class OversizeMessage(ProtocolError, ValueError):
    """A frame would exceed the 64 MiB protocol cap."""


class ConnectionClosed(ProtocolError, ConnectionError):
    """The peer closed the stream cleanly at a frame boundary."""


class TruncatedFrame(ProtocolError, ConnectionError):
    """The stream ended in the middle of a frame."""


class UnknownTypeTag(ProtocolError, ValueError):
    """A frame carries a type tag outside the message table."""


class MalformedPayload(ProtocolError, ValueError):
    """A frame payload does not decode into its message type."""


class ProtocolViolation(ProtocolError):
    """A peer sent a message that is not allowed in the current state."""


class HandshakeTimeout(ProtocolError, TimeoutError):
    """The Hello / HelloAck exchange did not finish in time."""


class HandshakeRejected(ProtocolViolation):
    """The server answered Hello with Disconnect instead of HelloAck."""

    def __init__(self, message: str, reason: int) -> None:
        super().__init__(message)
        self.reason = reason


# ----------------------
# Server
# ----------------------

class DuplicateClientId(FederationError, ValueError):
    """A client id is already registered."""


class InsufficientClients(FederationError, ValueError):
    """Fewer clients are available than requested."""


class RoundFailed(FederationError, RuntimeError):
    """A round collected fewer successful results than the strategy requires."""


class ClientFailure(FederationError, RuntimeError):
    """One client could not answer a request (connection loss, timeout, bad reply)."""


# ----------------------
# Strategy
# ----------------------

class EmptyResults(FederationError, ValueError):
    """Aggregation was called without any result."""


class ZeroTotalWeight(FederationError, ValueError):
    """Aggregation weights sum to zero."""


class InsufficientResults(FederationError, ValueError):
    """Fewer results than min_successful_clients reached aggregation."""


class UnknownProcessorClass(FederationError, ValueError):
    """A client advertises a processor class without a configured cutoff."""


class InvalidCutoff(UnknownProcessorClass):
    """A configured cutoff is negative or not finite."""


# ----------------------
# Client runtime
# ----------------------

class LabelOutOfRange(FederationError, ValueError):
    """A label is not in [0, n_classes)."""


class EmptyShard(FederationError, ValueError):
    """The requested split of a shard holds no sample."""


class MissingConfigKey(FederationError, KeyError):
    """A fit/evaluate instruction lacks a required config key."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# ----------------------
# Simulation
# ----------------------

class InvalidSpec(FederationError, ValueError):
    """A dataset specification or client profile is invalid."""


class TooManyShards(FederationError, ValueError):
    """The dataset cannot be split into the requested number of shards."""


class EmptyList(FederationError, ValueError):
    """A cost reduction received no value."""


# ----------------------
# Harness
# ----------------------

class ConfigParseError(FederationError, ValueError):
    """The experiment config is not valid JSON."""


class ConfigValidationError(FederationError, ValueError):
    """The experiment config violates a constraint; the message names the field."""


class SpawnError(FederationError, RuntimeError):
    """A TCP-mode client process failed to start or register."""


class MetricsIoError(FederationError, OSError):
    """Metrics could not be written or read."""
