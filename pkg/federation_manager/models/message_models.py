from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Dict, Type, Union

from federation_manager.constants.config_keys import KEY_FAILED
from federation_manager.constants.protocol_tags import (
    TAG_DISCONNECT,
    TAG_EVALUATE_INS,
    TAG_EVALUATE_RES,
    TAG_FIT_INS,
    TAG_FIT_RES,
    TAG_GET_PARAMETERS_INS,
    TAG_GET_PARAMETERS_RES,
    TAG_HELLO,
    TAG_HELLO_ACK,
)
from federation_manager.errors import DecodeError, InvalidMessage, MalformedPayload, UnknownTypeTag
from federation_manager.models.tensor_models import ConfigMap, Parameters
from federation_manager.utils.codec import (
    ByteReader,
    encode_config,
    encode_parameters,
    pack_f64,
    pack_string,
    pack_u64,
    pack_u8,
    read_config,
    read_parameters,
)

UINT64_MAX = 2 ** 64 - 1


def _check_count(value: int) -> None:
    if not 0 <= value <= UINT64_MAX:
        raise InvalidMessage(f"num_examples hors plage : {value}.")


@dataclass(frozen=True)
class Hello:
    """Client → server: first message of a connection."""
    TYPE_TAG: ClassVar[int] = TAG_HELLO

    client_id: str
    capabilities: ConfigMap = field(default_factory=ConfigMap)

    def encode_payload(self) -> bytes:
        return pack_string(self.client_id) + encode_config(self.capabilities)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "Hello":
        return cls(reader.string(), read_config(reader))


@dataclass(frozen=True)
class HelloAck:
    """Server → client: handshake accepted."""
    TYPE_TAG: ClassVar[int] = TAG_HELLO_ACK

    def encode_payload(self) -> bytes:
        return b""

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "HelloAck":
        return cls()


@dataclass(frozen=True)
class GetParametersIns:
    TYPE_TAG: ClassVar[int] = TAG_GET_PARAMETERS_INS

    def encode_payload(self) -> bytes:
        return b""

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "GetParametersIns":
        return cls()


@dataclass(frozen=True)
class GetParametersRes:
    TYPE_TAG: ClassVar[int] = TAG_GET_PARAMETERS_RES

    parameters: Parameters

    def encode_payload(self) -> bytes:
        return encode_parameters(self.parameters)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "GetParametersRes":
        return cls(read_parameters(reader))


@dataclass(frozen=True)
class FitIns:
    TYPE_TAG: ClassVar[int] = TAG_FIT_INS

    parameters: Parameters
    config: ConfigMap = field(default_factory=ConfigMap)

    def encode_payload(self) -> bytes:
        return encode_parameters(self.parameters) + encode_config(self.config)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "FitIns":
        return cls(read_parameters(reader), read_config(reader))


@dataclass(frozen=True)
class FitRes:
    """
    Client → server: local training result.

    num_examples may be 0 only when metrics carry failed=True.
    """
    TYPE_TAG: ClassVar[int] = TAG_FIT_RES

    parameters: Parameters
    num_examples: int
    metrics: ConfigMap = field(default_factory=ConfigMap)

    def __post_init__(self) -> None:
        _check_count(self.num_examples)
        if self.num_examples == 0 and self.metrics.get(KEY_FAILED) is not True:
            raise InvalidMessage("FitRes sans exemple doit porter 'failed': true.")

    @property
    def failed(self) -> bool:
        return self.metrics.get(KEY_FAILED) is True

    def encode_payload(self) -> bytes:
        return encode_parameters(self.parameters) + pack_u64(self.num_examples) + encode_config(self.metrics)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "FitRes":
        return cls(read_parameters(reader), reader.u64(), read_config(reader))


@dataclass(frozen=True)
class EvaluateIns:
    TYPE_TAG: ClassVar[int] = TAG_EVALUATE_INS

    parameters: Parameters
    config: ConfigMap = field(default_factory=ConfigMap)

    def encode_payload(self) -> bytes:
        return encode_parameters(self.parameters) + encode_config(self.config)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "EvaluateIns":
        return cls(read_parameters(reader), read_config(reader))


@dataclass(frozen=True)
class EvaluateRes:
    TYPE_TAG: ClassVar[int] = TAG_EVALUATE_RES

    loss: float
    num_examples: int
    metrics: ConfigMap = field(default_factory=ConfigMap)

    def __post_init__(self) -> None:
        _check_count(self.num_examples)
        if not math.isfinite(self.loss):
            raise InvalidMessage("La perte d'évaluation doit être finie.")

    def encode_payload(self) -> bytes:
        return pack_f64(self.loss) + pack_u64(self.num_examples) + encode_config(self.metrics)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "EvaluateRes":
        return cls(reader.f64(), reader.u64(), read_config(reader))


@dataclass(frozen=True)
class Disconnect:
    TYPE_TAG: ClassVar[int] = TAG_DISCONNECT

    reason: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.reason <= 0xFF:
            raise InvalidMessage(f"Code de déconnexion hors plage : {self.reason}.")

    def encode_payload(self) -> bytes:
        return pack_u8(self.reason)

    @classmethod
    def read_payload(cls, reader: ByteReader) -> "Disconnect":
        return cls(reader.u8())


Message = Union[
    Hello, HelloAck, GetParametersIns, GetParametersRes, FitIns, FitRes, EvaluateIns, EvaluateRes, Disconnect
]

MESSAGE_TYPES: Dict[int, Type] = {
    cls.TYPE_TAG: cls
    for cls in (Hello, HelloAck, GetParametersIns, GetParametersRes, FitIns, FitRes, EvaluateIns, EvaluateRes,
                Disconnect)
}

# Which response answers which instruction
RESPONSE_FOR: Dict[Type, Type] = {
    GetParametersIns: GetParametersRes,
    FitIns: FitRes,
    EvaluateIns: EvaluateRes,
}


def decode_message(type_tag: int, payload: bytes) -> Message:
    """Decode one payload for its tag; any decode failure becomes MalformedPayload."""
    message_cls = MESSAGE_TYPES.get(type_tag)
    if message_cls is None:
        raise UnknownTypeTag(f"Type de trame inconnu : 0x{type_tag:02X}.")
    reader = ByteReader(payload)
    try:
        message = message_cls.read_payload(reader)
        reader.expect_end()
    except (DecodeError, InvalidMessage, ValueError) as e:
        raise MalformedPayload(f"{message_cls.__name__} invalide : {e}") from e
    return message
