"""
Canonical binary encodings for Parameters and ConfigMap.

Parameters: count:u32 · per tensor (ndims:u8 · dims:u32[ndims] · values:f64[prod(dims)]).
ConfigMap: count:u32 · per entry in ascending key-byte order (key:u16-len + UTF-8 · tag:u8 · value).
All integers and floats are big-endian.
"""
from __future__ import annotations

import math
import struct
from typing import Dict, List, Tuple

import numpy as np

from federation_manager.constants.protocol_tags import (
    VALUE_TAG_BOOL,
    VALUE_TAG_FLOAT,
    VALUE_TAG_INT,
    VALUE_TAG_STRING,
)
from federation_manager.errors import (
    DuplicateKey,
    MalformedEncoding,
    NonFiniteValue,
    ShapeMismatch,
    TruncatedInput,
    UnknownValueTag,
)
from federation_manager.models.tensor_models import ConfigMap, Parameters, Scalar, Tensor

_U8 = struct.Struct(">B")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_I64 = struct.Struct(">q")
_F64 = struct.Struct(">d")

_BE_F64 = np.dtype(">f8")
MAX_NDIMS = 255
MAX_STRING_BYTES = 0xFFFF


class ByteReader:
    """Cursor over an immutable byte sequence; every read checks the remaining length."""

    def __init__(self, data: bytes) -> None:
        self._data = memoryview(bytes(data))
        self.offset = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self.offset

    def take(self, count: int) -> memoryview:
        if count > self.remaining:
            raise TruncatedInput(f"{count} octet(s) attendu(s), {self.remaining} disponible(s).")
        chunk = self._data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self.take(1))[0]

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def i64(self) -> int:
        return _I64.unpack(self.take(8))[0]

    def f64(self) -> float:
        return _F64.unpack(self.take(8))[0]

    def string(self) -> str:
        length = self.u16()
        raw = self.take(length)
        try:
            return bytes(raw).decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedEncoding(f"Chaîne UTF-8 invalide : {e}") from e

    def expect_end(self) -> None:
        if self.remaining:
            raise MalformedEncoding(f"{self.remaining} octet(s) en trop après l'encodage.")


# ----------------------
# Primitive writers
# ----------------------

def pack_u8(value: int) -> bytes:
    return _U8.pack(value)


def pack_u64(value: int) -> bytes:
    return _U64.pack(value)


def pack_f64(value: float) -> bytes:
    return _F64.pack(value)


def pack_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > MAX_STRING_BYTES:
        raise ValueError(f"Chaîne trop longue ({len(raw)} octets).")
    return _U16.pack(len(raw)) + raw


# ----------------------
# Parameters
# ----------------------

def encode_parameters(parameters: Parameters) -> bytes:
    """Canonical, deterministic encoding of a Parameters value."""
    parts: List[bytes] = [_U32.pack(len(parameters))]
    for tensor in parameters:
        if len(tensor.shape) > MAX_NDIMS:
            raise ShapeMismatch(f"Trop de dimensions ({len(tensor.shape)}).")
        parts.append(_U8.pack(len(tensor.shape)))
        parts.extend(_U32.pack(d) for d in tensor.shape)
        parts.append(tensor.data.astype(_BE_F64).tobytes())
    return b"".join(parts)


def read_parameters(reader: ByteReader) -> Parameters:
    """Decode one Parameters value at the reader position."""
    count = reader.u32()
    tensors: List[Tensor] = []
    for _ in range(count):
        ndims = reader.u8()
        dims = [reader.u32() for _ in range(ndims)]
        n_values = math.prod(dims)
        if n_values * 8 > reader.remaining:
            raise MalformedEncoding(
                f"Dimensions {dims} annoncent {n_values * 8} octets, {reader.remaining} restant(s)."
            )
        raw = reader.take(n_values * 8)
        values = np.frombuffer(raw, dtype=_BE_F64).astype(np.float64)
        try:
            tensors.append(Tensor(dims, values))
        except NonFiniteValue as e:
            raise MalformedEncoding(str(e)) from e
        # 'count' can claim more tensors than the input holds; the next read then truncates
    return Parameters(tensors)


def decode_parameters(data: bytes) -> Parameters:
    """Inverse of encode_parameters; the whole input must be consumed."""
    reader = ByteReader(data)
    parameters = read_parameters(reader)
    reader.expect_end()
    return parameters


# ----------------------
# ConfigMap
# ----------------------

def _encode_value(value: Scalar) -> bytes:
    if isinstance(value, bool):
        return _U8.pack(VALUE_TAG_BOOL) + _U8.pack(1 if value else 0)
    if isinstance(value, int):
        return _U8.pack(VALUE_TAG_INT) + _I64.pack(value)
    if isinstance(value, float):
        return _U8.pack(VALUE_TAG_FLOAT) + _F64.pack(value)
    return _U8.pack(VALUE_TAG_STRING) + pack_string(value)


def encode_config(config: ConfigMap) -> bytes:
    """Canonical encoding: entries ordered by ascending UTF-8 key bytes."""
    items = config.sorted_items()
    parts: List[bytes] = [_U32.pack(len(items))]
    for key, value in items:
        parts.append(pack_string(key))
        parts.append(_encode_value(value))
    return b"".join(parts)


def _read_value(reader: ByteReader) -> Scalar:
    tag = reader.u8()
    if tag == VALUE_TAG_BOOL:
        raw = reader.u8()
        if raw not in (0, 1):
            raise MalformedEncoding(f"Booléen invalide : {raw}.")
        return raw == 1
    if tag == VALUE_TAG_INT:
        return reader.i64()
    if tag == VALUE_TAG_FLOAT:
        return reader.f64()
    if tag == VALUE_TAG_STRING:
        return reader.string()
    raise UnknownValueTag(f"Type de valeur inconnu : 0x{tag:02X}.")


def read_config(reader: ByteReader) -> ConfigMap:
    """Decode one ConfigMap at the reader position."""
    count = reader.u32()
    entries: Dict[str, Scalar] = {}
    for _ in range(count):
        key = reader.string()
        if key in entries:
            raise DuplicateKey(f"Clé en double : {key!r}.")
        entries[key] = _read_value(reader)
    return ConfigMap(entries)


def decode_config(data: bytes) -> ConfigMap:
    """Inverse of encode_config; the whole input must be consumed."""
    reader = ByteReader(data)
    config = read_config(reader)
    reader.expect_end()
    return config


def split_config_and_parameters(data: bytes) -> Tuple[ConfigMap, Parameters]:
    """Decode the concatenation encode_config(c) · encode_parameters(p)."""
    reader = ByteReader(data)
    config = read_config(reader)
    parameters = read_parameters(reader)
    reader.expect_end()
    return config, parameters
