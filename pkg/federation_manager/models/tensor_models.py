from __future__ import annotations

import math
from collections.abc import Mapping
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from federation_manager.errors import NonFiniteValue, ShapeMismatch

Scalar = Union[bool, int, float, str]

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1
UINT32_MAX = 2 ** 32 - 1


class Tensor:
    """
    Dense float64 tensor.

    Attributes:
        shape (Tuple[int, ...]): Dimensions; the empty shape is a scalar.
        data (np.ndarray): Flat, row-major, read-only float64 values.
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape: Sequence[int], data: Union[Sequence[float], np.ndarray]) -> None:
        dims = tuple(int(d) for d in shape)
        if any(d < 0 or d > UINT32_MAX for d in dims):
            raise ShapeMismatch(f"Dimension invalide dans {dims}.")
        values = np.array(data, dtype=np.float64).reshape(-1)
        expected = math.prod(dims)
        if values.size != expected:
            raise ShapeMismatch(f"{values.size} valeurs pour la forme {list(dims)} (attendu {expected}).")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue("Le tenseur contient une valeur NaN ou infinie.")
        values.flags.writeable = False
        self.shape: Tuple[int, ...] = dims
        self.data: np.ndarray = values

    @property
    def size(self) -> int:
        return int(self.data.size)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "Tensor":
        """Build a tensor from an ndarray of any shape (values are copied)."""
        arr = np.asarray(array, dtype=np.float64)
        return cls(arr.shape, arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        """Return a writable copy shaped like the tensor."""
        return self.data.reshape(self.shape).copy()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        # bit-level equality: -0.0 and 0.0 differ on the wire
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()

    def __hash__(self) -> int:
        return hash((self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)}, size={self.size})"


def make_tensor(shape: Sequence[int], data: Sequence[float]) -> Tensor:
    """Validate and build a Tensor (ShapeMismatch / NonFiniteValue on bad input)."""
    return Tensor(shape, data)


class Parameters:
    """Ordered list of tensors exchanged between server and clients."""

    __slots__ = ("tensors",)

    def __init__(self, tensors: Iterable[Tensor] = ()) -> None:
        items = tuple(tensors)
        for t in items:
            if not isinstance(t, Tensor):
                raise TypeError("Parameters n'accepte que des Tensor.")
        self.tensors: Tuple[Tensor, ...] = items

    @classmethod
    def from_arrays(cls, arrays: Iterable[np.ndarray]) -> "Parameters":
        return cls(Tensor.from_array(a) for a in arrays)

    def to_arrays(self) -> List[np.ndarray]:
        """Writable ndarray copies, one per tensor, in order."""
        return [t.as_array() for t in self.tensors]

    @property
    def shapes(self) -> List[Tuple[int, ...]]:
        return [t.shape for t in self.tensors]

    def is_shape_compatible(self, other: "Parameters") -> bool:
        """Same tensor count and pairwise equal shapes."""
        return self.shapes == other.shapes

    def __len__(self) -> int:
        return len(self.tensors)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.tensors)

    def __getitem__(self, index: int) -> Tensor:
        return self.tensors[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Parameters):
            return NotImplemented
        return self.tensors == other.tensors

    def __hash__(self) -> int:
        return hash(self.tensors)

    def __repr__(self) -> str:
        return f"Parameters(shapes={[list(s) for s in self.shapes]})"


def _value_kind(value: Scalar) -> str:
    # bool first: bool is a subclass of int
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, np.integer)):
        return "int"
    if isinstance(value, (float, np.floating)):
        return "float"
    if isinstance(value, str):
        return "str"
    raise ValueError(f"Valeur de configuration non scalaire : {value!r}")


def _normalize_value(value: Scalar) -> Scalar:
    kind = _value_kind(value)
    if kind == "int":
        value = int(value)
        if not INT64_MIN <= value <= INT64_MAX:
            raise ValueError(f"Entier hors de la plage int64 : {value}")
        return value
    if kind == "float":
        return float(value)
    return value


class ConfigMap(Mapping):
    """
    Immutable string-keyed map of scalars (bool, int64, float64, str).

    Equality compares value kinds too, so {"e": 1} differs from {"e": 1.0}.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Union[Mapping, Iterable[Tuple[str, Scalar]], None] = None) -> None:
        items = entries.items() if isinstance(entries, Mapping) else (entries or [])
        normalized: Dict[str, Scalar] = {}
        for key, value in items:
            if not isinstance(key, str):
                raise ValueError(f"Clé de configuration non textuelle : {key!r}")
            normalized[key] = _normalize_value(value)
        self._entries = normalized

    def __getitem__(self, key: str) -> Scalar:
        return self._entries[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def sorted_items(self) -> List[Tuple[str, Scalar]]:
        """Entries in canonical order (ascending UTF-8 key bytes)."""
        return sorted(self._entries.items(), key=lambda kv: kv[0].encode("utf-8"))

    def with_entries(self, **extra: Scalar) -> "ConfigMap":
        """Return a copy with entries added or replaced."""
        merged = dict(self._entries)
        merged.update(extra)
        return ConfigMap(merged)

    def without(self, *keys: str) -> "ConfigMap":
        return ConfigMap({k: v for k, v in self._entries.items() if k not in keys})

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ConfigMap):
            return self._typed() == other._typed()
        if isinstance(other, Mapping):
            return self._typed() == ConfigMap(other)._typed()
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._typed().items())))

    def _typed(self) -> Dict[str, Tuple[str, Scalar]]:
        return {k: (_value_kind(v), v) for k, v in self._entries.items()}

    def __repr__(self) -> str:
        return f"ConfigMap({dict(self.sorted_items())!r})"
