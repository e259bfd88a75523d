import unittest

import numpy as np

from federation_manager.errors import (
    DecodeError,
    DuplicateKey,
    MalformedEncoding,
    NonFiniteValue,
    ShapeMismatch,
    TruncatedInput,
    UnknownValueTag,
)
from federation_manager.models.tensor_models import ConfigMap, Parameters, Tensor, make_tensor
from federation_manager.utils.codec import (
    decode_config,
    decode_parameters,
    encode_config,
    encode_parameters,
    split_config_and_parameters,
)


def random_parameters(rng: np.random.Generator) -> Parameters:
    tensors = []
    for _ in range(int(rng.integers(0, 4))):
        ndims = int(rng.integers(0, 4))
        shape = [int(d) for d in rng.integers(0, 4, size=ndims)]
        tensors.append(Tensor(shape, rng.normal(size=int(np.prod(shape, dtype=np.int64)))))
    return Parameters(tensors)


def random_config(rng: np.random.Generator) -> ConfigMap:
    entries = {}
    for i in range(int(rng.integers(0, 8))):
        key = f"k{int(rng.integers(0, 1000))}_{i}"
        kind = int(rng.integers(0, 4))
        if kind == 0:
            entries[key] = bool(rng.integers(0, 2))
        elif kind == 1:
            entries[key] = int(rng.integers(-2 ** 63, 2 ** 63 - 1, dtype=np.int64))
        elif kind == 2:
            entries[key] = float(rng.normal() * 10.0 ** int(rng.integers(-5, 6)))
        else:
            entries[key] = "".join(rng.choice(list("abcé τ_-09"), size=int(rng.integers(0, 12))))
    return ConfigMap(entries)


class TestMakeTensor(unittest.TestCase):
    def test_matching_count(self):
        t = make_tensor([2, 2], [1, 2, 3, 4])
        self.assertEqual(t.shape, (2, 2))
        self.assertEqual(t.size, 4)

    def test_scalar(self):
        t = make_tensor([], [7.5])
        self.assertEqual(t.shape, ())
        self.assertEqual(float(t.data[0]), 7.5)

    def test_count_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            make_tensor([3], [1, 2])

    def test_non_finite(self):
        with self.assertRaises(NonFiniteValue):
            make_tensor([2], [1.0, float("nan")])
        with self.assertRaises(NonFiniteValue):
            make_tensor([1], [float("inf")])

    def test_data_is_read_only(self):
        t = make_tensor([2], [1.0, 2.0])
        with self.assertRaises(ValueError):
            t.data[0] = 5.0


class TestParametersEncoding(unittest.TestCase):
    def test_empty_parameters(self):
        self.assertEqual(encode_parameters(Parameters()), bytes.fromhex("00000000"))
        self.assertEqual(decode_parameters(bytes.fromhex("00000000")), Parameters())

    def test_single_value_golden(self):
        p = Parameters([make_tensor([1], [1.0])])
        expected = bytes.fromhex("00000001" "01" "00000001" "3FF0000000000000")
        self.assertEqual(encode_parameters(p), expected)

    def test_scalar_is_zero_dims(self):
        p = Parameters([make_tensor([], [1.0])])
        self.assertEqual(encode_parameters(p), bytes.fromhex("00000001" "00" "3FF0000000000000"))

    def test_round_trip_random(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            p = random_parameters(rng)
            self.assertEqual(decode_parameters(encode_parameters(p)), p)

    def test_deterministic(self):
        p = random_parameters(np.random.default_rng(5))
        self.assertEqual(encode_parameters(p), encode_parameters(p))

    def test_negative_zero_is_preserved(self):
        p = Parameters([make_tensor([1], [-0.0])])
        decoded = decode_parameters(encode_parameters(p))
        self.assertTrue(np.signbit(decoded[0].data[0]))

    def test_short_header(self):
        with self.assertRaises(TruncatedInput):
            decode_parameters(b"\x00\x00\x00")

    def test_dims_overflow_remaining(self):
        data = bytes.fromhex("00000001" "01" "FFFFFFFF")
        with self.assertRaises(MalformedEncoding):
            decode_parameters(data)

    def test_trailing_bytes(self):
        with self.assertRaises(MalformedEncoding):
            decode_parameters(bytes.fromhex("00000000") + b"\x00")

    def test_nan_on_wire(self):
        data = bytes.fromhex("00000001" "01" "00000001" "7FF8000000000000")
        with self.assertRaises(MalformedEncoding):
            decode_parameters(data)


class TestConfigEncoding(unittest.TestCase):
    def test_empty_map(self):
        self.assertEqual(encode_config(ConfigMap()), bytes.fromhex("00000000"))

    def test_int_entry_golden(self):
        expected = (
            bytes.fromhex("00000001")
            + bytes.fromhex("000C") + b"local_epochs"
            + bytes.fromhex("01") + bytes.fromhex("0000000000000005")
        )
        self.assertEqual(encode_config(ConfigMap({"local_epochs": 5})), expected)

    def test_every_value_kind(self):
        c = ConfigMap({"b": True, "i": -3, "f": 0.5, "s": "gpu"})
        decoded = decode_config(encode_config(c))
        self.assertEqual(decoded, c)
        self.assertIs(decoded["b"], True)
        self.assertIsInstance(decoded["i"], int)
        self.assertIsInstance(decoded["f"], float)

    def test_round_trip_random(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            config = random_config(rng)
            decoded = decode_config(encode_config(config))
            self.assertEqual(decoded, config)
            for key, value in config.items():
                self.assertIs(type(decoded[key]), type(value))

    def test_insertion_order_does_not_matter(self):
        a = ConfigMap([("zeta", 1), ("alpha", 2.0), ("mid", "x")])
        b = ConfigMap([("mid", "x"), ("zeta", 1), ("alpha", 2.0)])
        self.assertEqual(encode_config(a), encode_config(b))

    def test_int_and_float_differ(self):
        self.assertNotEqual(ConfigMap({"e": 1}), ConfigMap({"e": 1.0}))
        self.assertNotEqual(encode_config(ConfigMap({"e": 1})), encode_config(ConfigMap({"e": 1.0})))

    def test_duplicate_key(self):
        entry = bytes.fromhex("0001") + b"k" + bytes.fromhex("00") + b"\x01"
        with self.assertRaises(DuplicateKey):
            decode_config(bytes.fromhex("00000002") + entry + entry)

    def test_unknown_value_tag(self):
        data = bytes.fromhex("00000001") + bytes.fromhex("0001") + b"k" + bytes.fromhex("09")
        with self.assertRaises(UnknownValueTag):
            decode_config(data)

    def test_truncated(self):
        data = encode_config(ConfigMap({"learning_rate": 0.1}))
        with self.assertRaises(TruncatedInput):
            decode_config(data[:-1])

    def test_config_then_parameters(self):
        c = ConfigMap({"round": 3})
        p = Parameters([make_tensor([2], [1.0, 2.0])])
        self.assertEqual(split_config_and_parameters(encode_config(c) + encode_parameters(p)), (c, p))


class TestDecoderTotality(unittest.TestCase):
    """Random and mutated inputs either decode or raise a typed error."""

    def test_random_bytes(self):
        rng = np.random.default_rng(99)
        for _ in range(2000):
            data = rng.integers(0, 256, size=int(rng.integers(0, 40)), dtype=np.uint8).tobytes()
            for decode in (decode_parameters, decode_config):
                try:
                    decode(data)
                except DecodeError:
                    pass

    def test_mutated_valid_encodings(self):
        rng = np.random.default_rng(7)
        base = encode_parameters(Parameters([make_tensor([2, 2], [1, 2, 3, 4])]))
        for _ in range(1000):
            data = bytearray(base)
            data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
            cut = int(rng.integers(0, len(data) + 1))
            try:
                decode_parameters(bytes(data[:cut]))
            except DecodeError:
                pass


if __name__ == "__main__":
    unittest.main()
