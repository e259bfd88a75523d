import socket
import threading
import time
import unittest

import numpy as np

from federation_manager.errors import (
    ConnectionClosed,
    DuplicateClientId,
    HandshakeRejected,
    HandshakeTimeout,
    InvalidMessage,
    MalformedPayload,
    OversizeMessage,
    ProtocolViolation,
    TruncatedFrame,
    UnknownTypeTag,
)
from federation_manager.models.message_models import (
    Disconnect,
    EvaluateIns,
    EvaluateRes,
    FitIns,
    FitRes,
    GetParametersIns,
    GetParametersRes,
    Hello,
    HelloAck,
)
from federation_manager.models.tensor_models import ConfigMap, Parameters, Tensor, make_tensor
from federation_manager.utils.framing import (
    BufferSource,
    SocketChannel,
    handshake_client,
    handshake_server,
    loopback_pair,
    read_frame,
    send_message,
    write_frame,
)


def sample_messages():
    p = Parameters([make_tensor([2, 3], range(6)), make_tensor([3], [0.5, -1.0, 2.0])])
    cfg = ConfigMap({"local_epochs": 5, "learning_rate": 0.05, "batch_size": 32, "seed": 11})
    return [
        Hello("jetson-01", ConfigMap({"processor_class": "gpu"})),
        HelloAck(),
        GetParametersIns(),
        GetParametersRes(p),
        FitIns(p, cfg),
        FitRes(p, 40, ConfigMap({"completed_epochs": 1.0})),
        FitRes(p, 0, ConfigMap({"failed": True})),
        EvaluateIns(p, ConfigMap({"round": 1})),
        EvaluateRes(0.25, 10, ConfigMap({"accuracy": 0.9})),
        Disconnect(3),
    ]


class TestFrames(unittest.TestCase):
    def test_get_parameters_ins_golden(self):
        self.assertEqual(write_frame(GetParametersIns()), bytes.fromhex("00000001" "10"))

    def test_hello_ack_golden(self):
        self.assertEqual(write_frame(HelloAck()), bytes.fromhex("00000001" "02"))

    def test_disconnect_golden(self):
        self.assertEqual(write_frame(Disconnect(3)), bytes.fromhex("00000002" "20" "03"))

    def test_every_variant_round_trips(self):
        for message in sample_messages():
            with self.subTest(message=type(message).__name__):
                self.assertEqual(read_frame(BufferSource(write_frame(message))), message)

    def test_one_byte_chunks(self):
        for message in sample_messages():
            source = BufferSource(write_frame(message), chunk_size=1)
            self.assertEqual(read_frame(source), message)

    def test_random_fit_ins_under_random_chunking(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            size = int(rng.integers(0, 9))
            p = Parameters([Tensor([size], rng.normal(size=size)), Tensor([2], rng.normal(size=2))])
            message = FitIns(p, ConfigMap({"seed": int(rng.integers(0, 2 ** 62))}))
            chunk = int(rng.integers(1, 16))
            self.assertEqual(read_frame(BufferSource(write_frame(message), chunk_size=chunk)), message)

    def test_two_frames_back_to_back(self):
        first, second = HelloAck(), Disconnect(0)
        source = BufferSource(write_frame(first) + write_frame(second))
        self.assertEqual(read_frame(source), first)
        self.assertEqual(source.remaining, write_frame(second))
        self.assertEqual(read_frame(source), second)

    def test_clean_eof(self):
        with self.assertRaises(ConnectionClosed):
            read_frame(BufferSource(b""))

    def test_eof_mid_frame(self):
        data = write_frame(EvaluateRes(0.5, 3))
        with self.assertRaises(TruncatedFrame):
            read_frame(BufferSource(data[:-2]))
        with self.assertRaises(TruncatedFrame):
            read_frame(BufferSource(data[:2]))

    def test_unknown_type_tag(self):
        with self.assertRaises(UnknownTypeTag):
            read_frame(BufferSource(bytes.fromhex("00000001" "FF")))

    def test_malformed_payload(self):
        with self.assertRaises(MalformedPayload):
            read_frame(BufferSource(bytes.fromhex("00000003" "20" "0101")))
        with self.assertRaises(MalformedPayload):
            read_frame(BufferSource(bytes.fromhex("00000001" "11")))

    def test_length_over_cap(self):
        with self.assertRaises(MalformedPayload):
            read_frame(BufferSource(bytes.fromhex("04000001" "10")))

    def test_oversize_message(self):
        big = Parameters([Tensor([8 * 1024 * 1024 + 1], np.zeros(8 * 1024 * 1024 + 1))])
        with self.assertRaises(OversizeMessage):
            write_frame(GetParametersRes(big))


class TestMessageInvariants(unittest.TestCase):
    def test_zero_examples_requires_failed(self):
        with self.assertRaises(InvalidMessage):
            FitRes(Parameters(), 0)

    def test_non_finite_loss(self):
        with self.assertRaises(InvalidMessage):
            EvaluateRes(float("nan"), 1)

    def test_disconnect_reason_range(self):
        with self.assertRaises(InvalidMessage):
            Disconnect(256)


class TestHandshake(unittest.TestCase):
    def _run_server(self, channel, outcome):
        try:
            outcome["identity"] = handshake_server(channel, timeout=5.0)
        except Exception as e:  # noqa: BLE001
            outcome["error"] = e

    def test_loopback_handshake(self):
        server_end, client_end = loopback_pair()
        outcome = {}
        thread = threading.Thread(target=self._run_server, args=(server_end, outcome))
        thread.start()
        handshake_client(client_end, "jetson-01", ConfigMap(), timeout=5.0)
        thread.join(5.0)
        self.assertEqual(outcome["identity"], ("jetson-01", ConfigMap()))

    def test_tcp_handshake(self):
        listener = socket.create_server(("127.0.0.1", 0))
        port = listener.getsockname()[1]
        outcome = {}

        def serve():
            conn, _ = listener.accept()
            channel = SocketChannel(conn)
            self._run_server(channel, outcome)
            channel.close()

        thread = threading.Thread(target=serve)
        thread.start()
        client = SocketChannel(socket.create_connection(("127.0.0.1", port)))
        caps = ConfigMap({"processor_class": "cpu", "seconds_per_sample": 0.0127})
        handshake_client(client, "pi-02", caps, timeout=5.0)
        thread.join(5.0)
        client.close()
        listener.close()
        self.assertEqual(outcome["identity"], ("pi-02", caps))

    def test_first_message_not_hello(self):
        server_end, client_end = loopback_pair()
        send_message(client_end, FitRes(Parameters(), 1))
        with self.assertRaises(ProtocolViolation):
            handshake_server(server_end, timeout=1.0)
        self.assertEqual(read_frame(client_end), Disconnect(2))

    def test_server_closes_before_ack(self):
        server_end, client_end = loopback_pair()

        def close_after_hello():
            read_frame(server_end)
            server_end.close()

        thread = threading.Thread(target=close_after_hello)
        thread.start()
        with self.assertRaises(ConnectionClosed):
            handshake_client(client_end, "c1", timeout=5.0)
        thread.join(5.0)

    def test_handshake_timeout(self):
        server_end, _client_end = loopback_pair()
        with self.assertRaises(HandshakeTimeout):
            handshake_server(server_end, timeout=0.1)

    def test_rejected_by_server(self):
        server_end, client_end = loopback_pair()

        def reject():
            read_frame(server_end)
            send_message(server_end, Disconnect(1))

        thread = threading.Thread(target=reject)
        thread.start()
        with self.assertRaises(HandshakeRejected) as ctx:
            handshake_client(client_end, "c1", timeout=5.0)
        thread.join(5.0)
        self.assertEqual(ctx.exception.reason, 1)

    def test_refused_id_gets_no_ack(self):
        server_end, client_end = loopback_pair()
        outcome = {}

        def refuse(client_id, capabilities):
            raise DuplicateClientId(client_id)

        def serve():
            try:
                handshake_server(server_end, timeout=5.0, admit=refuse)
            except DuplicateClientId as e:
                outcome["error"] = e

        thread = threading.Thread(target=serve)
        thread.start()
        with self.assertRaises(HandshakeRejected) as ctx:
            handshake_client(client_end, "c1", timeout=5.0)
        thread.join(5.0)
        self.assertEqual(ctx.exception.reason, 1)
        self.assertIsInstance(outcome["error"], DuplicateClientId)

    def test_timeout_covers_the_whole_hello(self):
        server_end, client_end = loopback_pair()
        hello = write_frame(Hello("slow", ConfigMap({"processor_class": "cpu"})))

        def drip():
            for i in range(len(hello)):
                try:
                    client_end.write(hello[i:i + 1])
                except BrokenPipeError:
                    return
                time.sleep(0.05)

        threading.Thread(target=drip, daemon=True).start()
        started = time.monotonic()
        with self.assertRaises(HandshakeTimeout):
            handshake_server(server_end, timeout=0.3)
        self.assertLess(time.monotonic() - started, 1.0)
        client_end.close()


if __name__ == "__main__":
    unittest.main()
