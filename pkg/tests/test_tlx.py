"""Tests for the TLX handshake, its edge adapter and TLX scenarios."""

import pytest

from spx.crypto_core import Entropy, generate_keypair, generate_signing_keypair
from spx.exceptions import CertMismatch, FinishedMismatch, ProtocolViolation
from spx.netsim import EDGE, SERVER, Mode, Protocol, ScenarioSpec, measure_overhead, run_scenario
from spx.see_sim import REPORT_SIZE
from spx.tlx import (
    CLIENT_SEQUENCE,
    SERVER_SEQUENCE,
    TLX_PROTOCOL_ID,
    Certificate,
    ClientState,
    Hello,
    ServerState,
    TlxClientHandshake,
    TlxServerHandshake,
)
from spx.wire import EXT_SPX_RESPONSE, Extension, MsgType, WireMessage


@pytest.fixture
def signing_key():
    return generate_signing_keypair(Entropy(11))


def make_pair(signing_key, seed=3, pin="match"):
    pin_key = signing_key.public if pin == "match" else pin
    client = TlxClientHandshake(Entropy(seed).spawn("client"), pin=pin_key)
    server = TlxServerHandshake(Entropy(seed).spawn("server"), signing_key, Certificate.issue(signing_key, "server"))
    return client, server


def run_handshake(client, server, tamper=None):
    """Exchange flights until neither side has anything to send."""
    outbound = client.start()
    while outbound:
        inbound = [reply for msg in outbound for reply in server.receive(msg)]
        if tamper:
            inbound = [tamper(msg) for msg in inbound]
        outbound = [reply for msg in inbound for reply in client.receive(msg)]


class TestHandshake:
    def test_keys_agree(self, signing_key):
        client, server = make_pair(signing_key)
        run_handshake(client, server)
        assert client.state is ClientState.ESTABLISHED
        assert server.state is ServerState.ESTABLISHED
        assert client.session_key == server.session_key
        assert client.transcript == server.transcript

    def test_records_flow_both_ways(self, signing_key):
        client, server = make_pair(signing_key)
        run_handshake(client, server)
        up, down = client.record_layer(), server.record_layer()
        assert down.open(up.seal(b"ping").payload) == b"ping"
        assert up.open(down.seal(b"pong").payload) == b"pong"

    def test_pin_mismatch(self, signing_key):
        other = generate_signing_keypair(Entropy(12))
        client, server = make_pair(signing_key, pin=other.public)
        with pytest.raises(CertMismatch):
            run_handshake(client, server)

    def test_tampered_server_finished(self, signing_key):
        client, server = make_pair(signing_key)

        def flip_finished(msg):
            if msg.msg_type is MsgType.FINISHED:
                payload = bytearray(msg.payload)
                payload[0] ^= 1
                return WireMessage(MsgType.FINISHED, bytes(payload))
            return msg

        with pytest.raises(FinishedMismatch):
            run_handshake(client, server, tamper=flip_finished)

    def test_unsolicited_extension_rejected(self, signing_key):
        client, _ = make_pair(signing_key)
        client.start()
        hello = Hello(b"\x00" * 32).to_payload([Extension(EXT_SPX_RESPONSE, b"x")])
        with pytest.raises(ProtocolViolation):
            client.receive(WireMessage(MsgType.SERVER_HELLO, hello))

    def test_out_of_order(self, signing_key):
        client, server = make_pair(signing_key)
        client.start()
        with pytest.raises(ProtocolViolation):
            client.receive(WireMessage(MsgType.FINISHED, b""))
        with pytest.raises(ProtocolViolation):
            server.receive(WireMessage(MsgType.FINISHED, b""))

    def test_no_record_layer_before_established(self, signing_key):
        client, _ = make_pair(signing_key)
        with pytest.raises(ProtocolViolation):
            client.record_layer()

    def test_certificate_padding(self, signing_key):
        cert = Certificate.issue(signing_key, "server")
        raw = cert.to_bytes(3072)
        assert len(raw) == 3072
        assert Certificate.from_bytes(raw) == cert
        with pytest.raises(ValueError):
            cert.to_bytes(10)


class TestScenarios:
    @pytest.mark.parametrize("mode", list(Mode))
    def test_every_mode_succeeds(self, mode):
        result = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=mode, workload=(4096,)))
        assert result.all_succeeded
        assert result.client_outcomes[0].echo_ok

    def test_key_triangle(self):
        result = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX, seed=4))
        client_key = result.client_outcomes[0].session_key
        assert client_key
        assert result.outcomes[SERVER][0].session_key == client_key
        assert result.outcomes[EDGE][0].session_key == client_key

    def test_split_edge_holds_a_different_key(self):
        result = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPLIT, seed=4))
        assert result.outcomes[SERVER][0].session_key != result.client_outcomes[0].session_key

    def test_client_view_is_unchanged_by_spx(self):
        for seed in range(100):
            spx = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX, seed=seed))
            e2e = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.E2E, seed=seed))
            assert spx.all_succeeded
            assert spx.client_outcomes[0].observed == e2e.client_outcomes[0].observed

    def test_client_sees_vanilla_sequence(self):
        result = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX))
        sent = [t for t, d in result.client_outcomes[0].observed if d == 0]
        received = [t for t, d in result.client_outcomes[0].observed if d == 1]
        assert sent == [int(t) for t in CLIENT_SEQUENCE]
        assert received == [int(t) for t in SERVER_SEQUENCE]

    def test_overhead(self):
        overhead = measure_overhead(ScenarioSpec(protocol=Protocol.TLX))
        assert overhead.protocol_id == TLX_PROTOCOL_ID
        assert overhead.extra_rtts == 1
        assert overhead.extra_bytes == overhead.expected_bytes
        assert overhead.expected_bytes > 2 * REPORT_SIZE

    def test_edge_observes_both_directions(self):
        spx = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX, workload=(2048,)))
        assert spx.outcomes[EDGE][0].bytes_transferred == 2 * 2048
        assert spx.world.observer.bytes_seen == 2 * 2048


def test_dh_keys_are_fresh_per_run(signing_key):
    a, server_a = make_pair(signing_key, seed=1)
    b, server_b = make_pair(signing_key, seed=2)
    run_handshake(a, server_a)
    run_handshake(b, server_b)
    assert a.session_key != b.session_key
    assert generate_keypair(Entropy(1)).public == generate_keypair(Entropy(1)).public
