"""Tests for NoiXe: handshake state, handler replication, prologues and scenarios.

The straight-line model below recomputes every Noise state transition with
hashlib, hmac and the cryptography primitives directly, independent of the
package's CipherState and SymmetricState.
"""

import hashlib
import hmac
import struct

import pytest
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

from spx.crypto_core import Entropy, generate_keypair
from spx.exceptions import AuthFailure, OutOfTurn, Oversized, ProtocolViolation, UnsupportedPattern
from spx.netsim import EDGE, SERVER, Mode, Protocol, ScenarioSpec, measure_overhead, run_scenario
from spx.noixe import (
    PATTERNS,
    UNKNOWN,
    NoiseHandshakeState,
    Role,
    pattern_by_name,
    prologue_detect,
    prologue_encode,
    prologue_versions,
    protocol_name,
)
from spx.wire import MsgType

ALL_PATTERNS = sorted(PATTERNS)
EXPECTED_RTTS = {"NN": 2, "NK": 1, "XK": 2, "XX": 2, "IK": 1}

# Token lists written out by hand: (sender, tokens) per message.
MODEL_PATTERNS = {
    "NN": [("i", "e"), ("r", "e ee")],
    "NK": [("i", "e es"), ("r", "e ee")],
    "XK": [("i", "e es"), ("r", "e ee"), ("i", "s se")],
    "XX": [("i", "e"), ("r", "e ee s es"), ("i", "s se")],
    "IK": [("i", "e es s ss"), ("r", "e ee se")],
}
MODEL_PRE_RESPONDER_STATIC = {"NK", "XK", "IK"}


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _hkdf(ck: bytes, ikm: bytes, n: int):
    temp = hmac.new(ck, ikm, hashlib.sha256).digest()
    out, prev = [], b""
    for i in range(1, n + 1):
        prev = hmac.new(temp, prev + bytes([i]), hashlib.sha256).digest()
        out.append(prev)
    return out


def _x25519(private: bytes, public: bytes) -> bytes:
    return X25519PrivateKey.from_private_bytes(private).exchange(X25519PublicKey.from_public_bytes(public))


def model_handshake(name, prologue, keys):
    """Return (k1, k2, h, hashes after each message) for the given key pairs.

    ``keys`` maps "i"/"r" to {"e": KeyPair, "s": KeyPair}.
    """
    proto = f"Noise_{name}_25519_ChaChaPoly_SHA256".encode()
    h = proto.ljust(32, b"\x00") if len(proto) <= 32 else _sha256(proto)
    ck, k, n = h, None, 0
    h = _sha256(h + prologue)
    if name in MODEL_PRE_RESPONDER_STATIC:
        h = _sha256(h + keys["r"]["s"].public)

    def encrypt(plaintext):
        nonlocal n
        if k is None:
            return plaintext
        ct = ChaCha20Poly1305(k).encrypt(b"\x00" * 4 + struct.pack("<Q", n), plaintext, h)
        n += 1
        return ct

    pairs = {"ee": ("e", "e"), "es": ("e", "s"), "se": ("s", "e"), "ss": ("s", "s")}
    hashes = []
    for sender, tokens in MODEL_PATTERNS[name]:
        for token in tokens.split():
            if token == "e":
                h = _sha256(h + keys[sender]["e"].public)
            elif token == "s":
                h = _sha256(h + encrypt(keys[sender]["s"].public))
            else:
                mine, theirs = pairs[token]
                ck, k = _hkdf(ck, _x25519(keys["i"][mine].private, keys["r"][theirs].public), 2)
                n = 0
        h = _sha256(h + encrypt(b""))
        hashes.append(h)
    k1, k2 = _hkdf(ck, b"", 2)
    return k1, k2, h, hashes


def drive(name, seed=0):
    """Run initiator, responder and handler over one handshake."""
    pattern = pattern_by_name(name)
    prologue = prologue_encode(pattern)
    root = Entropy(seed)
    init_static = generate_keypair(root.spawn("init-static"))
    resp_static = generate_keypair(root.spawn("resp-static"))
    rs = resp_static.public if pattern.needs_responder_static else None
    init = NoiseHandshakeState(pattern, Role.INITIATOR, prologue, s=init_static, rs=rs, entropy=root.spawn("i"))
    resp = NoiseHandshakeState(pattern, Role.RESPONDER, prologue, s=resp_static, entropy=root.spawn("r"))
    handler = NoiseHandshakeState(pattern, Role.HANDLER, prologue, rs=rs)
    for message in pattern.messages:
        if message.direction is init.own_direction:
            sender, receiver = init, resp
        else:
            sender, receiver = resp, init
        data = sender.write_message()
        receiver.read_message(data)
        handler.replicate(data, message.direction)
        assert handler.h == resp.h == init.h
    return init, resp, handler, prologue, init_static, resp_static


class TestHandshakeState:
    @pytest.mark.parametrize("name", ALL_PATTERNS)
    def test_matches_straight_line_model(self, name):
        init, resp, handler, prologue, init_static, resp_static = drive(name)
        keys = {"i": {"e": init.e, "s": init_static}, "r": {"e": resp.e, "s": resp_static}}
        k1, k2, h, hashes = model_handshake(name, prologue, keys)
        c1, c2 = init.split()
        assert (c1.k.bytes, c2.k.bytes) == (k1, k2)
        r1, r2 = resp.split()
        assert (r1.k.bytes, r2.k.bytes) == (k1, k2)
        assert init.h == resp.h == h
        assert resp.hashes == hashes
        assert handler.hashes == hashes

    @pytest.mark.parametrize("name", ALL_PATTERNS)
    def test_handler_splits_after_adopting(self, name):
        init, resp, handler, *_ = drive(name, seed=3)
        with pytest.raises(ProtocolViolation):
            handler.split()
        handler.adopt(resp.ck, resp.h)
        assert [c.k.bytes for c in handler.split()] == [c.k.bytes for c in init.split()]

    def test_handler_rejects_foreign_hash(self):
        _, resp, handler, *_ = drive("XX")
        with pytest.raises(AuthFailure):
            handler.adopt(resp.ck, b"\x00" * 32)

    def test_handler_holds_no_private_key(self):
        with pytest.raises(ValueError):
            NoiseHandshakeState(pattern_by_name("NN"), Role.HANDLER, s=generate_keypair(Entropy(1)))

    def test_handler_cannot_write(self):
        handler = NoiseHandshakeState(pattern_by_name("NN"), Role.HANDLER)
        with pytest.raises(ProtocolViolation):
            handler.write_message()

    def test_out_of_turn(self):
        resp = NoiseHandshakeState(pattern_by_name("NN"), Role.RESPONDER)
        with pytest.raises(OutOfTurn):
            resp.write_message()

    def test_oversized_message(self):
        init = NoiseHandshakeState(pattern_by_name("NN"), Role.INITIATOR, entropy=Entropy(1), max_message=64)
        with pytest.raises(Oversized):
            init.write_message(b"x" * 64)

    def test_tampered_message(self):
        pattern = pattern_by_name("NN")
        init = NoiseHandshakeState(pattern, Role.INITIATOR, entropy=Entropy(1))
        resp = NoiseHandshakeState(pattern, Role.RESPONDER, entropy=Entropy(2))
        resp.read_message(init.write_message())
        reply = bytearray(resp.write_message(b"payload"))
        reply[-1] ^= 1
        with pytest.raises(AuthFailure):
            init.read_message(bytes(reply))

    def test_missing_responder_static(self):
        with pytest.raises(ValueError):
            NoiseHandshakeState(pattern_by_name("NK"), Role.INITIATOR, entropy=Entropy(1))

    def test_protocol_name(self):
        assert protocol_name("XX") == b"Noise_XX_25519_ChaChaPoly_SHA256"


class TestPatterns:
    def test_table(self):
        assert ALL_PATTERNS == ["IK", "NK", "NN", "XK", "XX"]

    @pytest.mark.parametrize("name", ALL_PATTERNS)
    def test_expected_extra_rtts(self, name):
        assert pattern_by_name(name).expected_extra_rtts() == EXPECTED_RTTS[name]

    def test_unsupported(self):
        with pytest.raises(UnsupportedPattern):
            pattern_by_name("KK")

    def test_lookup_is_case_insensitive(self):
        assert pattern_by_name("xx").name == "XX"


class TestPrologue:
    @pytest.mark.parametrize("name", ALL_PATTERNS)
    def test_detect(self, name):
        pattern = pattern_by_name(name)
        assert prologue_detect(prologue_encode(pattern)) == pattern

    def test_versions(self):
        body = prologue_encode(pattern_by_name("XX"), versions=(1, 2))
        assert prologue_versions(body) == (1, 2)

    @pytest.mark.parametrize("body", [
        b"",
        b"Noise_KK_25519_ChaChaPoly_SHA256\x00\x01",
        b"Noise_XX_448_ChaChaPoly_SHA256\x00\x01",
        b"Noise_XX_25519_ChaChaPoly_SHA256",
        b"GET / HTTP/1.1\r\n",
    ])
    def test_unknown(self, body):
        assert prologue_detect(body) is UNKNOWN
        assert not prologue_detect(body)

    def test_bad_versions(self):
        with pytest.raises(ValueError):
            prologue_encode(pattern_by_name("XX"), versions=())


class TestScenarios:
    @pytest.mark.parametrize("name", ALL_PATTERNS)
    def test_key_triangle(self, name):
        result = run_scenario(ScenarioSpec(protocol=Protocol.NOIXE, mode=Mode.SPX, pattern=name, seed=5))
        assert result.all_succeeded
        client_key = result.client_outcomes[0].session_key
        assert len(client_key) == 64
        assert result.outcomes[SERVER][0].session_key == client_key
        assert result.outcomes[EDGE][0].session_key == client_key

    @pytest.mark.parametrize("name", ALL_PATTERNS)
    def test_overhead(self, name):
        overhead = measure_overhead(ScenarioSpec(protocol=Protocol.NOIXE, pattern=name))
        assert overhead.extra_rtts == EXPECTED_RTTS[name]
        assert overhead.extra_bytes == overhead.expected_bytes

    @pytest.mark.parametrize("mode", list(Mode))
    def test_transfer_round_trips(self, mode):
        result = run_scenario(ScenarioSpec(protocol=Protocol.NOIXE, mode=mode, workload=(100_000,)))
        assert result.all_succeeded
        assert result.client_outcomes[0].echo_ok

    def test_transport_messages_respect_cap(self):
        result = run_scenario(ScenarioSpec(protocol=Protocol.NOIXE, mode=Mode.SPX, workload=(200_000,)))
        data = [e for e in result.trace if e.msg.msg_type is MsgType.APPLICATION_DATA]
        assert data
        assert max(e.msg.length for e in data) <= 65535

    def test_client_view_is_unchanged_by_spx(self):
        for seed in range(20):
            spx = run_scenario(ScenarioSpec(protocol=Protocol.NOIXE, mode=Mode.SPX, seed=seed))
            e2e = run_scenario(ScenarioSpec(protocol=Protocol.NOIXE, mode=Mode.E2E, seed=seed))
            assert spx.client_outcomes[0].observed == e2e.client_outcomes[0].observed
