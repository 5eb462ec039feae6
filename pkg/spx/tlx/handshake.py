"""Sans-IO TLX handshake state machines and the record layer.

The client never looks at SPX content: it refuses any extension it did not
ask for. The server strips SPX extensions before hashing, so both ends agree
on the transcript whether or not an edge was involved.
"""

import logging
from enum import Enum
from typing import List, Optional

from ..crypto_core import (
    DIRECTION_CLIENT_TO_SERVER,
    DIRECTION_SERVER_TO_CLIENT,
    KEY_SIZE,
    Entropy,
    KeyPair,
    SymmetricKey,
    aead_open,
    aead_seal,
    counter_nonce,
    dh,
    generate_keypair,
)
from ..exceptions import CertMismatch, ProtocolViolation, WireError
from ..spx_core.messages import SpxOffer, SpxRequest, offer_context
from ..wire import EXT_SPX_REQUEST, Extension, MsgType, Transcript, WireMessage, find_extension, without_spx
from .messages import (
    CHANGE_CIPHER_SPEC,
    CLIENT_FINISHED_LABEL,
    DEFAULT_CERT_SIZE,
    RANDOM_SIZE,
    SERVER_FINISHED_LABEL,
    SERVER_HELLO_DONE,
    SUITE_X25519_CHACHA20_POLY1305_SHA256,
    Certificate,
    Hello,
    check_finished,
    check_server_key_exchange,
    derive_session_key,
    finished,
    server_key_exchange,
)

logger = logging.getLogger(__name__)


class RecordLayer:
    """ChaCha20-Poly1305 records under one session key.

    Each direction keeps its own sequence number starting at 1; sequence 0 is
    taken by that direction's Finished message.
    """

    def __init__(self, key: SymmetricKey, send_direction: int):
        self.key = key
        self.send_direction = send_direction
        self.recv_direction = 1 - send_direction
        self._send_seq = 1
        self._recv_seq = 1

    def seal(self, data: bytes) -> WireMessage:
        nonce = counter_nonce(self._send_seq, self.send_direction)
        self._send_seq += 1
        return WireMessage(MsgType.APPLICATION_DATA, aead_seal(self.key, nonce, b"", data))

    def open(self, payload: bytes) -> bytes:
        """Raises AuthFailure."""
        nonce = counter_nonce(self._recv_seq, self.recv_direction)
        data = aead_open(self.key, nonce, b"", payload)
        self._recv_seq += 1
        return data


class ClientState(str, Enum):
    START = "start"
    WAIT_SERVER_HELLO = "wait_server_hello"
    WAIT_CERTIFICATE = "wait_certificate"
    WAIT_KEY_EXCHANGE = "wait_key_exchange"
    WAIT_HELLO_DONE = "wait_hello_done"
    WAIT_CHANGE_CIPHER_SPEC = "wait_change_cipher_spec"
    WAIT_FINISHED = "wait_finished"
    ESTABLISHED = "established"


_CLIENT_EXPECTS = {
    ClientState.WAIT_SERVER_HELLO: MsgType.SERVER_HELLO,
    ClientState.WAIT_CERTIFICATE: MsgType.CERTIFICATE,
    ClientState.WAIT_KEY_EXCHANGE: MsgType.SERVER_KEY_EXCHANGE,
    ClientState.WAIT_HELLO_DONE: MsgType.SERVER_HELLO_DONE,
    ClientState.WAIT_CHANGE_CIPHER_SPEC: MsgType.CHANGE_CIPHER_SPEC,
    ClientState.WAIT_FINISHED: MsgType.FINISHED,
}


class TlxClientHandshake:
    """Unmodified TLX client.

    Args:
        entropy: randomness for the client random and the DH key
        pin: expected certificate key; ``None`` accepts any self-signed certificate
    """

    def __init__(self, entropy: Entropy, pin: Optional[bytes] = None):
        self.entropy = entropy
        self.pin = pin
        self.state = ClientState.START
        self.transcript = Transcript()
        self.client_random = b""
        self.server_random = b""
        self.certificate: Optional[Certificate] = None
        self.session_key: Optional[SymmetricKey] = None
        self._server_dh: Optional[bytes] = None

    @property
    def established(self) -> bool:
        return self.state is ClientState.ESTABLISHED

    def _send(self, msg: WireMessage) -> WireMessage:
        self.transcript = self.transcript.absorb(msg)
        return msg

    def start(self) -> List[WireMessage]:
        if self.state is not ClientState.START:
            raise ProtocolViolation("client handshake already started")
        self.client_random = self.entropy.bytes(RANDOM_SIZE)
        self.state = ClientState.WAIT_SERVER_HELLO
        hello = Hello(self.client_random)
        return [self._send(WireMessage(MsgType.CLIENT_HELLO, hello.to_payload()))]

    def receive(self, msg: WireMessage) -> List[WireMessage]:
        """Process one server handshake message and return the client's reply.

        Raises:
            ProtocolViolation: unexpected message or unsolicited extension
            CertMismatch: certificate or key exchange signature rejected
            FinishedMismatch: server Finished does not verify
        """
        expected = _CLIENT_EXPECTS.get(self.state)
        if expected is None or msg.msg_type is not expected:
            want = expected.name if expected else "nothing"
            raise ProtocolViolation(f"client expected {want}, got {msg.msg_type.name}")

        if self.state is ClientState.WAIT_SERVER_HELLO:
            hello, extensions = Hello.from_payload(msg.payload)
            if extensions:
                raise ProtocolViolation("server sent an extension the client did not offer")
            if hello.suite != SUITE_X25519_CHACHA20_POLY1305_SHA256:
                raise ProtocolViolation(f"server chose unknown suite {hello.suite:#06x}")
            self.server_random = hello.random
            self.transcript = self.transcript.absorb(msg)
            self.state = ClientState.WAIT_CERTIFICATE
            return []

        if self.state is ClientState.WAIT_CERTIFICATE:
            cert = Certificate.from_bytes(msg.payload)
            if not cert.self_signed_ok():
                raise CertMismatch("certificate signature does not verify")
            if self.pin is not None and cert.public_key != self.pin:
                raise CertMismatch(f"certificate for {cert.subject!r} does not match the pinned key")
            self.certificate = cert
            self.transcript = self.transcript.absorb(msg)
            self.state = ClientState.WAIT_KEY_EXCHANGE
            return []

        if self.state is ClientState.WAIT_KEY_EXCHANGE:
            self._server_dh = check_server_key_exchange(
                self.certificate, self.client_random, self.server_random, msg.payload
            )
            self.transcript = self.transcript.absorb(msg)
            self.state = ClientState.WAIT_HELLO_DONE
            return []

        if self.state is ClientState.WAIT_HELLO_DONE:
            self.transcript = self.transcript.absorb(msg)
            ephemeral = generate_keypair(self.entropy)
            self.session_key = derive_session_key(
                dh(ephemeral, self._server_dh), self.client_random, self.server_random
            )
            flight = [
                self._send(WireMessage(MsgType.CLIENT_KEY_EXCHANGE, ephemeral.public)),
                self._send(CHANGE_CIPHER_SPEC),
            ]
            fin = finished(
                self.session_key, CLIENT_FINISHED_LABEL, self.transcript.digest, DIRECTION_CLIENT_TO_SERVER
            )
            flight.append(self._send(fin))
            self.state = ClientState.WAIT_CHANGE_CIPHER_SPEC
            return flight

        if self.state is ClientState.WAIT_CHANGE_CIPHER_SPEC:
            self.transcript = self.transcript.absorb(msg)
            self.state = ClientState.WAIT_FINISHED
            return []

        check_finished(
            self.session_key,
            SERVER_FINISHED_LABEL,
            self.transcript.digest,
            DIRECTION_SERVER_TO_CLIENT,
            msg.payload,
        )
        self.transcript = self.transcript.absorb(msg)
        self.state = ClientState.ESTABLISHED
        logger.debug("TLX client handshake complete")
        return []

    def record_layer(self) -> RecordLayer:
        if not self.established:
            raise ProtocolViolation("no session key before the handshake completes")
        return RecordLayer(self.session_key, DIRECTION_CLIENT_TO_SERVER)


class ServerState(str, Enum):
    WAIT_CLIENT_HELLO = "wait_client_hello"
    WAIT_KEY_EXCHANGE = "wait_key_exchange"
    WAIT_CHANGE_CIPHER_SPEC = "wait_change_cipher_spec"
    WAIT_FINISHED = "wait_finished"
    WAIT_BIND = "wait_bind"
    ESTABLISHED = "established"


class TlxServerHandshake:
    """TLX server, optionally SPX aware.

    Args:
        entropy: randomness for the server random and DH key
        signing_key: Ed25519 certificate key
        certificate: certificate sent to clients
        cert_size: padded certificate size on the wire
        spx_policy: when set, SPX requests get an offer and the server
            waits for the edge's bind before finishing; otherwise they are
            answered "Not Capable"
    """

    def __init__(
        self,
        entropy: Entropy,
        signing_key: KeyPair,
        certificate: Certificate,
        cert_size: int = DEFAULT_CERT_SIZE,
        spx_policy=None,
    ):
        self.entropy = entropy
        self.signing_key = signing_key
        self.certificate = certificate
        self.cert_size = cert_size
        self.spx_policy = spx_policy
        self.spx = None
        self.state = ServerState.WAIT_CLIENT_HELLO
        self.transcript = Transcript()
        self.client_random = b""
        self.server_random = b""
        self.session_key: Optional[SymmetricKey] = None
        self.binding: Optional[bytes] = None
        self._ephemeral: Optional[KeyPair] = None

    @property
    def established(self) -> bool:
        return self.state is ServerState.ESTABLISHED

    @property
    def awaiting_bind(self) -> bool:
        return self.state is ServerState.WAIT_BIND

    def _send(self, msg: WireMessage) -> WireMessage:
        self.transcript = self.transcript.absorb(without_spx(msg))
        return msg

    def receive(self, msg: WireMessage) -> List[WireMessage]:
        """Process one client message (handshake or SPX bind) and return the reply.

        Raises:
            ProtocolViolation: unexpected message
            FinishedMismatch: client Finished does not verify
            AttestationInvalid: the edge's bind was rejected
        """
        if self.spx is not None and msg.msg_type is self.spx.bind_frame_type:
            return self._on_bind(msg)
        if msg.is_spx_internal:
            raise ProtocolViolation(f"unexpected {msg.msg_type.name} in state {self.state.value}")

        if self.state is ServerState.WAIT_CLIENT_HELLO and msg.msg_type is MsgType.CLIENT_HELLO:
            return self._on_client_hello(msg)

        if self.state is ServerState.WAIT_KEY_EXCHANGE and msg.msg_type is MsgType.CLIENT_KEY_EXCHANGE:
            if len(msg.payload) != KEY_SIZE:
                raise WireError("malformed ClientKeyExchange")
            self.session_key = derive_session_key(
                dh(self._ephemeral, msg.payload), self.client_random, self.server_random
            )
            self._ephemeral = None
            self.transcript = self.transcript.absorb(msg)
            self.state = ServerState.WAIT_CHANGE_CIPHER_SPEC
            return []

        if self.state is ServerState.WAIT_CHANGE_CIPHER_SPEC and msg.msg_type is MsgType.CHANGE_CIPHER_SPEC:
            self.transcript = self.transcript.absorb(msg)
            self.state = ServerState.WAIT_FINISHED
            return []

        if self.state is ServerState.WAIT_FINISHED and msg.msg_type is MsgType.FINISHED:
            check_finished(
                self.session_key,
                CLIENT_FINISHED_LABEL,
                self.transcript.digest,
                DIRECTION_CLIENT_TO_SERVER,
                msg.payload,
            )
            self.transcript = self.transcript.absorb(msg)
            self.binding = self.transcript.digest
            if self.spx is not None:
                self.state = ServerState.WAIT_BIND
                logger.debug("client Finished verified, waiting for the edge to bind")
                return []
            return self._finish()

        raise ProtocolViolation(f"server in state {self.state.value} got {msg.msg_type.name}")

    def _on_client_hello(self, msg: WireMessage) -> List[WireMessage]:
        hello, extensions = Hello.from_payload(msg.payload)
        if hello.suite != SUITE_X25519_CHACHA20_POLY1305_SHA256:
            raise ProtocolViolation(f"client offered unknown suite {hello.suite:#06x}")
        self.client_random = hello.random
        self.transcript = self.transcript.absorb(without_spx(msg))
        self.server_random = self.entropy.bytes(RANDOM_SIZE)

        answer = []
        request_ext = find_extension(extensions, EXT_SPX_REQUEST)
        if request_ext is not None:
            answer = [self._answer_spx(request_ext, msg)]

        self._ephemeral = generate_keypair(self.entropy)
        flight = [
            self._send(WireMessage(MsgType.SERVER_HELLO, Hello(self.server_random).to_payload(answer))),
            self._send(WireMessage(MsgType.CERTIFICATE, self.certificate.to_bytes(self.cert_size))),
            self._send(
                server_key_exchange(
                    self.signing_key, self.client_random, self.server_random, self._ephemeral.public
                )
            ),
            self._send(SERVER_HELLO_DONE),
        ]
        self.state = ServerState.WAIT_KEY_EXCHANGE
        return flight

    def _answer_spx(self, request_ext: Extension, client_hello: WireMessage) -> Extension:
        if self.spx_policy is None:
            logger.debug("SPX requested but not enabled, answering Not Capable")
            return SpxOffer.not_capable().to_extension()
        request = SpxRequest.from_extension(request_ext)
        self.spx = self.spx_policy.open_session(request, offer_context(client_hello))
        return self.spx.offer.to_extension()

    def _on_bind(self, msg: WireMessage) -> List[WireMessage]:
        if self.state is not ServerState.WAIT_BIND:
            raise ProtocolViolation(f"bind in state {self.state.value}")
        self.spx.accept_bind(msg, self.binding)
        grant = self.spx.issue_grant(self.session_key.bytes)
        return [grant] + self._finish()

    def _finish(self) -> List[WireMessage]:
        flight = [self._send(CHANGE_CIPHER_SPEC)]
        fin = finished(self.session_key, SERVER_FINISHED_LABEL, self.transcript.digest, DIRECTION_SERVER_TO_CLIENT)
        flight.append(self._send(fin))
        self.state = ServerState.ESTABLISHED
        return flight

    def record_layer(self) -> RecordLayer:
        if not self.established:
            raise ProtocolViolation("no session key before the handshake completes")
        return RecordLayer(self.session_key, DIRECTION_SERVER_TO_CLIENT)

    def close(self) -> None:
        if self.spx is not None:
            self.spx.close()
