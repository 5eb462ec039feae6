"""Edge-side TLX adapter: replicates the transcript from relayed bytes."""

import logging
from typing import Dict, List, Optional, Tuple

from ..crypto_core import DIRECTION_SERVER_TO_CLIENT, KEY_SIZE, SymmetricKey, aead_open, counter_nonce
from ..exceptions import AuthFailure, CertMismatch, ProtocolViolation, WireError
from ..spx_core import AdapterFactory, ProtocolAdapter
from ..wire import Direction, MsgType, Transcript, WireMessage
from .messages import SERVER_FINISHED_LABEL, Certificate, Hello, check_finished

logger = logging.getLogger(__name__)

TLX_PROTOCOL_ID = "TLX"

CLIENT_SEQUENCE = [
    MsgType.CLIENT_HELLO,
    MsgType.CLIENT_KEY_EXCHANGE,
    MsgType.CHANGE_CIPHER_SPEC,
    MsgType.FINISHED,
]
SERVER_SEQUENCE = [
    MsgType.SERVER_HELLO,
    MsgType.CERTIFICATE,
    MsgType.SERVER_KEY_EXCHANGE,
    MsgType.SERVER_HELLO_DONE,
    MsgType.CHANGE_CIPHER_SPEC,
    MsgType.FINISHED,
]


class TlxAdapter(ProtocolAdapter):
    """Replicated TLX state at the edge.

    The edge sees every handshake message, so it keeps the same transcript
    as both ends. It checks the certificate against the pinned server key,
    binds on the transcript after the client's Finished and, once granted
    the session key, verifies the server's Finished itself.
    """

    protocol_id = TLX_PROTOCOL_ID

    def __init__(self, server_pin: Optional[bytes] = None):
        super().__init__()
        self.server_pin = server_pin
        self.transcript = Transcript()
        self.client_random = b""
        self.server_random = b""
        self.session_key: Optional[SymmetricKey] = None
        self._bind_digest: Optional[bytes] = None
        self._record_seq: Dict[Direction, int] = {d: 1 for d in Direction}

    def expected_sequence(self) -> Dict[Direction, List[MsgType]]:
        return {Direction.CLIENT_TO_SERVER: CLIENT_SEQUENCE, Direction.SERVER_TO_CLIENT: SERVER_SEQUENCE}

    def offer_carrier(self) -> MsgType:
        return MsgType.SERVER_HELLO

    def replicate(self, msg: WireMessage, direction: Direction) -> None:
        if msg.msg_type is MsgType.CLIENT_HELLO:
            self.client_random = Hello.from_payload(msg.payload)[0].random
        elif msg.msg_type is MsgType.SERVER_HELLO:
            self.server_random = Hello.from_payload(msg.payload)[0].random
        elif msg.msg_type is MsgType.CERTIFICATE:
            cert = Certificate.from_bytes(msg.payload)
            if not cert.self_signed_ok():
                raise CertMismatch("certificate signature does not verify")
            if self.server_pin is not None and cert.public_key != self.server_pin:
                raise CertMismatch(f"certificate for {cert.subject!r} is not the provisioned server")
        elif msg.msg_type is MsgType.FINISHED and direction is Direction.SERVER_TO_CLIENT:
            if self.session_key is None:
                raise ProtocolViolation("server Finished before the session key was granted")
            check_finished(
                self.session_key,
                SERVER_FINISHED_LABEL,
                self.transcript.digest,
                DIRECTION_SERVER_TO_CLIENT,
                msg.payload,
            )
        self.transcript = self.transcript.absorb(msg)
        if msg.msg_type is MsgType.FINISHED and direction is Direction.CLIENT_TO_SERVER:
            self._bind_digest = self.transcript.digest

    def at_bind_point(self) -> bool:
        return self._bind_digest is not None

    def channel_binding(self) -> bytes:
        if self._bind_digest is None:
            raise ProtocolViolation("client Finished not relayed yet")
        return self._bind_digest

    def secret_size(self) -> int:
        return KEY_SIZE

    def install_grant(self, secret: bytes) -> Tuple[SymmetricKey, Optional[SymmetricKey]]:
        if len(secret) != KEY_SIZE:
            raise AuthFailure(f"TLX grant must be {KEY_SIZE} bytes, got {len(secret)}")
        self.session_key = SymmetricKey(secret)
        return self.session_key, None

    def open_record(self, direction: Direction, payload: bytes) -> bytes:
        if self.session_key is None:
            raise ProtocolViolation("record before the session key was granted")
        nonce = counter_nonce(self._record_seq[direction], int(direction))
        data = aead_open(self.session_key, nonce, b"", payload)
        self._record_seq[direction] += 1
        return data


def tlx_adapter_factory(server_pin: Optional[bytes] = None) -> AdapterFactory:
    """Detector that claims connections opening with a well-formed ClientHello."""

    def factory(first_msg: WireMessage) -> Optional[TlxAdapter]:
        if first_msg.msg_type is not MsgType.CLIENT_HELLO:
            return None
        try:
            Hello.from_payload(first_msg.payload)
        except WireError:
            logger.debug("ClientHello did not parse, not TLX")
            return None
        return TlxAdapter(server_pin)

    return factory
