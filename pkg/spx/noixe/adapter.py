"""Edge-side NoiXe handler adapter."""

import logging
from typing import Dict, List, Optional, Tuple

from ..crypto_core import HASH_SIZE, SymmetricKey
from ..exceptions import AuthFailure, ProtocolViolation, WireError
from ..spx_core import AdapterFactory, ProtocolAdapter
from ..wire import Direction, MsgType, WireMessage
from .handshake import NoiseHandshakeState, Role
from .patterns import INITIATOR, RESPONDER, HandshakePattern
from .prologue import parse_prologue, prologue_detect
from .session import GRANT_SECRET_SIZE
from .symmetric import CipherState

logger = logging.getLogger(__name__)

NOIXE_PROTOCOL = "NoiXe"


def protocol_id(pattern: HandshakePattern) -> str:
    return f"{NOIXE_PROTOCOL}/{pattern.name}"


class NoiseHandlerAdapter(ProtocolAdapter):
    """Replicates a Noise handshake at the edge without any private key.

    Binds on ``h`` after the first message with a DH token. The grant carries
    both transport keys plus the final ``ck`` and ``h``; the ``h`` must match
    the handler's own replica before the keys are used.
    """

    def __init__(self, pattern: HandshakePattern, prologue: bytes, responder_static: Optional[bytes] = None):
        super().__init__()
        self.pattern = pattern
        self.protocol_id = protocol_id(pattern)
        self.handler = NoiseHandshakeState(pattern, Role.HANDLER, prologue=prologue, rs=responder_static)
        self._binding: Optional[bytes] = None
        self._ciphers: Dict[Direction, CipherState] = {}

    def expected_sequence(self) -> Dict[Direction, List[MsgType]]:
        return {
            direction: [MsgType.PROLOGUE] + [MsgType.NOISE_HANDSHAKE] * self.pattern.count(direction)
            for direction in (INITIATOR, RESPONDER)
        }

    def offer_carrier(self) -> MsgType:
        return MsgType.PROLOGUE

    def replicate(self, msg: WireMessage, direction: Direction) -> None:
        if msg.msg_type is not MsgType.NOISE_HANDSHAKE:
            return
        self.handler.replicate(msg.payload, direction)
        bind_index = self.pattern.bind_index
        if self._binding is None and self.handler.message_index > bind_index:
            self._binding = self.handler.hashes[bind_index]

    def at_bind_point(self) -> bool:
        return self._binding is not None

    def channel_binding(self) -> bytes:
        if self._binding is None:
            raise ProtocolViolation("no DH token relayed yet")
        return self._binding

    def secret_size(self) -> int:
        return GRANT_SECRET_SIZE

    def install_grant(self, secret: bytes) -> Tuple[SymmetricKey, Optional[SymmetricKey]]:
        if len(secret) != GRANT_SECRET_SIZE:
            raise AuthFailure(f"NoiXe grant must be {GRANT_SECRET_SIZE} bytes, got {len(secret)}")
        k1, k2, ck, h = (secret[i:i + HASH_SIZE] for i in range(0, GRANT_SECRET_SIZE, HASH_SIZE))
        if not self.handler.complete:
            raise ProtocolViolation("grant before the handshake completed")
        self.handler.adopt(ck, h)
        c1, c2 = self.handler.split()
        if c1.k.bytes != k1 or c2.k.bytes != k2:
            raise AuthFailure("granted transport keys do not follow from the granted chaining key")
        self._ciphers = {INITIATOR: c1, RESPONDER: c2}
        return SymmetricKey(k1), SymmetricKey(k2)

    def open_record(self, direction: Direction, payload: bytes) -> bytes:
        if direction not in self._ciphers:
            raise ProtocolViolation("record before the transport keys were granted")
        return self._ciphers[direction].decrypt_with_ad(b"", payload)


def noise_adapter_factory(responder_static: Optional[bytes] = None) -> AdapterFactory:
    """Detector that claims connections opening with a recognised prologue.

    Args:
        responder_static: the server's Noise static key, needed to replicate
            patterns where the client already knows it
    """

    def factory(first_msg: WireMessage) -> Optional[NoiseHandlerAdapter]:
        if first_msg.msg_type is not MsgType.PROLOGUE:
            return None
        try:
            body, _ = parse_prologue(first_msg)
        except WireError:
            return None
        pattern = prologue_detect(body)
        if not pattern:
            logger.info("prologue names no supported Noise pattern")
            return None
        if pattern.needs_responder_static and responder_static is None:
            logger.info(f"Noise_{pattern.name} needs the server static key, which this edge lacks")
            return None
        return NoiseHandlerAdapter(pattern, body, responder_static)

    return factory
