"""Sans-IO NoiXe sessions: prologue exchange, handshake and transport."""

import logging
from typing import List, Optional, Sequence, Tuple

from ..crypto_core import HASH_SIZE, TAG_SIZE, Entropy, KeyPair, generate_keypair
from ..exceptions import CertMismatch, ProtocolViolation, UnsupportedPattern
from ..spx_core.messages import SpxOffer, SpxRequest, offer_context
from ..wire import EXT_SPX_REQUEST, MsgType, WireMessage, find_extension
from .handshake import MAX_MESSAGE, NoiseHandshakeState, Role
from .patterns import HandshakePattern
from .prologue import DEFAULT_VERSIONS, parse_prologue, prologue_detect, prologue_encode, prologue_frame
from .symmetric import CipherState

logger = logging.getLogger(__name__)

# k1 || k2 || ck || h
GRANT_SECRET_SIZE = 4 * HASH_SIZE


def record_size(max_message: int = MAX_MESSAGE) -> int:
    """Largest plaintext that fits one transport message."""
    return max_message - TAG_SIZE


class Transport:
    """Post-handshake cipher pair for one party."""

    def __init__(self, send: CipherState, recv: CipherState):
        self.send = send
        self.recv = recv

    @classmethod
    def from_split(cls, split: Tuple[CipherState, CipherState], role: Role) -> "Transport":
        c1, c2 = split
        return cls(c1, c2) if role is Role.INITIATOR else cls(c2, c1)

    def seal(self, data: bytes) -> WireMessage:
        return WireMessage(MsgType.APPLICATION_DATA, self.send.encrypt_with_ad(b"", data))

    def open(self, payload: bytes) -> bytes:
        """Raises AuthFailure."""
        return self.recv.decrypt_with_ad(b"", payload)


def _handshake_frame(data: bytes) -> WireMessage:
    return WireMessage(MsgType.NOISE_HANDSHAKE, data)


class NoiseInitiator:
    """Unmodified NoiXe client.

    Args:
        pattern: handshake pattern to announce
        entropy: randomness for ephemeral (and generated static) keys
        static: client static key for patterns that send one
        remote_static: server static key for patterns with a pre-message
        pin: expected server static key for patterns that transmit it
    """

    def __init__(
        self,
        pattern: HandshakePattern,
        entropy: Entropy,
        static: Optional[KeyPair] = None,
        remote_static: Optional[bytes] = None,
        pin: Optional[bytes] = None,
        versions: Sequence[int] = DEFAULT_VERSIONS,
        max_message: int = MAX_MESSAGE,
    ):
        if static is None and pattern.initiator_has_static:
            static = generate_keypair(entropy.spawn("static"))
        self.pattern = pattern
        self.pin = pin
        self.body = prologue_encode(pattern, versions)
        self.handshake = NoiseHandshakeState(
            pattern,
            Role.INITIATOR,
            prologue=self.body,
            s=static,
            rs=remote_static,
            entropy=entropy,
            max_message=max_message,
        )
        self.transport: Optional[Transport] = None
        self._accepted = False

    @property
    def established(self) -> bool:
        return self.transport is not None

    def start(self) -> List[WireMessage]:
        return [prologue_frame(self.body), _handshake_frame(self.handshake.write_message())]

    def receive(self, msg: WireMessage) -> List[WireMessage]:
        """Raises ProtocolViolation, CertMismatch or AuthFailure."""
        if msg.msg_type is MsgType.PROLOGUE:
            if self._accepted:
                raise ProtocolViolation("second prologue from the server")
            body, extensions = parse_prologue(msg)
            if extensions:
                raise ProtocolViolation("server sent an extension the client did not offer")
            if body != self.body:
                raise ProtocolViolation("server accepted a different protocol")
            self._accepted = True
            return []
        if msg.msg_type is not MsgType.NOISE_HANDSHAKE or not self._accepted:
            raise ProtocolViolation(f"client did not expect {msg.msg_type.name}")
        self.handshake.read_message(msg.payload)
        rs = self.handshake.rs
        if self.pin is not None and rs is not None and rs != self.pin:
            raise CertMismatch("server static key does not match the pinned key")
        out = []
        while self.handshake.is_my_turn:
            out.append(_handshake_frame(self.handshake.write_message()))
        if self.handshake.complete:
            self.transport = Transport.from_split(self.handshake.split(), Role.INITIATOR)
            logger.debug(f"Noise_{self.pattern.name} initiator established")
        return out

    def session_key_bytes(self) -> bytes:
        return self.transport.send.k.bytes + self.transport.recv.k.bytes


class NoiseResponder:
    """NoiXe server side of one connection, optionally SPX aware.

    With an SPX session the responder holds back any message written after
    the bind point until the edge has bound, and issues the grant once its
    handshake is complete: together with its final message when it sends
    the last one, otherwise right after reading the client's.
    """

    def __init__(
        self,
        pattern: HandshakePattern,
        entropy: Entropy,
        static: KeyPair,
        spx_policy=None,
        max_message: int = MAX_MESSAGE,
    ):
        self.pattern = pattern
        self.entropy = entropy
        self.static = static
        self.spx_policy = spx_policy
        self.max_message = max_message
        self.spx = None
        self.handshake: Optional[NoiseHandshakeState] = None
        self.binding: Optional[bytes] = None
        self.transport: Optional[Transport] = None

    @property
    def established(self) -> bool:
        return self.transport is not None

    def receive(self, msg: WireMessage) -> List[WireMessage]:
        """Raises ProtocolViolation, UnsupportedPattern, AuthFailure or AttestationInvalid."""
        if self.spx is not None and msg.msg_type is self.spx.bind_frame_type:
            return self._on_bind(msg)
        if msg.msg_type is MsgType.PROLOGUE:
            return self._on_prologue(msg)
        if msg.msg_type is not MsgType.NOISE_HANDSHAKE or self.handshake is None:
            raise ProtocolViolation(f"server did not expect {msg.msg_type.name}")
        self.handshake.read_message(msg.payload)
        self._note_binding()
        return self._progress()

    def _on_prologue(self, msg: WireMessage) -> List[WireMessage]:
        if self.handshake is not None:
            raise ProtocolViolation("second prologue from the client")
        body, extensions = parse_prologue(msg)
        detected = prologue_detect(body)
        if not detected:
            raise UnsupportedPattern("prologue names no supported Noise protocol")
        if detected.name != self.pattern.name:
            raise UnsupportedPattern(f"client wants Noise_{detected.name}, server speaks Noise_{self.pattern.name}")
        self.handshake = NoiseHandshakeState(
            self.pattern,
            Role.RESPONDER,
            prologue=body,
            s=self.static,
            entropy=self.entropy,
            max_message=self.max_message,
        )
        answer = []
        request_ext = find_extension(extensions, EXT_SPX_REQUEST)
        if request_ext is not None:
            if self.spx_policy is None:
                answer = [SpxOffer.not_capable().to_extension()]
            else:
                request = SpxRequest.from_extension(request_ext)
                self.spx = self.spx_policy.open_session(request, offer_context(msg))
                answer = [self.spx.offer.to_extension()]
        return [prologue_frame(body, answer)]

    def _note_binding(self) -> None:
        bind_index = self.pattern.bind_index
        if self.binding is None and self.handshake.message_index > bind_index:
            self.binding = self.handshake.hashes[bind_index]

    def _may_write(self) -> bool:
        return self.spx is None or self.spx.bound or self.handshake.message_index <= self.pattern.bind_index

    def _progress(self) -> List[WireMessage]:
        out = []
        while self.handshake.is_my_turn and self._may_write():
            out.append(_handshake_frame(self.handshake.write_message()))
            self._note_binding()
        if not self.handshake.complete or self.transport is not None:
            return out
        if self.spx is None:
            self._establish()
        elif self.spx.bound:
            c1, c2 = self.handshake.split()
            secret = c1.k.bytes + c2.k.bytes + self.handshake.ck + self.handshake.h
            out.append(self.spx.issue_grant(secret))
            self._establish()
        return out

    def _establish(self) -> None:
        self.transport = Transport.from_split(self.handshake.split(), Role.RESPONDER)
        logger.debug(f"Noise_{self.pattern.name} responder established")

    def _on_bind(self, msg: WireMessage) -> List[WireMessage]:
        if self.binding is None:
            raise ProtocolViolation("bind before the first DH")
        self.spx.accept_bind(msg, self.binding)
        return self._progress()

    def session_key_bytes(self) -> bytes:
        return self.transport.recv.k.bytes + self.transport.send.k.bytes

    def close(self) -> None:
        if self.spx is not None:
            self.spx.close()
