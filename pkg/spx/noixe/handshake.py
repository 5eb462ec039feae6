"""Noise HandshakeState for initiators, responders and the SPX handler.

The handler sits between the two parties. It never owns a private key, so it
replicates ``h`` from the bytes it relays and knows ``ck`` only until the
first DH token; the rest arrives with the grant.
"""

import logging
from enum import Enum
from typing import List, Optional, Tuple

from ..crypto_core import KEY_SIZE, TAG_SIZE, Entropy, KeyPair, dh, generate_keypair
from ..exceptions import AuthFailure, OutOfTurn, Oversized, ProtocolViolation, Truncated
from ..wire import Direction
from .patterns import INITIATOR, RESPONDER, HandshakePattern, Token
from .symmetric import CipherState, SymmetricState, protocol_name

logger = logging.getLogger(__name__)

MAX_MESSAGE = 65535


class Role(str, Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"
    HANDLER = "handler"


class NoiseHandshakeState:
    """One party's (or the handler's) view of a Noise handshake.

    Args:
        pattern: handshake pattern
        role: initiator, responder or handler
        prologue: bytes both ends mix into ``h`` before the first message
        s: local static key pair (initiator or responder only)
        rs: remote static public key, for patterns with a responder pre-message
        entropy: source for ephemeral keys
        max_message: handshake message size limit

    Raises:
        ValueError: keys missing for the pattern, or private keys given to a handler
    """

    def __init__(
        self,
        pattern: HandshakePattern,
        role: Role,
        prologue: bytes = b"",
        s: Optional[KeyPair] = None,
        rs: Optional[bytes] = None,
        entropy: Optional[Entropy] = None,
        max_message: int = MAX_MESSAGE,
    ):
        if role is Role.HANDLER and s is not None:
            raise ValueError("the handler never holds a private key")
        self.pattern = pattern
        self.role = role
        self.entropy = entropy or Entropy()
        self.max_message = max_message
        self.s = s
        self.e: Optional[KeyPair] = None
        self.rs = rs
        self.re: Optional[bytes] = None
        self.symmetric = SymmetricState(protocol_name(pattern.name))
        self.symmetric.mix_hash(prologue)
        self.message_index = 0
        self.hashes: List[bytes] = []
        # Handler only: a DH has happened, so the handshake cipher is keyed.
        self._keyed = False

        if pattern.needs_responder_static:
            responder_static = s.public if role is Role.RESPONDER and s is not None else rs
            if responder_static is None:
                raise ValueError(f"Noise_{pattern.name} needs the responder's static key")
            self.symmetric.mix_hash(responder_static)

    # State accessors

    @property
    def h(self) -> bytes:
        return self.symmetric.h

    @property
    def ck(self) -> Optional[bytes]:
        """Chaining key; ``None`` for a handler between the first DH and the grant."""
        return self.symmetric.ck

    @property
    def complete(self) -> bool:
        return self.message_index >= len(self.pattern)

    @property
    def next_direction(self) -> Optional[Direction]:
        if self.complete:
            return None
        return self.pattern.messages[self.message_index].direction

    @property
    def own_direction(self) -> Direction:
        return INITIATOR if self.role is Role.INITIATOR else RESPONDER

    @property
    def is_my_turn(self) -> bool:
        return self.role is not Role.HANDLER and self.next_direction is self.own_direction

    def _tokens(self, direction: Direction) -> Tuple[Token, ...]:
        if self.complete:
            raise OutOfTurn("handshake already complete")
        message = self.pattern.messages[self.message_index]
        if message.direction is not direction:
            raise OutOfTurn(
                f"message {self.message_index} of Noise_{self.pattern.name} goes {message.direction.arrow}"
            )
        return message.tokens

    def _advance(self) -> None:
        self.message_index += 1
        self.hashes.append(self.h)

    def _dh(self, token: Token) -> bytes:
        initiator = self.role is Role.INITIATOR
        if token is Token.EE:
            return dh(self.e, self.re)
        if token is Token.ES:
            return dh(self.e, self.rs) if initiator else dh(self.s, self.re)
        if token is Token.SE:
            return dh(self.s, self.re) if initiator else dh(self.e, self.rs)
        return dh(self.s, self.rs)

    # Parties

    def write_message(self, payload: bytes = b"") -> bytes:
        """Raises OutOfTurn or Oversized."""
        if self.role is Role.HANDLER:
            raise ProtocolViolation("the handler does not write handshake messages")
        out = bytearray()
        for token in self._tokens(self.own_direction):
            if token is Token.E:
                self.e = generate_keypair(self.entropy)
                out += self.e.public
                self.symmetric.mix_hash(self.e.public)
            elif token is Token.S:
                if self.s is None:
                    raise ValueError(f"Noise_{self.pattern.name} needs a local static key")
                out += self.symmetric.encrypt_and_hash(self.s.public)
            else:
                self.symmetric.mix_key(self._dh(token))
        out += self.symmetric.encrypt_and_hash(payload)
        if len(out) > self.max_message:
            raise Oversized(f"handshake message of {len(out)} bytes exceeds {self.max_message}")
        self._advance()
        return bytes(out)

    def read_message(self, message: bytes) -> bytes:
        """Process a peer message and return its payload.

        Raises:
            OutOfTurn: not the peer's turn
            Oversized / Truncated: bad message length
            AuthFailure: an encrypted field does not verify
        """
        if self.role is Role.HANDLER:
            raise ProtocolViolation("the handler replicates, it does not read")
        if len(message) > self.max_message:
            raise Oversized(f"handshake message of {len(message)} bytes exceeds {self.max_message}")
        peer = RESPONDER if self.role is Role.INITIATOR else INITIATOR
        offset = 0
        for token in self._tokens(peer):
            if token is Token.E:
                self.re = _take(message, offset, KEY_SIZE)
                offset += KEY_SIZE
                self.symmetric.mix_hash(self.re)
            elif token is Token.S:
                size = KEY_SIZE + (TAG_SIZE if self.symmetric.cipher.has_key else 0)
                self.rs = self.symmetric.decrypt_and_hash(_take(message, offset, size))
                offset += size
            else:
                self.symmetric.mix_key(self._dh(token))
        payload = self.symmetric.decrypt_and_hash(message[offset:])
        self._advance()
        return payload

    def split(self) -> Tuple[CipherState, CipherState]:
        """Transport ciphers (initiator-to-responder, responder-to-initiator)."""
        if not self.complete:
            raise ProtocolViolation("split before the handshake completes")
        if self.ck is None:
            raise ProtocolViolation("chaining key unknown; the grant has not been installed")
        return self.symmetric.split()

    # Handler

    def replicate(self, message: bytes, direction: Direction) -> None:
        """Track ``h`` over a relayed handshake message.

        Raises:
            OutOfTurn: message goes the wrong way for the pattern
            Truncated: message shorter than its tokens require
        """
        if self.role is not Role.HANDLER:
            raise ProtocolViolation("only the handler replicates")
        offset = 0
        for token in self._tokens(direction):
            if token is Token.E:
                self.symmetric.mix_hash(_take(message, offset, KEY_SIZE))
                offset += KEY_SIZE
            elif token is Token.S:
                size = KEY_SIZE + (TAG_SIZE if self._keyed else 0)
                self.symmetric.mix_hash(_take(message, offset, size))
                offset += size
            else:
                self._keyed = True
                self.symmetric.ck = None
        if self._keyed and len(message) - offset < TAG_SIZE:
            raise Truncated("encrypted payload shorter than its tag")
        self.symmetric.mix_hash(message[offset:])
        self._advance()

    def adopt(self, ck: bytes, h: bytes) -> None:
        """Install the chaining key granted by the responder.

        Raises:
            AuthFailure: the granted ``h`` differs from the replicated one
        """
        if self.role is not Role.HANDLER:
            raise ProtocolViolation("only the handler adopts granted state")
        if h != self.h:
            raise AuthFailure("granted handshake hash does not match the replicated transcript")
        self.symmetric.ck = ck
        logger.debug(f"handler adopted chaining key after message {self.message_index}")


def _take(message: bytes, offset: int, size: int) -> bytes:
    if len(message) < offset + size:
        raise Truncated(f"handshake message needs {offset + size} bytes, has {len(message)}")
    return bytes(message[offset:offset + size])
