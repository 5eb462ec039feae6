"""Running handshake transcript with SPX exclusion."""

from dataclasses import dataclass

from ..crypto_core import hash as sha256
from .extensions import SPX_EXTENSION_TYPES, strip_extensions
from .frames import MsgType, WireMessage, encode

# Message types whose payload carries an extension block.
EXTENSIBLE_TYPES = frozenset({MsgType.CLIENT_HELLO, MsgType.SERVER_HELLO, MsgType.PROLOGUE})

EMPTY_DIGEST = sha256(b"")


def without_spx(msg: WireMessage) -> WireMessage:
    """Return ``msg`` with any SPX extensions removed from its payload."""
    if msg.msg_type not in EXTENSIBLE_TYPES:
        return msg
    stripped = strip_extensions(msg.payload, SPX_EXTENSION_TYPES)
    if stripped == msg.payload:
        return msg
    return WireMessage(msg.msg_type, stripped)


@dataclass(frozen=True)
class Transcript:
    """Immutable hash chain over encoded frames.

    ``running`` starts at SHA-256 of the empty string and becomes
    ``SHA-256(running || encode(msg))`` for every absorbed frame.
    """

    running: bytes = EMPTY_DIGEST
    count: int = 0

    def absorb(self, msg: WireMessage) -> "Transcript":
        return transcript_absorb(self, msg)

    @property
    def digest(self) -> bytes:
        return self.running


def transcript_absorb(t: Transcript, msg: WireMessage) -> Transcript:
    """Absorb one frame; SPX-internal frames leave the transcript unchanged."""
    if msg.is_spx_internal:
        return t
    return Transcript(sha256(t.running + encode(msg)), t.count + 1)
