"""Tagged, length-prefixed frames shared by TLX, NoiXe and SPX messages.

Frame layout (big-endian)::

    tag (u8) | flags (u8) | length (u32) | payload (length bytes)

Flag bit 0 marks SPX-internal frames, which only ever travel between an edge
function and a server. The bit is derived from the tag, so a frame whose flag
disagrees with its tag is malformed.
"""

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Tuple

from ..exceptions import Oversized, Truncated, UnknownTag, WireError

HEADER_SIZE = 6
MAX_PAYLOAD = 1 << 24
FLAG_SPX_INTERNAL = 0x01

_HEADER = struct.Struct(">BBI")


class MsgType(IntEnum):
    """Registered tag table."""

    # TLX handshake
    CLIENT_HELLO = 0x01
    SERVER_HELLO = 0x02
    CERTIFICATE = 0x03
    SERVER_KEY_EXCHANGE = 0x04
    SERVER_HELLO_DONE = 0x05
    CLIENT_KEY_EXCHANGE = 0x06
    CHANGE_CIPHER_SPEC = 0x07
    FINISHED = 0x08

    # NoiXe handshake
    PROLOGUE = 0x10
    NOISE_HANDSHAKE = 0x11

    # Shared
    APPLICATION_DATA = 0x20
    ABORT = 0x21

    # SPX-internal
    SPX_ATTESTATION = 0x30
    SPX_GRANT = 0x31
    SPX_ATTEST_WITH_KEY = 0x32
    SPX_REGISTER = 0x33
    SPX_CHALLENGE = 0x34
    SPX_GRANT_REQUEST = 0x35


SPX_INTERNAL_TYPES = frozenset({
    MsgType.SPX_ATTESTATION,
    MsgType.SPX_GRANT,
    MsgType.SPX_ATTEST_WITH_KEY,
    MsgType.SPX_REGISTER,
    MsgType.SPX_CHALLENGE,
    MsgType.SPX_GRANT_REQUEST,
})


class Direction(IntEnum):
    """Direction of a frame relative to the secure session."""

    CLIENT_TO_SERVER = 0
    SERVER_TO_CLIENT = 1

    @property
    def arrow(self) -> str:
        return "->" if self is Direction.CLIENT_TO_SERVER else "<-"


def _coerce_tag(value: int) -> MsgType:
    try:
        return MsgType(value)
    except ValueError as exc:
        raise UnknownTag(f"unknown message tag 0x{int(value):02x}") from exc


@dataclass(frozen=True)
class WireMessage:
    """One frame. ``flags`` is derived from ``msg_type``."""

    msg_type: MsgType
    payload: bytes = b""
    flags: int = field(default=-1, compare=False)

    def __post_init__(self):
        tag = _coerce_tag(self.msg_type)
        expected = FLAG_SPX_INTERNAL if tag in SPX_INTERNAL_TYPES else 0
        if self.flags not in (-1, expected):
            raise WireError(
                f"flags 0x{self.flags:02x} do not match tag {tag.name}"
            )
        if len(self.payload) > MAX_PAYLOAD:
            raise Oversized(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")
        object.__setattr__(self, "msg_type", tag)
        object.__setattr__(self, "payload", bytes(self.payload))
        object.__setattr__(self, "flags", expected)

    @property
    def length(self) -> int:
        return len(self.payload)

    @property
    def is_spx_internal(self) -> bool:
        return bool(self.flags & FLAG_SPX_INTERNAL)

    @property
    def size(self) -> int:
        """Encoded size in bytes."""
        return HEADER_SIZE + len(self.payload)

    def __repr__(self) -> str:
        return f"WireMessage({self.msg_type.name}, {len(self.payload)}B)"


def encode(msg: WireMessage) -> bytes:
    """Serialize one frame."""
    return _HEADER.pack(int(msg.msg_type), msg.flags, len(msg.payload)) + msg.payload


def encode_all(msgs) -> bytes:
    return b"".join(encode(m) for m in msgs)


def decode_prefix(data: bytes) -> Tuple[WireMessage, int]:
    """Decode the frame at the start of ``data``.

    Returns:
        The message and the number of bytes it occupied.

    Raises:
        Truncated: header or payload incomplete
        UnknownTag: tag not registered
        Oversized: declared length above the cap
    """
    if len(data) < HEADER_SIZE:
        raise Truncated(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    tag, flags, length = _HEADER.unpack_from(data, 0)
    _coerce_tag(tag)
    if length > MAX_PAYLOAD:
        raise Oversized(f"declared length {length} exceeds {MAX_PAYLOAD}")
    end = HEADER_SIZE + length
    if len(data) < end:
        raise Truncated(f"frame declares {length} payload bytes, have {len(data) - HEADER_SIZE}")
    return WireMessage(tag, bytes(data[HEADER_SIZE:end]), flags), end


def decode(data: bytes) -> WireMessage:
    """Decode exactly one frame; trailing bytes are an error."""
    msg, consumed = decode_prefix(data)
    if consumed != len(data):
        raise WireError(f"{len(data) - consumed} trailing bytes after frame")
    return msg


def decode_all(data: bytes) -> List[WireMessage]:
    msgs = []
    offset = 0
    view = memoryview(data)
    while offset < len(data):
        msg, consumed = decode_prefix(view[offset:])
        msgs.append(msg)
        offset += consumed
    return msgs


class FrameReader:
    """Incremental decoder for byte streams."""

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> List[WireMessage]:
        """Append ``data`` and return every frame that is now complete."""
        self._buffer.extend(data)
        out = []
        offset = 0
        # The view must be released before the buffer is resized.
        with memoryview(self._buffer) as view:
            while True:
                try:
                    msg, consumed = decode_prefix(view[offset:])
                except Truncated:
                    break
                out.append(msg)
                offset += consumed
        del self._buffer[:offset]
        return out

    @property
    def pending(self) -> int:
        return len(self._buffer)
