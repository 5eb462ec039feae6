"""Prologue frames: how a NoiXe client announces its protocol.

The prologue body is the ASCII protocol name, a zero byte and the supported
protocol versions, one byte each. Both ends mix the body into ``h``; the
edge reads it to detect the pattern.
"""

import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

from ..wire import Extension, MsgType, WireMessage, pack_body, unpack_body
from .patterns import HandshakePattern, find_pattern
from .symmetric import CIPHER_NAME, DH_NAME, HASH_NAME, protocol_name

DEFAULT_VERSIONS = (1,)

_PROLOGUE_RE = re.compile(
    rb"^Noise_([A-Z0-9]+)_"
    + re.escape(f"{DH_NAME}_{CIPHER_NAME}_{HASH_NAME}".encode("ascii"))
    + rb"\x00([\x01-\xff]+)$",
    re.DOTALL,
)


@dataclass(frozen=True)
class Unknown:
    """Prologue that names no supported pattern."""

    def __bool__(self) -> bool:
        return False


UNKNOWN = Unknown()


def prologue_encode(pattern: HandshakePattern, versions: Sequence[int] = DEFAULT_VERSIONS) -> bytes:
    if not versions or any(not 1 <= v <= 255 for v in versions):
        raise ValueError("versions must be a non-empty list of values in 1..255")
    return protocol_name(pattern.name) + b"\x00" + bytes(versions)


def prologue_detect(body: bytes) -> Union[HandshakePattern, Unknown]:
    match = _PROLOGUE_RE.match(body)
    if match is None:
        return UNKNOWN
    pattern = find_pattern(match.group(1).decode("ascii"))
    return pattern if pattern is not None else UNKNOWN


def prologue_versions(body: bytes) -> Tuple[int, ...]:
    match = _PROLOGUE_RE.match(body)
    return tuple(match.group(2)) if match else ()


def prologue_frame(body: bytes, extensions: Sequence[Extension] = ()) -> WireMessage:
    return WireMessage(MsgType.PROLOGUE, pack_body(body, list(extensions)))


def parse_prologue(msg: WireMessage) -> Tuple[bytes, List[Extension]]:
    """Raises WireError."""
    return unpack_body(msg.payload)
