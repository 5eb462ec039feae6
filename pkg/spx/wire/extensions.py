"""Extension block carried by hello and prologue payloads.

Layout::

    u16 body_len | body | u16 ext_len | (u8 type | u16 len | value)*

A vanilla message always carries the block with ``ext_len == 0``, so removing
every SPX extension from a relayed message restores the vanilla bytes.
"""

import struct
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from ..exceptions import Truncated, WireError

EXT_SPX_REQUEST = 0xE0
EXT_SPX_RESPONSE = 0xE1

SPX_EXTENSION_TYPES = frozenset({EXT_SPX_REQUEST, EXT_SPX_RESPONSE})

_U16 = struct.Struct(">H")
_TLV = struct.Struct(">BH")


@dataclass(frozen=True)
class Extension:
    ext_type: int
    value: bytes

    @property
    def size(self) -> int:
        return _TLV.size + len(self.value)


def pack_body(body: bytes, extensions: Iterable[Extension] = ()) -> bytes:
    if len(body) > 0xFFFF:
        raise WireError("body too long for a u16 length")
    ext_bytes = b"".join(
        _TLV.pack(ext.ext_type, len(ext.value)) + ext.value for ext in extensions
    )
    if len(ext_bytes) > 0xFFFF:
        raise WireError("extension block too long")
    return _U16.pack(len(body)) + body + _U16.pack(len(ext_bytes)) + ext_bytes


def unpack_body(payload: bytes) -> Tuple[bytes, List[Extension]]:
    """Split a payload into its body and extension list.

    Raises:
        Truncated: a declared length runs past the payload
        WireError: bytes left over after the extension block
    """
    if len(payload) < 2:
        raise Truncated("missing body length")
    (body_len,) = _U16.unpack_from(payload, 0)
    offset = 2 + body_len
    if len(payload) < offset + 2:
        raise Truncated("body or extension length runs past payload")
    body = payload[2:offset]
    (ext_len,) = _U16.unpack_from(payload, offset)
    offset += 2
    end = offset + ext_len
    if len(payload) < end:
        raise Truncated("extension block runs past payload")
    if len(payload) != end:
        raise WireError("trailing bytes after extension block")

    extensions = []
    while offset < end:
        if end - offset < _TLV.size:
            raise Truncated("extension header cut short")
        ext_type, length = _TLV.unpack_from(payload, offset)
        offset += _TLV.size
        if offset + length > end:
            raise Truncated("extension value runs past block")
        extensions.append(Extension(ext_type, bytes(payload[offset:offset + length])))
        offset += length
    return bytes(body), extensions


def find_extension(extensions: Sequence[Extension], ext_type: int) -> Optional[Extension]:
    for ext in extensions:
        if ext.ext_type == ext_type:
            return ext
    return None


def add_extension(payload: bytes, extension: Extension) -> bytes:
    body, extensions = unpack_body(payload)
    return pack_body(body, [*extensions, extension])


def strip_extensions(payload: bytes, types: Iterable[int] = SPX_EXTENSION_TYPES) -> bytes:
    """Remove extensions of the given types, keeping everything else."""
    drop = set(types)
    body, extensions = unpack_body(payload)
    return pack_body(body, [e for e in extensions if e.ext_type not in drop])
