"""Wire format: frames, extension blocks and transcripts."""

from .extensions import (
    EXT_SPX_REQUEST,
    EXT_SPX_RESPONSE,
    SPX_EXTENSION_TYPES,
    Extension,
    add_extension,
    find_extension,
    pack_body,
    strip_extensions,
    unpack_body,
)
from .frames import (
    FLAG_SPX_INTERNAL,
    HEADER_SIZE,
    MAX_PAYLOAD,
    SPX_INTERNAL_TYPES,
    Direction,
    FrameReader,
    MsgType,
    WireMessage,
    decode,
    decode_all,
    decode_prefix,
    encode,
    encode_all,
)
from .transcript import EMPTY_DIGEST, EXTENSIBLE_TYPES, Transcript, transcript_absorb, without_spx

__all__ = [
    "EXT_SPX_REQUEST",
    "EXT_SPX_RESPONSE",
    "SPX_EXTENSION_TYPES",
    "Extension",
    "add_extension",
    "find_extension",
    "pack_body",
    "strip_extensions",
    "unpack_body",
    "FLAG_SPX_INTERNAL",
    "HEADER_SIZE",
    "MAX_PAYLOAD",
    "SPX_INTERNAL_TYPES",
    "Direction",
    "FrameReader",
    "MsgType",
    "WireMessage",
    "decode",
    "decode_all",
    "decode_prefix",
    "encode",
    "encode_all",
    "EMPTY_DIGEST",
    "EXTENSIBLE_TYPES",
    "Transcript",
    "transcript_absorb",
    "without_spx",
]
