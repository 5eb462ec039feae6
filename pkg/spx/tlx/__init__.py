"""TLX: a TLS-1.2-shaped handshake with certificate authentication."""

from .adapter import CLIENT_SEQUENCE, SERVER_SEQUENCE, TLX_PROTOCOL_ID, TlxAdapter, tlx_adapter_factory
from .endpoints import DEFAULT_BLOCK_SIZE, TlxClient, TlxServer, TlxSplitProxy
from .handshake import ClientState, RecordLayer, ServerState, TlxClientHandshake, TlxServerHandshake
from .messages import (
    DEFAULT_CERT_SIZE,
    SUITE_NAMES,
    SUITE_X25519_CHACHA20_POLY1305_SHA256,
    TLX_VERSION,
    Certificate,
    Hello,
    check_finished,
    derive_session_key,
    finished,
)

__all__ = [
    "CLIENT_SEQUENCE",
    "SERVER_SEQUENCE",
    "TLX_PROTOCOL_ID",
    "TlxAdapter",
    "tlx_adapter_factory",
    "DEFAULT_BLOCK_SIZE",
    "TlxClient",
    "TlxServer",
    "TlxSplitProxy",
    "ClientState",
    "RecordLayer",
    "ServerState",
    "TlxClientHandshake",
    "TlxServerHandshake",
    "DEFAULT_CERT_SIZE",
    "SUITE_NAMES",
    "SUITE_X25519_CHACHA20_POLY1305_SHA256",
    "TLX_VERSION",
    "Certificate",
    "Hello",
    "check_finished",
    "derive_session_key",
    "finished",
]
