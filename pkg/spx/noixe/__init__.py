"""NoiXe: Noise-framework handshakes with prologue-based SPX detection."""

from .adapter import NOIXE_PROTOCOL, NoiseHandlerAdapter, noise_adapter_factory, protocol_id
from .endpoints import NoiseClient, NoiseServer, NoiseSplitProxy
from .handshake import MAX_MESSAGE, NoiseHandshakeState, Role
from .patterns import PATTERNS, HandshakePattern, MessagePattern, Token, find_pattern, pattern_by_name
from .prologue import (
    DEFAULT_VERSIONS,
    UNKNOWN,
    Unknown,
    parse_prologue,
    prologue_detect,
    prologue_encode,
    prologue_frame,
    prologue_versions,
)
from .session import GRANT_SECRET_SIZE, NoiseInitiator, NoiseResponder, Transport, record_size
from .symmetric import CipherState, SymmetricState, noise_nonce, protocol_name

__all__ = [
    "NOIXE_PROTOCOL",
    "NoiseHandlerAdapter",
    "noise_adapter_factory",
    "protocol_id",
    "NoiseClient",
    "NoiseServer",
    "NoiseSplitProxy",
    "MAX_MESSAGE",
    "NoiseHandshakeState",
    "Role",
    "PATTERNS",
    "HandshakePattern",
    "MessagePattern",
    "Token",
    "find_pattern",
    "pattern_by_name",
    "DEFAULT_VERSIONS",
    "UNKNOWN",
    "Unknown",
    "parse_prologue",
    "prologue_detect",
    "prologue_encode",
    "prologue_frame",
    "prologue_versions",
    "GRANT_SECRET_SIZE",
    "NoiseInitiator",
    "NoiseResponder",
    "Transport",
    "record_size",
    "CipherState",
    "SymmetricState",
    "noise_nonce",
    "protocol_name",
]
