"""Protocol-agnostic SPX engine: edge operations, server policy and accounting."""

from ..see_sim import SpxSession
from .accounting import expected_extra_bytes, extra_rtts, flights, link_bytes, spx_bytes
from .adapter import AdapterFactory, ProtocolAdapter
from .edge import PlaintextObserver, SpxEdgeFunction
from .messages import (
    OfferStatus,
    ServerMode,
    SpxOffer,
    SpxRequest,
    grant_message_bytes,
    offer_context,
    open_grant,
    parse_grant,
    seal_grant,
)
from .operations import bind, detect, forward, grant_accept, ready_to_bind, relay, resume
from .server import SpxServerPolicy, SpxServerSession
from .state import (
    PASS_THROUGH,
    UNSUPPORTED,
    Detected,
    EdgeTrust,
    PassThrough,
    Phase,
    SpxEdgeState,
    Unsupported,
    can_transition,
)

__all__ = [
    "SpxSession",
    "expected_extra_bytes",
    "extra_rtts",
    "flights",
    "link_bytes",
    "spx_bytes",
    "AdapterFactory",
    "ProtocolAdapter",
    "PlaintextObserver",
    "SpxEdgeFunction",
    "OfferStatus",
    "ServerMode",
    "SpxOffer",
    "SpxRequest",
    "grant_message_bytes",
    "offer_context",
    "open_grant",
    "parse_grant",
    "seal_grant",
    "bind",
    "detect",
    "forward",
    "grant_accept",
    "ready_to_bind",
    "relay",
    "resume",
    "SpxServerPolicy",
    "SpxServerSession",
    "PASS_THROUGH",
    "UNSUPPORTED",
    "Detected",
    "EdgeTrust",
    "PassThrough",
    "Phase",
    "SpxEdgeState",
    "Unsupported",
    "can_transition",
]
