"""The six SPX operations: detect, relay, bind, forward, grant and resume.

Each operation takes the per-connection :class:`SpxEdgeState` and returns the
frame(s) to send; none of them performs I/O.
"""

import logging
from typing import Optional, Sequence, Union

from ..crypto_core import key_id
from ..exceptions import AttestationInvalid, CertMismatch, NoNonce, ProtocolViolation
from ..see_sim import SpxSession, verify_report
from ..wire import (
    EXT_SPX_RESPONSE,
    Direction,
    WireMessage,
    add_extension,
    find_extension,
    unpack_body,
    without_spx,
)
from .adapter import AdapterFactory
from .messages import (
    ServerMode,
    SpxOffer,
    SpxRequest,
    attest_with_key_frame,
    attestation_frame,
    grant_request_frame,
    offer_context,
    open_grant,
    parse_grant,
)
from .state import PASS_THROUGH, UNSUPPORTED, Detected, PassThrough, Phase, SpxEdgeState, Unsupported

logger = logging.getLogger(__name__)

_RELAY_PHASES = frozenset({Phase.DETECTED, Phase.RELAYING, Phase.BOUND, Phase.ESTABLISHED})


def detect(
    state: SpxEdgeState,
    first_client_msg: WireMessage,
    adapters: Sequence[AdapterFactory],
) -> Union[Detected, PassThrough]:
    """Recognise the protocol from the client's opening message."""
    if state.phase is not Phase.IDLE:
        raise ProtocolViolation(f"detect in phase {state.phase.value}")
    for factory in adapters:
        adapter = factory(first_client_msg)
        if adapter is not None:
            state.adapter = adapter
            state.protocol_id = adapter.protocol_id
            state.context = offer_context(first_client_msg)
            state.advance(Phase.DETECTED)
            logger.info(f"[{state.session_id}] detected {adapter.protocol_id}")
            return Detected(adapter.protocol_id)
    state.pass_through = True
    logger.info(f"[{state.session_id}] {first_client_msg.msg_type.name} not recognised, passing through")
    return PASS_THROUGH


def relay(state: SpxEdgeState, msg: WireMessage, direction: Direction) -> WireMessage:
    """Forward a handshake message, updating the replicated state.

    The client's opening message gets the SPX request extension; everything
    else is forwarded unchanged.

    Raises:
        ProtocolViolation: wrong phase or message out of order
    """
    if state.pass_through:
        return msg
    if state.phase not in _RELAY_PHASES:
        raise ProtocolViolation(f"relay in phase {state.phase.value}")
    adapter = state.adapter
    vanilla = without_spx(msg)
    adapter.check_order(vanilla, direction)
    adapter.replicate(vanilla, direction)

    if state.phase is Phase.DETECTED and direction is Direction.CLIENT_TO_SERVER:
        state.ephemeral = state.enclave.gen_ephemeral()
        state.edge_nonce = state.enclave.fresh_nonce()
        state.advance(Phase.RELAYING)
        request = SpxRequest(state.edge_nonce)
        logger.debug(f"[{state.session_id}] requesting SPX, ephemeral {state.ephemeral.key_id}")
        return WireMessage(msg.msg_type, add_extension(vanilla.payload, request.to_extension()))
    return vanilla


def forward(state: SpxEdgeState, server_msg: WireMessage) -> Optional[WireMessage]:
    """Strip SPX content from a server message before it reaches the client.

    Takes the server's offer out of the carrier message. A "Not Capable"
    answer, or a carrier without any answer, turns the session into plain
    pass-through.

    Raises:
        CertMismatch: the offer is not signed by the pinned server key
    """
    if server_msg.is_spx_internal:
        return None
    if state.pass_through or state.adapter is None:
        return server_msg
    if server_msg.msg_type is not state.adapter.offer_carrier() or state.offer is not None:
        return without_spx(server_msg)

    _, extensions = unpack_body(server_msg.payload)
    ext = find_extension(extensions, EXT_SPX_RESPONSE)
    if ext is None:
        state.fall_back("server ignored the SPX request")
        return server_msg
    offer = SpxOffer.from_extension(ext)
    if not offer.capable:
        state.fall_back("server is not SPX capable")
        return without_spx(server_msg)
    if not offer.verify(state.trust.server_pin, state.edge_nonce, state.context):
        raise CertMismatch("SPX offer is not signed by the pinned server key")
    state.offer = offer
    state.server_nonce = offer.nonce
    logger.debug(f"[{state.session_id}] offer accepted, grant key {key_id(offer.grant_public)}")
    return without_spx(server_msg)


def ready_to_bind(state: SpxEdgeState) -> bool:
    return (
        not state.pass_through
        and state.phase is Phase.RELAYING
        and state.server_nonce is not None
        and state.adapter.at_bind_point()
    )


def bind(state: SpxEdgeState) -> WireMessage:
    """Attest the edge ephemeral together with the server nonce and channel binding.

    Raises:
        NoNonce: the server never issued an SPX nonce
        ProtocolViolation: not at the adapter's bind point
    """
    if state.server_nonce is None:
        raise NoNonce("bind before the server issued an SPX nonce")
    if state.phase is not Phase.RELAYING or not state.adapter.at_bind_point():
        raise ProtocolViolation(f"bind outside the bind point (phase {state.phase.value})")
    state.binding = state.adapter.channel_binding()
    mode = state.trust.mode
    if mode is ServerMode.ATTEST_BEFORE_CONNECT:
        frame = grant_request_frame(state.enclave.function_name, state.ephemeral.public)
    else:
        report = state.enclave.attest(state.ephemeral.public, state.server_nonce, state.binding)
        if mode is ServerMode.ATTEST_AFTER_CONNECT:
            frame = attest_with_key_frame(report, state.ephemeral.public)
        else:
            frame = attestation_frame(report)
    state.advance(Phase.BOUND)
    logger.info(f"[{state.session_id}] bound on {state.channel_id}")
    return frame


def grant_accept(state: SpxEdgeState, grant_msg: WireMessage, conn: Optional[str] = None) -> SpxSession:
    """Verify the server's grant and install the session inside the enclave.

    Raises:
        ProtocolViolation: not Bound, or the grant arrived on another connection
        AttestationInvalid: server report rejected
        AuthFailure: grant does not open under the bound ephemeral
    """
    if state.phase is not Phase.BOUND:
        raise ProtocolViolation(f"grant in phase {state.phase.value}")
    if conn is not None and conn != state.channel_id:
        raise ProtocolViolation(f"grant arrived on {conn}, bound channel is {state.channel_id}")
    report, sealed = parse_grant(grant_msg)
    trust = state.trust
    verdict = verify_report(
        report,
        trust.server_measurement,
        state.edge_nonce,
        trust.platform_public,
        expected_binding=state.binding,
    )
    if not verdict:
        raise AttestationInvalid(verdict.reason.value)
    if report.ephemeral_public != state.offer.grant_public:
        raise AttestationInvalid("GrantKeyMismatch")

    secret = open_grant(state.ephemeral, report.ephemeral_public, state.binding, state.server_nonce, sealed)
    state.advance(Phase.GRANTED)
    client_key, server_key = state.adapter.install_grant(secret)
    session = SpxSession(
        session_id=state.session_id,
        protocol_id=state.protocol_id,
        session_key=client_key,
        client_id=state.client_id,
        server_id=trust.server_id,
        peer_key=server_key,
    )
    state.enclave.session_put(session)
    state.session = session
    state.forget_ephemeral()
    state.advance(Phase.ESTABLISHED)
    logger.info(f"[{state.session_id}] granted {state.protocol_id} session")
    return session


def resume(state: SpxEdgeState, resume_blob: bytes) -> Unsupported:
    """Session resumption is not defined; always ``Unsupported``."""
    return UNSUPPORTED
