"""Server side of SPX: offers, bind verification and grants."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..crypto_core import KeyPair, key_id
from ..exceptions import AttestationInvalid, ProtocolViolation
from ..see_sim import Enclave, verify_report
from ..wire import MsgType, WireMessage
from .messages import (
    ServerMode,
    SpxOffer,
    SpxRequest,
    challenge_frame,
    grant_frame,
    parse_attest_with_key,
    parse_attestation,
    parse_grant_request,
    seal_grant,
)

logger = logging.getLogger(__name__)

_BIND_FRAME = {
    ServerMode.CHANNEL_BOUND: MsgType.SPX_ATTESTATION,
    ServerMode.ATTEST_AFTER_CONNECT: MsgType.SPX_ATTEST_WITH_KEY,
    ServerMode.ATTEST_BEFORE_CONNECT: MsgType.SPX_GRANT_REQUEST,
}


@dataclass
class SpxServerPolicy:
    """Everything a server needs to take part in SPX.

    Args:
        signing_key: Ed25519 identity key (the certificate key for TLX)
        enclave: the server's own enclave; mints grant ephemerals and signs
            the report that accompanies each grant
        edge_measurement: measurement an edge function must attest to
        platform_public: platform key that signs edge reports
        mode: binding discipline; anything but ``CHANNEL_BOUND`` is a strawman
    """

    signing_key: KeyPair
    enclave: Enclave
    edge_measurement: bytes
    platform_public: bytes
    mode: ServerMode = ServerMode.CHANNEL_BOUND
    server_id: str = "server"
    registered: Dict[str, bytes] = field(default_factory=dict)
    _challenges: Dict[str, tuple] = field(default_factory=dict, repr=False)

    def open_session(self, request: SpxRequest, context: bytes) -> "SpxServerSession":
        return SpxServerSession(self, request, context)

    def forget(self, conn: str) -> None:
        """Drop any registration challenge pending on ``conn``."""
        self._challenges.pop(conn, None)

    # Registration, used only by the attest-before-connect strawman.

    def handles_registration(self, conn: str, msg: WireMessage) -> bool:
        return msg.msg_type is MsgType.SPX_REGISTER or (
            conn in self._challenges and msg.msg_type is MsgType.SPX_ATTESTATION
        )

    def on_registration(self, conn: str, msg: WireMessage) -> List[WireMessage]:
        if msg.msg_type is MsgType.SPX_REGISTER:
            edge_id = msg.payload.decode("utf-8")
            nonce = self.enclave.fresh_nonce()
            self._challenges[conn] = (edge_id, nonce)
            return [challenge_frame(nonce)]
        edge_id, nonce = self._challenges.pop(conn)
        report = parse_attestation(msg)
        verdict = verify_report(report, self.edge_measurement, nonce, self.platform_public)
        if not verdict:
            raise AttestationInvalid(verdict.reason.value)
        self.registered[edge_id] = report.ephemeral_public
        logger.info(f"Registered edge function {edge_id}")
        return []


class SpxServerSession:
    """SPX exchange for one client connection at the server."""

    def __init__(self, policy: SpxServerPolicy, request: SpxRequest, context: bytes):
        self.policy = policy
        self.request = request
        self.nonce = policy.enclave.fresh_nonce()
        self._grant_ephemeral: Optional[KeyPair] = policy.enclave.gen_ephemeral()
        self.offer = SpxOffer.create(
            policy.signing_key,
            self.nonce,
            self._grant_ephemeral.public,
            request.edge_nonce,
            context,
        )
        self.recipient: Optional[bytes] = None
        self.binding: Optional[bytes] = None
        self.granted = False

    @property
    def bound(self) -> bool:
        return self.recipient is not None

    @property
    def bind_frame_type(self) -> MsgType:
        return _BIND_FRAME[self.policy.mode]

    def accept_bind(self, msg: WireMessage, binding: bytes) -> None:
        """Check the edge's bind message against this session.

        Args:
            msg: bind frame as received on this connection
            binding: the server's own channel binding at the bind point

        Raises:
            ProtocolViolation: wrong frame for the mode, or a second bind
            AttestationInvalid: report rejected
        """
        if self.bound:
            raise ProtocolViolation("duplicate bind")
        if msg.msg_type is not self.bind_frame_type:
            raise ProtocolViolation(f"expected {self.bind_frame_type.name}, got {msg.msg_type.name}")
        policy = self.policy
        mode = policy.mode
        if mode is ServerMode.ATTEST_BEFORE_CONNECT:
            edge_id, recipient = parse_grant_request(msg)
            if edge_id not in policy.registered:
                raise AttestationInvalid("UnregisteredEdge")
        else:
            if mode is ServerMode.CHANNEL_BOUND:
                report = parse_attestation(msg)
                recipient = report.ephemeral_public
                expected_binding = binding
            else:
                report, recipient = parse_attest_with_key(msg)
                expected_binding = None
            verdict = verify_report(
                report,
                policy.edge_measurement,
                self.nonce,
                policy.platform_public,
                expected_binding=expected_binding,
            )
            if not verdict:
                logger.warning(f"Rejected edge attestation: {verdict}")
                raise AttestationInvalid(verdict.reason.value)
        self.recipient = recipient
        self.binding = binding
        logger.info(f"Edge bound, grant will go to {key_id(recipient)} ({mode.value})")

    def issue_grant(self, secret: bytes) -> WireMessage:
        """Seal ``secret`` to the bound edge key, with the server's own report."""
        if not self.bound:
            raise ProtocolViolation("grant before bind")
        if self.granted:
            raise ProtocolViolation("grant already issued")
        if self._grant_ephemeral is None:
            raise ProtocolViolation("session closed")
        enclave = self.policy.enclave
        report = enclave.attest(self._grant_ephemeral.public, self.request.edge_nonce, self.binding)
        sealed = seal_grant(self._grant_ephemeral, self.recipient, self.binding, self.nonce, secret)
        enclave.erase_ephemeral(self._grant_ephemeral.public)
        self._grant_ephemeral = None
        self.granted = True
        return grant_frame(report, sealed)

    def close(self) -> None:
        """Erase the grant ephemeral of a session that will never grant."""
        if self._grant_ephemeral is not None:
            self.policy.enclave.erase_ephemeral(self._grant_ephemeral.public)
            self._grant_ephemeral = None
