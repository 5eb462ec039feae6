"""SPX extension payloads, grant sealing and strawman frame codecs."""

import struct
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Tuple

from ..crypto_core import (
    DIRECTION_SERVER_TO_CLIENT,
    KEY_SIZE,
    SIGNATURE_SIZE,
    TAG_SIZE,
    KeyPair,
    Signature,
    SymmetricKey,
    aead_open,
    aead_seal,
    counter_nonce,
    dh,
    hash as sha256,
    hkdf,
    sign,
    verify,
)
from ..exceptions import WireError
from ..see_sim import REPORT_SIZE, SPX_NONCE_SIZE, AttestationReport
from ..wire import (
    EXT_SPX_REQUEST,
    EXT_SPX_RESPONSE,
    HEADER_SIZE,
    Extension,
    MsgType,
    WireMessage,
    encode,
    without_spx,
)

SPX_VERSION = 1
OFFER_LABEL = b"SPX-OFFER"


class ServerMode(str, Enum):
    """How a server ties attestation to the grant.

    Only ``CHANNEL_BOUND`` is SPX; the other two are weak
    variants used as negative controls for the attack suite.
    """

    CHANNEL_BOUND = "channel-bound"
    ATTEST_AFTER_CONNECT = "attest-after-connect"
    ATTEST_BEFORE_CONNECT = "attest-before-connect"


class OfferStatus(IntEnum):
    OK = 0
    NOT_CAPABLE = 1


@dataclass(frozen=True)
class SpxRequest:
    """Edge-to-server extension asking for SPX, carrying the edge's nonce."""

    edge_nonce: bytes
    version: int = SPX_VERSION

    _FORMAT = struct.Struct(f">B{SPX_NONCE_SIZE}s")

    def to_extension(self) -> Extension:
        return Extension(EXT_SPX_REQUEST, self._FORMAT.pack(self.version, self.edge_nonce))

    @classmethod
    def from_extension(cls, ext: Extension) -> "SpxRequest":
        if len(ext.value) != cls._FORMAT.size:
            raise WireError("malformed SPX request extension")
        version, nonce = cls._FORMAT.unpack(ext.value)
        return cls(edge_nonce=nonce, version=version)


@dataclass(frozen=True)
class SpxOffer:
    """Server response extension: status, nonce and signed grant ephemeral."""

    status: OfferStatus
    nonce: bytes = bytes(SPX_NONCE_SIZE)
    grant_public: bytes = bytes(KEY_SIZE)
    signature: bytes = bytes(SIGNATURE_SIZE)

    _FORMAT = struct.Struct(f">B{SPX_NONCE_SIZE}s{KEY_SIZE}s{SIGNATURE_SIZE}s")

    @property
    def capable(self) -> bool:
        return self.status is OfferStatus.OK

    @staticmethod
    def signed_bytes(nonce: bytes, grant_public: bytes, edge_nonce: bytes, context: bytes) -> bytes:
        return OFFER_LABEL + nonce + grant_public + edge_nonce + context

    @classmethod
    def create(
        cls,
        signing_key: KeyPair,
        nonce: bytes,
        grant_public: bytes,
        edge_nonce: bytes,
        context: bytes,
    ) -> "SpxOffer":
        sig = sign(signing_key, cls.signed_bytes(nonce, grant_public, edge_nonce, context))
        return cls(OfferStatus.OK, nonce, grant_public, sig.bytes)

    @classmethod
    def not_capable(cls) -> "SpxOffer":
        return cls(OfferStatus.NOT_CAPABLE)

    def verify(self, server_pin: bytes, edge_nonce: bytes, context: bytes) -> bool:
        return self.capable and verify(
            server_pin,
            self.signed_bytes(self.nonce, self.grant_public, edge_nonce, context),
            Signature(self.signature),
        )

    def to_extension(self) -> Extension:
        return Extension(
            EXT_SPX_RESPONSE,
            self._FORMAT.pack(int(self.status), self.nonce, self.grant_public, self.signature),
        )

    @classmethod
    def from_extension(cls, ext: Extension) -> "SpxOffer":
        if len(ext.value) != cls._FORMAT.size:
            raise WireError("malformed SPX response extension")
        status, nonce, grant_public, signature = cls._FORMAT.unpack(ext.value)
        try:
            status = OfferStatus(status)
        except ValueError as exc:
            raise WireError(f"unknown SPX offer status {status}") from exc
        return cls(status, nonce, grant_public, signature)


def offer_context(first_client_msg: WireMessage) -> bytes:
    """Digest of the client's opening message without SPX extensions."""
    return sha256(encode(without_spx(first_client_msg)))


# Grant sealing

def _grant_key(shared: bytes, binding: bytes) -> SymmetricKey:
    return SymmetricKey(hkdf(binding, shared, 1)[0])


def _grant_aad(recipient_public: bytes, server_nonce: bytes) -> bytes:
    return recipient_public + server_nonce


GRANT_NONCE = counter_nonce(0, DIRECTION_SERVER_TO_CLIENT)


def seal_grant(
    server_ephemeral: KeyPair,
    recipient_public: bytes,
    binding: bytes,
    server_nonce: bytes,
    secret: bytes,
) -> bytes:
    """Encrypt ``secret`` to ``recipient_public`` with DH, hkdf and AEAD."""
    key = _grant_key(dh(server_ephemeral, recipient_public), binding)
    return aead_seal(key, GRANT_NONCE, _grant_aad(recipient_public, server_nonce), secret)


def open_grant(
    recipient: KeyPair,
    server_public: bytes,
    binding: bytes,
    server_nonce: bytes,
    sealed: bytes,
) -> bytes:
    """Inverse of :func:`seal_grant`. Raises AuthFailure."""
    key = _grant_key(dh(recipient, server_public), binding)
    return aead_open(key, GRANT_NONCE, _grant_aad(recipient.public, server_nonce), sealed)


def grant_frame(report: AttestationReport, sealed: bytes) -> WireMessage:
    return WireMessage(MsgType.SPX_GRANT, report.to_bytes() + sealed)


def parse_grant(msg: WireMessage) -> Tuple[AttestationReport, bytes]:
    if msg.msg_type is not MsgType.SPX_GRANT or len(msg.payload) < REPORT_SIZE + TAG_SIZE:
        raise WireError("malformed SPX grant")
    return AttestationReport.from_bytes(msg.payload[:REPORT_SIZE]), msg.payload[REPORT_SIZE:]


def attestation_frame(report: AttestationReport) -> WireMessage:
    return WireMessage(MsgType.SPX_ATTESTATION, report.to_bytes())


def parse_attestation(msg: WireMessage) -> AttestationReport:
    return AttestationReport.from_bytes(msg.payload)


def grant_message_bytes(secret_size: int) -> int:
    """Encoded size of an SPX grant frame carrying ``secret_size`` secret bytes."""
    return HEADER_SIZE + REPORT_SIZE + secret_size + TAG_SIZE


# Strawman frames

def attest_with_key_frame(report: AttestationReport, grant_key_public: bytes) -> WireMessage:
    return WireMessage(MsgType.SPX_ATTEST_WITH_KEY, report.to_bytes() + grant_key_public)


def parse_attest_with_key(msg: WireMessage) -> Tuple[AttestationReport, bytes]:
    if len(msg.payload) != REPORT_SIZE + KEY_SIZE:
        raise WireError("malformed attest-with-key frame")
    return AttestationReport.from_bytes(msg.payload[:REPORT_SIZE]), msg.payload[REPORT_SIZE:]


def register_frame(edge_id: str) -> WireMessage:
    return WireMessage(MsgType.SPX_REGISTER, edge_id.encode("utf-8"))


def challenge_frame(nonce: bytes) -> WireMessage:
    return WireMessage(MsgType.SPX_CHALLENGE, nonce)


def grant_request_frame(edge_id: str, grant_key_public: bytes) -> WireMessage:
    return WireMessage(MsgType.SPX_GRANT_REQUEST, grant_key_public + edge_id.encode("utf-8"))


def parse_grant_request(msg: WireMessage) -> Tuple[str, bytes]:
    if len(msg.payload) <= KEY_SIZE:
        raise WireError("malformed grant request")
    return msg.payload[KEY_SIZE:].decode("utf-8"), msg.payload[:KEY_SIZE]
