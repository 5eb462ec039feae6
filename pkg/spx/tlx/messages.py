"""TLX message bodies, certificates and the Finished computation."""

import struct
from dataclasses import dataclass
from typing import List, Tuple

from ..crypto_core import (
    KEY_SIZE,
    SIGNATURE_SIZE,
    KeyPair,
    Signature,
    SymmetricKey,
    aead_open,
    aead_seal,
    counter_nonce,
    hkdf,
    sign,
    verify,
)
from ..exceptions import AuthFailure, CertMismatch, FinishedMismatch, WireError
from ..wire import Extension, MsgType, WireMessage, pack_body, unpack_body

TLX_VERSION = 0x0303
SUITE_X25519_CHACHA20_POLY1305_SHA256 = 0xCCA9
SUITE_NAMES = {SUITE_X25519_CHACHA20_POLY1305_SHA256: "TLX_ECDHE_X25519_WITH_CHACHA20_POLY1305_SHA256"}

RANDOM_SIZE = 32
VERIFY_DATA_SIZE = 12
DEFAULT_CERT_SIZE = 3072

CLIENT_FINISHED_LABEL = b"client finished"
SERVER_FINISHED_LABEL = b"server finished"

_HELLO = struct.Struct(f">H{RANDOM_SIZE}sH")
_CERT_LABEL = b"TLX-CERT"
_SKX_LABEL = b"TLX-SKX"


@dataclass(frozen=True)
class Hello:
    """ClientHello / ServerHello body."""

    random: bytes
    suite: int = SUITE_X25519_CHACHA20_POLY1305_SHA256
    version: int = TLX_VERSION

    def to_payload(self, extensions: List[Extension] = ()) -> bytes:
        return pack_body(_HELLO.pack(self.version, self.random, self.suite), extensions)

    @classmethod
    def from_payload(cls, payload: bytes) -> Tuple["Hello", List[Extension]]:
        body, extensions = unpack_body(payload)
        if len(body) != _HELLO.size:
            raise WireError("malformed hello body")
        version, random, suite = _HELLO.unpack(body)
        return cls(random=random, suite=suite, version=version), extensions


@dataclass(frozen=True)
class Certificate:
    """Self-signed certificate blob, zero padded to a fixed size."""

    subject: str
    public_key: bytes
    signature: bytes

    @staticmethod
    def _signed(subject: str, public_key: bytes) -> bytes:
        return _CERT_LABEL + subject.encode("utf-8") + public_key

    @classmethod
    def issue(cls, signing_key: KeyPair, subject: str) -> "Certificate":
        sig = sign(signing_key, cls._signed(subject, signing_key.public))
        return cls(subject, signing_key.public, sig.bytes)

    def self_signed_ok(self) -> bool:
        return verify(self.public_key, self._signed(self.subject, self.public_key), Signature(self.signature))

    def to_bytes(self, size: int = DEFAULT_CERT_SIZE) -> bytes:
        subject = self.subject.encode("utf-8")
        core = struct.pack(">H", len(subject)) + subject + self.public_key + self.signature
        if len(core) > size:
            raise ValueError(f"certificate needs {len(core)} bytes, size is {size}")
        return core + bytes(size - len(core))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        if len(data) < 2:
            raise WireError("certificate truncated")
        (subject_len,) = struct.unpack_from(">H", data, 0)
        end = 2 + subject_len + KEY_SIZE + SIGNATURE_SIZE
        if len(data) < end:
            raise WireError("certificate truncated")
        subject = data[2:2 + subject_len].decode("utf-8")
        key_start = 2 + subject_len
        public_key = bytes(data[key_start:key_start + KEY_SIZE])
        signature = bytes(data[key_start + KEY_SIZE:end])
        return cls(subject, public_key, signature)


def server_key_exchange(signing_key: KeyPair, client_random: bytes, server_random: bytes, dh_public: bytes) -> WireMessage:
    sig = sign(signing_key, _SKX_LABEL + client_random + server_random + dh_public)
    return WireMessage(MsgType.SERVER_KEY_EXCHANGE, dh_public + sig.bytes)


def check_server_key_exchange(
    cert: Certificate, client_random: bytes, server_random: bytes, payload: bytes
) -> bytes:
    """Return the server DH public value. Raises CertMismatch."""
    if len(payload) != KEY_SIZE + SIGNATURE_SIZE:
        raise WireError("malformed ServerKeyExchange")
    dh_public, sig = payload[:KEY_SIZE], payload[KEY_SIZE:]
    if not verify(cert.public_key, _SKX_LABEL + client_random + server_random + dh_public, sig):
        raise CertMismatch("ServerKeyExchange is not signed by the certificate key")
    return dh_public


def derive_session_key(dh_secret: bytes, client_random: bytes, server_random: bytes) -> SymmetricKey:
    return SymmetricKey(hkdf(dh_secret, client_random + server_random, 1)[0])


def verify_data(key: SymmetricKey, label: bytes, transcript_digest: bytes) -> bytes:
    return hkdf(key.bytes, label + transcript_digest, 1)[0][:VERIFY_DATA_SIZE]


def finished(key: SymmetricKey, label: bytes, transcript_digest: bytes, direction: int) -> WireMessage:
    """Finished message: verify data sealed with record counter 0."""
    payload = aead_seal(key, counter_nonce(0, direction), b"", verify_data(key, label, transcript_digest))
    return WireMessage(MsgType.FINISHED, payload)


def check_finished(
    key: SymmetricKey, label: bytes, transcript_digest: bytes, direction: int, payload: bytes
) -> None:
    """Raises FinishedMismatch."""
    try:
        received = aead_open(key, counter_nonce(0, direction), b"", payload)
    except AuthFailure as exc:
        raise FinishedMismatch(f"{label.decode()} does not decrypt") from exc
    if received != verify_data(key, label, transcript_digest):
        raise FinishedMismatch(f"{label.decode()} verify data does not match transcript")


CHANGE_CIPHER_SPEC = WireMessage(MsgType.CHANGE_CIPHER_SPEC, b"\x01")
SERVER_HELLO_DONE = WireMessage(MsgType.SERVER_HELLO_DONE, b"")
