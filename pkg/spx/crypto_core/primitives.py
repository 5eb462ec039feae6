"""Cryptographic primitives used by every protocol module.

X25519 for key agreement, Ed25519 for signatures, ChaCha20-Poly1305 for AEAD,
SHA-256 and HKDF-SHA256 for hashing and key derivation. All functions are pure
and safe to call concurrently.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import List, Optional

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ed25519, x25519
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..exceptions import AuthFailure, InvalidPoint
from .entropy import Entropy

KEY_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16
SIGNATURE_SIZE = 64
HASH_SIZE = 32

AEAD_CHACHA20_POLY1305 = "ChaCha20-Poly1305"

# Direction byte placed in the first nonce byte so the two directions of one
# session key never share a nonce.
DIRECTION_CLIENT_TO_SERVER = 0
DIRECTION_SERVER_TO_CLIENT = 1


@dataclass(frozen=True)
class KeyPair:
    """Asymmetric key pair. ``algo`` is ``"x25519"`` or ``"ed25519"``."""

    private: bytes = field(repr=False)
    public: bytes
    algo: str = "x25519"

    def __post_init__(self):
        if len(self.private) != KEY_SIZE or len(self.public) != KEY_SIZE:
            raise ValueError("key pair components must be 32 bytes")

    @property
    def key_id(self) -> str:
        return key_id(self.public)


@dataclass(frozen=True)
class SymmetricKey:
    """32-byte AEAD key."""

    bytes: bytes = field(repr=False)
    algo: str = AEAD_CHACHA20_POLY1305

    def __post_init__(self):
        if len(self.bytes) != KEY_SIZE:
            raise ValueError(f"symmetric key must be {KEY_SIZE} bytes, got {len(self.bytes)}")


@dataclass(frozen=True)
class Signature:
    """Ed25519 signature and the id of the key that produced it."""

    bytes: bytes
    signer: Optional[str] = None


def _raw_public(public_key) -> bytes:
    return public_key.public_bytes(
        encoding=serialization.Encoding.Raw,
        format=serialization.PublicFormat.Raw,
    )


def key_id(public: bytes) -> str:
    """Short printable id for a public key (safe to log)."""
    return hashlib.sha256(public).hexdigest()[:8]


def keypair_from_private(private: bytes) -> KeyPair:
    """Build an X25519 key pair from a 32-byte scalar."""
    sk = x25519.X25519PrivateKey.from_private_bytes(private)
    return KeyPair(private=bytes(private), public=_raw_public(sk.public_key()), algo="x25519")


def generate_keypair(entropy: Optional[Entropy] = None) -> KeyPair:
    """Generate an X25519 key pair."""
    entropy = entropy or Entropy()
    return keypair_from_private(entropy.bytes(KEY_SIZE))


def signing_keypair_from_seed(seed: bytes) -> KeyPair:
    """Build an Ed25519 key pair from a 32-byte seed."""
    sk = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
    return KeyPair(private=bytes(seed), public=_raw_public(sk.public_key()), algo="ed25519")


def generate_signing_keypair(entropy: Optional[Entropy] = None) -> KeyPair:
    """Generate an Ed25519 key pair."""
    entropy = entropy or Entropy()
    return signing_keypair_from_seed(entropy.bytes(KEY_SIZE))


def dh(local: KeyPair, remote_public: bytes) -> bytes:
    """X25519 shared secret between ``local`` and ``remote_public``.

    Raises:
        InvalidPoint: remote value is malformed, all-zero, or of small order
    """
    if len(remote_public) != KEY_SIZE or remote_public == bytes(KEY_SIZE):
        raise InvalidPoint("remote public value is not a valid X25519 point")
    try:
        sk = x25519.X25519PrivateKey.from_private_bytes(local.private)
        return sk.exchange(x25519.X25519PublicKey.from_public_bytes(remote_public))
    except ValueError as exc:
        raise InvalidPoint(f"X25519 exchange failed: {exc}") from exc


def counter_nonce(counter: int, direction: int = DIRECTION_CLIENT_TO_SERVER) -> bytes:
    """12-byte big-endian message counter with the direction in the first byte."""
    if counter < 0 or counter >= 1 << 88:
        raise ValueError("nonce counter out of range")
    return bytes([direction & 0xFF]) + counter.to_bytes(NONCE_SIZE - 1, "big")


def aead_seal(key: SymmetricKey, nonce: bytes, aad: bytes, plaintext: bytes) -> bytes:
    """ChaCha20-Poly1305 encrypt; output is ciphertext followed by the 16-byte tag."""
    if len(nonce) != NONCE_SIZE:
        raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
    return ChaCha20Poly1305(key.bytes).encrypt(nonce, plaintext, aad)


def aead_open(key: SymmetricKey, nonce: bytes, aad: bytes, ciphertext: bytes) -> bytes:
    """ChaCha20-Poly1305 decrypt.

    Raises:
        AuthFailure: tag does not verify under (key, nonce, aad)
    """
    if len(nonce) != NONCE_SIZE:
        raise AuthFailure("nonce must be 12 bytes")
    if len(ciphertext) < TAG_SIZE:
        raise AuthFailure("ciphertext shorter than the authentication tag")
    try:
        return ChaCha20Poly1305(key.bytes).decrypt(nonce, ciphertext, aad)
    except InvalidTag as exc:
        raise AuthFailure("AEAD authentication failed") from exc


def hash(data: bytes) -> bytes:  # noqa: A001
    """SHA-256 digest."""
    return hashlib.sha256(data).digest()


def hkdf(chaining_key: bytes, input_key_material: bytes, n_outputs: int) -> List[bytes]:
    """HKDF-SHA256 with ``chaining_key`` as salt and empty info.

    With empty info this is exactly the Noise ``HKDF(ck, ikm, n)`` construction:
    output ``i`` is ``HMAC(temp_key, output[i-1] || i)``.
    """
    if not 1 <= n_outputs <= 3:
        raise ValueError("hkdf produces 1 to 3 outputs")
    okm = HKDF(
        algorithm=hashes.SHA256(),
        length=HASH_SIZE * n_outputs,
        salt=chaining_key,
        info=b"",
    ).derive(input_key_material)
    return [okm[i * HASH_SIZE:(i + 1) * HASH_SIZE] for i in range(n_outputs)]


def sign(signing_key: KeyPair, message: bytes) -> Signature:
    """Ed25519 signature over ``message``."""
    sk = ed25519.Ed25519PrivateKey.from_private_bytes(signing_key.private)
    return Signature(bytes=sk.sign(message), signer=signing_key.key_id)


def verify(public: bytes, message: bytes, sig) -> bool:
    """Check an Ed25519 signature. Never raises on malformed input."""
    raw = sig.bytes if isinstance(sig, Signature) else sig
    if not isinstance(raw, (bytes, bytearray)) or len(raw) != SIGNATURE_SIZE:
        return False
    try:
        ed25519.Ed25519PublicKey.from_public_bytes(public).verify(bytes(raw), message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False
