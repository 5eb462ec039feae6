"""Deterministic cryptographic primitives for spx."""

from .entropy import Entropy
from .primitives import (
    AEAD_CHACHA20_POLY1305,
    DIRECTION_CLIENT_TO_SERVER,
    DIRECTION_SERVER_TO_CLIENT,
    HASH_SIZE,
    KEY_SIZE,
    NONCE_SIZE,
    SIGNATURE_SIZE,
    TAG_SIZE,
    KeyPair,
    Signature,
    SymmetricKey,
    aead_open,
    aead_seal,
    counter_nonce,
    dh,
    generate_keypair,
    generate_signing_keypair,
    hash,
    hkdf,
    key_id,
    keypair_from_private,
    sign,
    signing_keypair_from_seed,
    verify,
)

__all__ = [
    "Entropy",
    "AEAD_CHACHA20_POLY1305",
    "DIRECTION_CLIENT_TO_SERVER",
    "DIRECTION_SERVER_TO_CLIENT",
    "HASH_SIZE",
    "KEY_SIZE",
    "NONCE_SIZE",
    "SIGNATURE_SIZE",
    "TAG_SIZE",
    "KeyPair",
    "Signature",
    "SymmetricKey",
    "aead_open",
    "aead_seal",
    "counter_nonce",
    "dh",
    "generate_keypair",
    "generate_signing_keypair",
    "hash",
    "hkdf",
    "key_id",
    "keypair_from_private",
    "sign",
    "signing_keypair_from_seed",
    "verify",
]
