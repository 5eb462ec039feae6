"""Noise CipherState and SymmetricState over ChaCha20-Poly1305 and SHA-256."""

import struct
from typing import Optional, Tuple

from ..crypto_core import HASH_SIZE, SymmetricKey, aead_open, aead_seal, hkdf
from ..crypto_core import hash as sha256
from ..exceptions import ProtocolViolation

MAX_NONCE = 2**64 - 1

DH_NAME = "25519"
CIPHER_NAME = "ChaChaPoly"
HASH_NAME = "SHA256"


def protocol_name(pattern: str) -> bytes:
    return f"Noise_{pattern}_{DH_NAME}_{CIPHER_NAME}_{HASH_NAME}".encode("ascii")


def noise_nonce(n: int) -> bytes:
    """ChaChaPoly nonce: 32 bits of zeros followed by the little-endian counter."""
    return b"\x00" * 4 + struct.pack("<Q", n)


class CipherState:
    """Key and nonce counter; encrypts as the identity until a key is set."""

    def __init__(self, key: Optional[bytes] = None):
        self.k: Optional[SymmetricKey] = None
        self.n = 0
        if key is not None:
            self.initialize_key(key)

    def initialize_key(self, key: bytes) -> None:
        self.k = SymmetricKey(key)
        self.n = 0

    @property
    def has_key(self) -> bool:
        return self.k is not None

    def _nonce(self) -> bytes:
        if self.n >= MAX_NONCE:
            raise ProtocolViolation("Noise nonce space exhausted")
        return noise_nonce(self.n)

    def encrypt_with_ad(self, ad: bytes, plaintext: bytes) -> bytes:
        if self.k is None:
            return plaintext
        ciphertext = aead_seal(self.k, self._nonce(), ad, plaintext)
        self.n += 1
        return ciphertext

    def decrypt_with_ad(self, ad: bytes, ciphertext: bytes) -> bytes:
        """Raises AuthFailure; the nonce only advances on success."""
        if self.k is None:
            return ciphertext
        plaintext = aead_open(self.k, self._nonce(), ad, ciphertext)
        self.n += 1
        return plaintext


class SymmetricState:
    """Chaining key, handshake hash and the handshake CipherState."""

    def __init__(self, name: bytes):
        self.h = name.ljust(HASH_SIZE, b"\x00") if len(name) <= HASH_SIZE else sha256(name)
        self.ck: Optional[bytes] = self.h
        self.cipher = CipherState()

    def mix_key(self, input_key_material: bytes) -> None:
        self.ck, temp_k = hkdf(self.ck, input_key_material, 2)
        self.cipher.initialize_key(temp_k)

    def mix_hash(self, data: bytes) -> None:
        self.h = sha256(self.h + data)

    def encrypt_and_hash(self, plaintext: bytes) -> bytes:
        ciphertext = self.cipher.encrypt_with_ad(self.h, plaintext)
        self.mix_hash(ciphertext)
        return ciphertext

    def decrypt_and_hash(self, ciphertext: bytes) -> bytes:
        plaintext = self.cipher.decrypt_with_ad(self.h, ciphertext)
        self.mix_hash(ciphertext)
        return plaintext

    def split(self) -> Tuple[CipherState, CipherState]:
        k1, k2 = hkdf(self.ck, b"", 2)
        return CipherState(k1), CipherState(k2)
