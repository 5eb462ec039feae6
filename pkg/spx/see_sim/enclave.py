"""Simulated processor, enclaves and the host-visible ecall surface."""

import logging
import threading
from typing import Dict, Optional

from ..crypto_core import (
    DIRECTION_CLIENT_TO_SERVER,
    KEY_SIZE,
    Entropy,
    KeyPair,
    SymmetricKey,
    aead_open,
    aead_seal,
    counter_nonce,
    generate_keypair,
    generate_signing_keypair,
    hash as sha256,
    key_id,
    sign,
)
from ..exceptions import ForeignKey
from .report import (
    INSTANCE_ID_SIZE,
    NO_BINDING,
    SPX_NONCE_SIZE,
    AttestationReport,
    build_padding,
)
from .sessions import HostStore, SealedBlob, SessionTable, SpxSession

logger = logging.getLogger(__name__)


def measure(manifest: bytes) -> bytes:
    """Measurement of an edge function: SHA-256 of its canonical manifest."""
    return sha256(manifest)


class Platform:
    """Simulated processor holding the attestation signing key.

    Verifiers are given ``public_key`` out of band; the private half never
    leaves this object.
    """

    def __init__(self, entropy: Optional[Entropy] = None, name: str = "platform"):
        self.name = name
        self._entropy = entropy or Entropy()
        self._attestation_key = generate_signing_keypair(self._entropy.spawn(f"{name}/attestation-key"))
        self._enclaves: Dict[str, "Enclave"] = {}

    @property
    def public_key(self) -> bytes:
        return self._attestation_key.public

    def _sign(self, body: bytes):
        return sign(self._attestation_key, body)

    def launch(
        self,
        function_name: str,
        manifest: bytes,
        memory_cap_bytes: Optional[int] = None,
        host_store: Optional[HostStore] = None,
    ) -> "Enclave":
        """Start the enclave for ``function_name``.

        Raises:
            ValueError: the edge function already has an enclave
        """
        if function_name in self._enclaves:
            raise ValueError(f"edge function {function_name!r} already has an enclave")
        enclave = Enclave(
            platform=self,
            function_name=function_name,
            manifest=manifest,
            entropy=self._entropy.spawn(f"{self.name}/enclave/{function_name}"),
            memory_cap_bytes=memory_cap_bytes,
            host_store=host_store,
        )
        self._enclaves[function_name] = enclave
        logger.info(
            f"Launched enclave for {function_name} "
            f"(measurement {enclave.measurement.hex()[:16]}, platform {self.name})"
        )
        return enclave

    def enclave_for(self, function_name: str) -> "Enclave":
        return self._enclaves[function_name]


class Enclave:
    """One shielded edge-function instance.

    Code holding an ``Enclave`` reference runs inside the enclave. Untrusted
    host code only ever gets the :class:`EcallSurface` returned by
    :meth:`surface`. All operations are serialized by one re-entrant lock.
    """

    def __init__(
        self,
        platform: Platform,
        function_name: str,
        manifest: bytes,
        entropy: Entropy,
        memory_cap_bytes: Optional[int] = None,
        host_store: Optional[HostStore] = None,
    ):
        self.function_name = function_name
        self.measurement = measure(manifest)
        self._platform = platform
        self._entropy = entropy
        self.instance_id = entropy.spawn("instance-id").bytes(INSTANCE_ID_SIZE)
        self._sealing_key = SymmetricKey(entropy.spawn("sealing-key").bytes(KEY_SIZE))
        self._keys = entropy.spawn("ephemeral-keys")
        self._nonces = entropy.spawn("nonces")
        self._minted: Dict[bytes, KeyPair] = {}
        self._seal_counter = 0
        self._lock = threading.RLock()
        self.sessions = SessionTable(
            seal=self.seal,
            unseal=self.unseal,
            memory_cap_bytes=memory_cap_bytes,
            host_store=host_store,
        )

    @property
    def platform_public(self) -> bytes:
        return self._platform.public_key

    def gen_ephemeral(self) -> KeyPair:
        """Mint an X25519 key pair inside the enclave."""
        with self._lock:
            pair = generate_keypair(self._keys)
            self._minted[pair.public] = pair
            return pair

    def fresh_nonce(self, size: int = SPX_NONCE_SIZE) -> bytes:
        with self._lock:
            return self._nonces.bytes(size)

    def owns(self, public: bytes) -> bool:
        with self._lock:
            return public in self._minted

    def keypair_for(self, public: bytes) -> KeyPair:
        """Raises ForeignKey for keys this enclave did not mint."""
        with self._lock:
            try:
                return self._minted[public]
            except KeyError:
                raise ForeignKey(f"key {key_id(public)} was not minted by this enclave") from None

    def erase_ephemeral(self, public: bytes) -> None:
        with self._lock:
            self._minted.pop(public, None)

    @property
    def live_ephemerals(self) -> int:
        """Minted key pairs not yet erased."""
        with self._lock:
            return len(self._minted)

    def _sign_report(self, ephemeral_public: bytes, nonce: bytes, binding: bytes) -> AttestationReport:
        padding = build_padding(binding, self.instance_id)
        body = self.measurement + ephemeral_public + nonce + padding
        return AttestationReport(
            measurement=self.measurement,
            ephemeral_public=ephemeral_public,
            nonce=nonce,
            body_padding=padding,
            signature=self._platform._sign(body),
        )

    def attest(self, ephemeral_public: bytes, nonce: bytes, binding: bytes = NO_BINDING) -> AttestationReport:
        """Produce a report binding this enclave to ``(ephemeral_public, nonce, binding)``.

        Raises:
            ForeignKey: ``ephemeral_public`` was not minted by :meth:`gen_ephemeral`
        """
        if len(nonce) != SPX_NONCE_SIZE:
            raise ValueError(f"nonce must be {SPX_NONCE_SIZE} bytes")
        with self._lock:
            self.keypair_for(ephemeral_public)
            return self._sign_report(ephemeral_public, nonce, binding)

    def seal(self, session: SpxSession) -> SealedBlob:
        with self._lock:
            nonce = counter_nonce(self._seal_counter, DIRECTION_CLIENT_TO_SERVER)
            self._seal_counter += 1
        aad = session.session_id.encode("utf-8")
        return SealedBlob(aead_seal(self._sealing_key, nonce, aad, session.to_json()), nonce, aad)

    def unseal(self, blob: SealedBlob) -> SpxSession:
        """Raises AuthFailure for blobs from another enclave or tampered bytes."""
        return SpxSession.from_json(aead_open(self._sealing_key, blob.nonce, blob.aad, blob.ciphertext))

    def session_put(self, session: SpxSession) -> None:
        self.sessions.put(session)

    def session_get(self, session_id: str) -> SpxSession:
        return self.sessions.get(session_id)

    def surface(self) -> "EcallSurface":
        return EcallSurface(self)

    def __repr__(self) -> str:
        return f"Enclave({self.function_name!r}, measurement={self.measurement.hex()[:16]})"


class EcallSurface:
    """What untrusted host code can ask an enclave to do.

    A privileged attacker on the edge host can call these, but only ever
    receives public values and signed reports.
    """

    def __init__(self, enclave: Enclave):
        self._enclave = enclave

    @property
    def measurement(self) -> bytes:
        return self._enclave.measurement

    def gen_ephemeral(self) -> bytes:
        return self._enclave.gen_ephemeral().public

    def attest(self, ephemeral_public: bytes, nonce: bytes, binding: bytes = NO_BINDING) -> AttestationReport:
        return self._enclave.attest(ephemeral_public, nonce, binding)
