"""Exception hierarchy for spx.

Value results (Accept/Reject, Detected/PassThrough, Unsupported) are never
raised; everything here signals a failed operation.
"""


class SpxError(Exception):
    """Base class for all spx errors."""


# crypto_core

class InvalidPoint(SpxError, ValueError):
    """Remote public value is not a usable X25519 point."""


class AuthFailure(SpxError):
    """AEAD tag did not verify (wrong key, nonce, aad, or tampered bytes)."""


# wire

class WireError(SpxError, ValueError):
    """Malformed frame."""


class Truncated(WireError):
    """Fewer bytes available than the header declares."""


class UnknownTag(WireError):
    """Message type is not in the registered tag table."""


class Oversized(WireError):
    """Payload exceeds the frame cap."""


# see_sim

class ForeignKey(SpxError):
    """Attestation requested for a key the enclave did not mint."""


class NotFound(SpxError, KeyError):
    """Unknown session id."""


# spx_core / protocols

class ProtocolViolation(SpxError):
    """Message arrived out of the expected order or in the wrong phase."""


class NoNonce(ProtocolViolation):
    """Bind attempted before the server issued an SPX nonce."""


class OutOfTurn(ProtocolViolation):
    """Noise message written or read when it is not this role's turn."""


class HandshakeFailure(SpxError):
    """A handshake could not complete."""


class CertMismatch(HandshakeFailure):
    """Certificate or signed key does not match the pinned identity."""


class FinishedMismatch(HandshakeFailure):
    """Finished verify data did not match the local transcript."""


class HandshakeTimeout(HandshakeFailure):
    """Peer did not complete the handshake in time."""


class AttestationInvalid(HandshakeFailure):
    """Attestation report was rejected."""

    def __init__(self, reason: str):
        super().__init__(f"attestation rejected: {reason}")
        self.reason = reason


class UnsupportedPattern(SpxError, ValueError):
    """Noise pattern is not in the supported table."""


# netsim / config

class Deadlock(SpxError):
    """Simulation ran out of events while endpoints were still waiting."""


class ConfigError(SpxError, ValueError):
    """Invalid configuration value or file."""
