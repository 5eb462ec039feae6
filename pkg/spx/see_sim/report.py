"""Attestation report format and local verification.

Serialized layout, 512 bytes in total::

    measurement (32) | ephemeral_public (32) | nonce (16) | body_padding (368) | signature (64)

The padding region starts with a 32-byte channel binding and a 16-byte enclave
instance id; the rest is zero. The platform signature covers the first 448
bytes.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from ..crypto_core import SIGNATURE_SIZE, Signature, verify
from ..exceptions import WireError

REPORT_SIZE = 512
MEASUREMENT_SIZE = 32
EPHEMERAL_SIZE = 32
SPX_NONCE_SIZE = 16
BINDING_SIZE = 32
INSTANCE_ID_SIZE = 16
PADDING_SIZE = REPORT_SIZE - MEASUREMENT_SIZE - EPHEMERAL_SIZE - SPX_NONCE_SIZE - SIGNATURE_SIZE
SIGNED_SIZE = REPORT_SIZE - SIGNATURE_SIZE

NO_BINDING = bytes(BINDING_SIZE)


def build_padding(binding: bytes = NO_BINDING, instance_id: bytes = bytes(INSTANCE_ID_SIZE)) -> bytes:
    if len(binding) != BINDING_SIZE:
        raise ValueError(f"channel binding must be {BINDING_SIZE} bytes")
    if len(instance_id) != INSTANCE_ID_SIZE:
        raise ValueError(f"instance id must be {INSTANCE_ID_SIZE} bytes")
    head = binding + instance_id
    return head + bytes(PADDING_SIZE - len(head))


@dataclass(frozen=True)
class AttestationReport:
    """Signed evidence of enclave identity bound to an ephemeral key and nonce."""

    measurement: bytes
    ephemeral_public: bytes
    nonce: bytes
    body_padding: bytes
    signature: Signature

    def __post_init__(self):
        sizes = (
            ("measurement", self.measurement, MEASUREMENT_SIZE),
            ("ephemeral_public", self.ephemeral_public, EPHEMERAL_SIZE),
            ("nonce", self.nonce, SPX_NONCE_SIZE),
            ("body_padding", self.body_padding, PADDING_SIZE),
            ("signature", self.signature.bytes, SIGNATURE_SIZE),
        )
        for name, value, size in sizes:
            if len(value) != size:
                raise ValueError(f"{name} must be {size} bytes, got {len(value)}")

    @property
    def binding(self) -> bytes:
        return self.body_padding[:BINDING_SIZE]

    @property
    def instance_id(self) -> bytes:
        return self.body_padding[BINDING_SIZE:BINDING_SIZE + INSTANCE_ID_SIZE]

    def signed_bytes(self) -> bytes:
        return self.measurement + self.ephemeral_public + self.nonce + self.body_padding

    def to_bytes(self) -> bytes:
        return self.signed_bytes() + self.signature.bytes

    @classmethod
    def from_bytes(cls, data: bytes) -> "AttestationReport":
        if len(data) != REPORT_SIZE:
            raise WireError(f"attestation report must be {REPORT_SIZE} bytes, got {len(data)}")
        m_end = MEASUREMENT_SIZE
        e_end = m_end + EPHEMERAL_SIZE
        n_end = e_end + SPX_NONCE_SIZE
        return cls(
            measurement=bytes(data[:m_end]),
            ephemeral_public=bytes(data[m_end:e_end]),
            nonce=bytes(data[e_end:n_end]),
            body_padding=bytes(data[n_end:SIGNED_SIZE]),
            signature=Signature(bytes(data[SIGNED_SIZE:])),
        )


class RejectReason(str, Enum):
    BAD_SIGNATURE = "BadSignature"
    MEASUREMENT_MISMATCH = "MeasurementMismatch"
    FRESHNESS_MISMATCH = "FreshnessMismatch"
    BINDING_MISMATCH = "BindingMismatch"


@dataclass(frozen=True)
class Verdict:
    """``Accept`` or ``Reject(reason)``; truthy iff accepted."""

    accepted: bool
    reason: Optional[RejectReason] = None

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        return "Accept" if self.accepted else f"Reject({self.reason.value})"


ACCEPT = Verdict(True)


def reject(reason: RejectReason) -> Verdict:
    return Verdict(False, reason)


def verify_report(
    report: AttestationReport,
    expected_measurement: bytes,
    expected_nonce: bytes,
    platform_public: bytes,
    expected_binding: Optional[bytes] = None,
) -> Verdict:
    """Check a report locally against the platform key. Never raises.

    The signature is checked first, so a forged report is always reported as
    ``BadSignature`` whatever else it claims.
    """
    if not verify(platform_public, report.signed_bytes(), report.signature):
        return reject(RejectReason.BAD_SIGNATURE)
    if report.measurement != expected_measurement:
        return reject(RejectReason.MEASUREMENT_MISMATCH)
    if report.nonce != expected_nonce:
        return reject(RejectReason.FRESHNESS_MISMATCH)
    if expected_binding is not None and report.binding != expected_binding:
        return reject(RejectReason.BINDING_MISMATCH)
    return ACCEPT
