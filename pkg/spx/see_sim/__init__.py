"""Simulated shielded execution environment."""

from .enclave import EcallSurface, Enclave, Platform, measure
from .report import (
    ACCEPT,
    BINDING_SIZE,
    INSTANCE_ID_SIZE,
    NO_BINDING,
    PADDING_SIZE,
    REPORT_SIZE,
    SPX_NONCE_SIZE,
    AttestationReport,
    RejectReason,
    Verdict,
    build_padding,
    verify_report,
)
from .sessions import (
    SESSION_SLOT_BYTES,
    DirectoryHostStore,
    HostStore,
    MemoryHostStore,
    SealedBlob,
    SessionTable,
    SpxSession,
)

__all__ = [
    "EcallSurface",
    "Enclave",
    "Platform",
    "measure",
    "ACCEPT",
    "BINDING_SIZE",
    "INSTANCE_ID_SIZE",
    "NO_BINDING",
    "PADDING_SIZE",
    "REPORT_SIZE",
    "SPX_NONCE_SIZE",
    "AttestationReport",
    "RejectReason",
    "Verdict",
    "build_padding",
    "verify_report",
    "SESSION_SLOT_BYTES",
    "DirectoryHostStore",
    "HostStore",
    "MemoryHostStore",
    "SealedBlob",
    "SessionTable",
    "SpxSession",
]
