"""Edge-side SPX state and the value results of the generic operations."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional

from ..crypto_core import KeyPair
from ..exceptions import ProtocolViolation
from ..see_sim import Enclave, SpxSession
from .adapter import ProtocolAdapter
from .messages import ServerMode, SpxOffer

logger = logging.getLogger(__name__)


class Phase(str, Enum):
    IDLE = "Idle"
    DETECTED = "Detected"
    RELAYING = "Relaying"
    BOUND = "Bound"
    GRANTED = "Granted"
    ESTABLISHED = "Established"
    ABORTED = "Aborted"


_NEXT: Dict[Phase, FrozenSet[Phase]] = {
    Phase.IDLE: frozenset({Phase.DETECTED}),
    Phase.DETECTED: frozenset({Phase.RELAYING}),
    Phase.RELAYING: frozenset({Phase.BOUND}),
    Phase.BOUND: frozenset({Phase.GRANTED}),
    Phase.GRANTED: frozenset({Phase.ESTABLISHED}),
    Phase.ESTABLISHED: frozenset(),
    Phase.ABORTED: frozenset(),
}


def can_transition(current: Phase, target: Phase) -> bool:
    if target is Phase.ABORTED:
        return current is not Phase.ABORTED
    return target in _NEXT[current]


@dataclass(frozen=True)
class Detected:
    protocol_id: str


@dataclass(frozen=True)
class PassThrough:
    """Protocol not recognised; frames are relayed unmodified."""


@dataclass(frozen=True)
class Unsupported:
    """Returned by ``resume``; no resumption protocol is defined."""


PASS_THROUGH = PassThrough()
UNSUPPORTED = Unsupported()


@dataclass(frozen=True)
class EdgeTrust:
    """What an edge function is provisioned with about its server.

    Args:
        server_pin: Ed25519 key expected to sign SPX offers (certificate key)
        server_measurement: expected measurement of the server's enclave
        platform_public: platform key that signs the server's reports
        mode: how the server binds attestation to grants
    """

    server_pin: bytes
    server_measurement: bytes
    platform_public: bytes
    server_id: str = "server"
    mode: ServerMode = ServerMode.CHANNEL_BOUND


@dataclass
class SpxEdgeState:
    """Per-client-connection SPX state at the edge."""

    enclave: Enclave
    trust: EdgeTrust
    session_id: str
    client_id: str
    channel_id: Optional[str] = None
    adapter: Optional[ProtocolAdapter] = None
    phase: Phase = Phase.IDLE
    protocol_id: Optional[str] = None
    ephemeral: Optional[KeyPair] = None
    edge_nonce: Optional[bytes] = None
    server_nonce: Optional[bytes] = None
    offer: Optional[SpxOffer] = None
    context: Optional[bytes] = None
    binding: Optional[bytes] = None
    session: Optional[SpxSession] = None
    pass_through: bool = False
    abort_reason: Optional[str] = None
    history: List[Phase] = field(default_factory=lambda: [Phase.IDLE])

    def advance(self, target: Phase) -> None:
        if not can_transition(self.phase, target):
            raise ProtocolViolation(f"illegal SPX phase change {self.phase.value} -> {target.value}")
        logger.debug(f"[{self.session_id}] {self.phase.value} -> {target.value}")
        self.phase = target
        self.history.append(target)

    def abort(self, reason: str) -> None:
        if self.phase is not Phase.ABORTED:
            self.advance(Phase.ABORTED)
        self.abort_reason = self.abort_reason or reason
        self.forget_ephemeral()

    def fall_back(self, reason: str) -> None:
        """Give up on SPX for this session and relay opaquely."""
        logger.warning(f"[{self.session_id}] falling back to pass-through: {reason}")
        self.abort(reason)
        self.pass_through = True

    def forget_ephemeral(self) -> None:
        if self.ephemeral is not None:
            self.enclave.erase_ephemeral(self.ephemeral.public)
            self.ephemeral = None

    @property
    def established(self) -> bool:
        return self.phase is Phase.ESTABLISHED
