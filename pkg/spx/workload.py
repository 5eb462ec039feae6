"""Echo workloads and the client endpoint that drives them."""

import logging
from abc import abstractmethod
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

from .crypto_core import Entropy
from .endpoint import Endpoint, Flight, NetContext, Outcome, OutcomeStatus, abort_frame
from .exceptions import ProtocolViolation, SpxError
from .wire import Direction, MsgType, WireMessage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Workload:
    """Payload sizes a client sends in turn; each must come back unchanged."""

    transfers: Tuple[int, ...] = ()

    @classmethod
    def handshake_only(cls) -> "Workload":
        return cls()

    @classmethod
    def echo(cls, *sizes: int) -> "Workload":
        if any(size < 0 for size in sizes):
            raise ValueError("transfer sizes must be non-negative")
        return cls(tuple(sizes))

    @property
    def total_bytes(self) -> int:
        return sum(self.transfers)


def chunk(data: bytes, size: int) -> List[bytes]:
    """Split ``data`` into records of at most ``size`` bytes (one empty record for no data)."""
    if size <= 0:
        raise ValueError("record size must be positive")
    if not data:
        return [b""]
    return [data[i:i + size] for i in range(0, len(data), size)]


class EchoSession:
    """Client-side bookkeeping for a sequence of echo transfers."""

    def __init__(self, workload: Workload, entropy: Entropy, record_size: int):
        self.workload = workload
        self.entropy = entropy
        self.record_size = record_size
        self._index = 0
        self._sent: Optional[bytes] = None
        self._received = bytearray()
        self.bytes_echoed = 0
        self.mismatch = False

    @property
    def done(self) -> bool:
        return self._sent is None and self._index >= len(self.workload.transfers)

    def next_transfer(self) -> Optional[Sequence[bytes]]:
        """Records for the next transfer, or None when the workload is finished."""
        if self._index >= len(self.workload.transfers):
            return None
        size = self.workload.transfers[self._index]
        self._index += 1
        self._sent = self.entropy.bytes(size)
        self._received = bytearray()
        return chunk(self._sent, self.record_size)

    def receive(self, data: bytes) -> Optional[bool]:
        """Absorb one echoed record.

        Returns:
            None while the current transfer is incomplete, otherwise whether
            the echoed bytes matched what was sent.
        """
        if self._sent is None:
            self.mismatch = True
            return False
        self._received.extend(data)
        if len(self._received) < len(self._sent):
            return None
        ok = bytes(self._received) == self._sent
        self.bytes_echoed += len(self._received)
        self.mismatch = self.mismatch or not ok
        self._sent = None
        return ok


class EchoClient(Endpoint):
    """Client endpoint that runs a handshake and then an echo workload.

    Subclasses wrap a protocol handshake; this class owns the connection,
    the timeout and the echo bookkeeping.
    """

    role = "client"

    def __init__(
        self,
        name: str,
        peer: str,
        entropy: Entropy,
        workload: Optional[Workload] = None,
        record_size: int = 1024,
        start_at_us: float = 0.0,
        timeout_us: Optional[float] = None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, start_at_us=start_at_us, compute_cost_us=compute_cost_us)
        self.peer = peer
        self.entropy = entropy
        self.workload = workload or Workload()
        self.echo = EchoSession(self.workload, entropy.spawn("payload"), record_size)
        self.timeout_us = timeout_us
        self.conn: Optional[str] = None

    # Protocol hooks

    @abstractmethod
    def handshake_start(self) -> List[WireMessage]:
        ...

    @abstractmethod
    def handshake_receive(self, msg: WireMessage) -> List[WireMessage]:
        ...

    @property
    @abstractmethod
    def handshake_established(self) -> bool:
        ...

    @abstractmethod
    def session_key_bytes(self) -> bytes:
        ...

    @abstractmethod
    def seal_record(self, data: bytes) -> WireMessage:
        ...

    @abstractmethod
    def open_record(self, msg: WireMessage) -> bytes:
        ...

    # Endpoint

    def start(self, net: NetContext) -> List[Flight]:
        self.conn = net.open(self.name, self.peer)
        outcome = self.outcome(self.conn)
        outcome.started_us = net.now
        if self.timeout_us is not None:
            net.set_timer(self.name, self.timeout_us, "handshake")
        return [Flight.of(self.conn, *self._sent(outcome, self.handshake_start()))]

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        outcome = self.outcome(conn)
        if outcome.settled:
            return []
        if msg.msg_type is MsgType.ABORT:
            outcome.abort(f"peer aborted: {msg.payload.decode('utf-8', 'replace')}")
            logger.info(f"[{self.name}] {outcome.reason}")
            return []
        try:
            if self.handshake_established:
                return self._on_record(net, outcome, msg)
            outcome.observed.append((int(msg.msg_type), int(Direction.SERVER_TO_CLIENT)))
            reply = self._sent(outcome, self.handshake_receive(msg))
        except SpxError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            logger.warning(f"[{self.name}] aborting: {reason}")
            outcome.abort(reason)
            return [Flight.of(conn, abort_frame(reason))]
        flights = [Flight.of(conn, *reply)]
        if self.handshake_established:
            outcome.status = OutcomeStatus.ESTABLISHED
            outcome.handshake_us = net.now - outcome.started_us
            outcome.session_key = self.session_key_bytes()
            flights.extend(self._next_transfer(net, outcome))
        return flights

    def on_timer(self, net: NetContext, token: Any) -> List[Flight]:
        outcome = self.outcome(self.conn)
        if self.handshake_established or outcome.settled:
            return []
        reason = f"HandshakeTimeout: no handshake after {self.timeout_us:.0f}us"
        outcome.abort(reason)
        return [Flight.of(self.conn, abort_frame(reason))]

    def is_waiting(self) -> bool:
        return self.conn is not None and not self.outcome(self.conn).settled

    def _sent(self, outcome: Outcome, msgs: List[WireMessage]) -> List[WireMessage]:
        outcome.observed.extend((int(m.msg_type), int(Direction.CLIENT_TO_SERVER)) for m in msgs)
        return msgs

    def _next_transfer(self, net: NetContext, outcome: Outcome) -> List[Flight]:
        records = self.echo.next_transfer()
        if records is None:
            outcome.status = OutcomeStatus.SUCCESS
            outcome.completed_us = net.now - outcome.started_us
            outcome.echo_ok = not self.echo.mismatch if self.workload.transfers else None
            return []
        return [Flight.of(self.conn, *(self.seal_record(r) for r in records))]

    def _on_record(self, net: NetContext, outcome: Outcome, msg: WireMessage) -> List[Flight]:
        if msg.msg_type is not MsgType.APPLICATION_DATA:
            raise ProtocolViolation(f"{msg.msg_type.name} after the handshake")
        data = self.open_record(msg)
        outcome.bytes_transferred += len(data)
        result = self.echo.receive(data)
        if result is None:
            return []
        if not result:
            outcome.echo_ok = False
            outcome.abort("echo mismatch")
            return [Flight.of(self.conn, abort_frame("echo mismatch"))]
        return self._next_transfer(net, outcome)
