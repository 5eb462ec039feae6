"""Endpoint interface shared by the simulator and the loopback runner.

Endpoints are sans-IO state machines. A runner delivers flights of frames and
collects the flights each endpoint wants to send; the runner owns time and
connections.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

from .wire import MsgType, WireMessage


class NetContext(Protocol):
    """What an endpoint may ask of the runner that is driving it."""

    @property
    def now(self) -> float:
        """Current time in microseconds."""

    def open(self, src: str, dst: str) -> str:
        """Open a connection from ``src`` to ``dst`` and return its id."""

    def set_timer(self, endpoint: str, delay_us: float, token: Any) -> None:
        """Call ``on_timer(token)`` on ``endpoint`` after ``delay_us``."""


@dataclass(frozen=True)
class Flight:
    """Frames sent together on one connection.

    ``standalone`` flights are never merged with neighbours, so they stay
    visible as their own round trip in traces.
    """

    conn: str
    frames: Tuple[WireMessage, ...]
    standalone: bool = False

    @classmethod
    def of(cls, conn: str, *frames: WireMessage, standalone: bool = False) -> "Flight":
        return cls(conn, tuple(frames), standalone)


def batch(flights: Sequence[Flight]) -> List[Flight]:
    """Merge adjacent flights on the same connection unless either is standalone."""
    out: List[Flight] = []
    for flight in flights:
        if not flight.frames:
            continue
        if (
            out
            and out[-1].conn == flight.conn
            and not out[-1].standalone
            and not flight.standalone
        ):
            out[-1] = Flight(flight.conn, out[-1].frames + flight.frames)
        else:
            out.append(flight)
    return out


def abort_frame(reason: str) -> WireMessage:
    """ABORT frame carrying a short UTF-8 reason."""
    return WireMessage(MsgType.ABORT, reason.encode("utf-8")[:200])


class OutcomeStatus(str, Enum):
    PENDING = "pending"
    ESTABLISHED = "established"
    SUCCESS = "success"
    PASS_THROUGH = "pass_through"
    ABORTED = "aborted"


@dataclass
class Outcome:
    """What happened on one connection at one endpoint.

    ``session_key`` is test instrumentation: the bytes of the key (or both
    directional keys) this endpoint ended up with.
    """

    endpoint: str
    conn: str
    role: str
    status: OutcomeStatus = OutcomeStatus.PENDING
    reason: Optional[str] = None
    protocol: Optional[str] = None
    session_key: Optional[bytes] = None
    started_us: float = 0.0
    handshake_us: Optional[float] = None
    completed_us: Optional[float] = None
    echo_ok: Optional[bool] = None
    bytes_transferred: int = 0
    observed: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def settled(self) -> bool:
        return self.status in (OutcomeStatus.SUCCESS, OutcomeStatus.ABORTED)

    @property
    def succeeded(self) -> bool:
        return self.status is OutcomeStatus.SUCCESS

    def abort(self, reason: str) -> None:
        if self.status is not OutcomeStatus.SUCCESS:
            self.status = OutcomeStatus.ABORTED
            self.reason = reason

    def to_dict(self) -> Dict[str, Any]:
        return {
            "endpoint": self.endpoint,
            "conn": self.conn,
            "role": self.role,
            "status": self.status.value,
            "reason": self.reason,
            "protocol": self.protocol,
            "handshake_us": self.handshake_us,
            "completed_us": self.completed_us,
            "echo_ok": self.echo_ok,
            "bytes_transferred": self.bytes_transferred,
        }


class Endpoint(ABC):
    """A network participant driven by a runner."""

    role = "endpoint"
    # Set by adversaries that watch every delivered frame.
    observes_links = False

    def __init__(self, name: str, start_at_us: float = 0.0, compute_cost_us: float = 0.0):
        self.name = name
        self.start_at_us = start_at_us
        self.compute_cost_us = compute_cost_us
        self.outcomes: Dict[str, Outcome] = {}

    def outcome(self, conn: str) -> Outcome:
        if conn not in self.outcomes:
            self.outcomes[conn] = Outcome(endpoint=self.name, conn=conn, role=self.role)
        return self.outcomes[conn]

    def start(self, net: NetContext) -> List[Flight]:
        return []

    def on_flight(self, net: NetContext, conn: str, frames: Sequence[WireMessage]) -> List[Flight]:
        out: List[Flight] = []
        for msg in frames:
            out.extend(self.on_message(net, conn, msg))
        return batch(out)

    @abstractmethod
    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        ...

    def on_timer(self, net: NetContext, token: Any) -> List[Flight]:
        return []

    def observe(self, event: Any) -> None:
        """Called with every delivered trace event when ``observes_links`` is set."""

    def is_waiting(self) -> bool:
        """True while this endpoint still expects traffic (used for deadlock detection)."""
        return False

    def close(self) -> None:
        """Release key material still held for unfinished connections; runners call this once a run is over."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"
